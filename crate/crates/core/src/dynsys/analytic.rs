//! Closed-form solutions and descriptor values used as test oracles.

use crate::dynsys::{SystemId, SystemSpec};
use crate::error::{Error, Result};

/// Linear saddle `ẋ = λx, ẏ = -μy` from `(x₀, y₀)` at `t = 0`.
pub fn linear_saddle_solution(lambda: f64, mu: f64, ic: [f64; 2], t: f64) -> [f64; 2] {
    [ic[0] * (lambda * t).exp(), ic[1] * (-mu * t).exp()]
}

/// Nonlinear saddle `ẋ = x, ẏ = -2(y - x²)`, i.e. λ = -2, μ = 1.
pub fn nonlinear_saddle_solution(ic: [f64; 2], t: f64) -> [f64; 2] {
    let [x0, y0] = ic;
    let half_sq = 0.5 * x0 * x0;
    [
        x0 * t.exp(),
        half_sq * (2.0 * t).exp() + (y0 - half_sq) * (-2.0 * t).exp(),
    ]
}

/// Time at which the β = 0 Hopf normal form blows up backward from `r₀`.
/// Infinite when the orbit starts at the origin.
pub fn hopf_blow_up_time(sigma: f64, r0: f64) -> f64 {
    if r0 == 0.0 {
        f64::NEG_INFINITY
    } else {
        -1.0 / (2.0 * sigma * r0 * r0)
    }
}

/// Polar solution `(r, θ)` of the β = 0 Hopf normal form.
pub fn hopf_beta0_solution(sigma: f64, r0: f64, theta0: f64, t: f64) -> Result<(f64, f64)> {
    let blow_up_time = hopf_blow_up_time(sigma, r0);
    if t <= blow_up_time {
        return Err(Error::BlowUp { blow_up_time });
    }
    let r = r0 / (2.0 * sigma * t * r0 * r0 + 1.0).sqrt();
    Ok((r, theta0 + t))
}

/// Polar-coordinate descriptor `∫ |ṙ|^p + |θ̇|^p dt` of the β = 0 Hopf
/// normal form over `[0, τ]`.
pub fn hopf_beta0_polar_ld_forward(sigma: f64, p: f64, r0: f64, tau: f64) -> f64 {
    let s = 2.0 * sigma * tau * r0 * r0 + 1.0;
    if (p - 2.0 / 3.0).abs() < 1e-12 {
        sigma.powf(-1.0 / 3.0) / 2.0 * s.ln() + tau
    } else {
        sigma.powf(p - 1.0) * r0.powf(3.0 * p - 2.0) / (2.0 - 3.0 * p)
            * (s.powf(1.0 - 1.5 * p) - 1.0)
            + tau
    }
}

/// Backward counterpart over `[-τ, 0]`; only meaningful while
/// `2στr₀² < 1`, i.e. before the blow-up time.
pub fn hopf_beta0_polar_ld_backward(sigma: f64, p: f64, r0: f64, tau: f64) -> f64 {
    let s = 1.0 - 2.0 * sigma * tau * r0 * r0;
    if (p - 2.0 / 3.0).abs() < 1e-12 {
        -sigma.powf(-1.0 / 3.0) / 2.0 * s.ln() + tau
    } else {
        sigma.powf(p - 1.0) * r0.powf(3.0 * p - 2.0) / (2.0 - 3.0 * p)
            * (1.0 - s.powf(1.0 - 1.5 * p))
            + tau
    }
}

/// Radius at which the backward β = 0 descriptor is non-differentiable.
pub fn hopf_false_ring_radius(sigma: f64, tau_b: f64) -> f64 {
    1.0 / (2.0 * sigma * tau_b).sqrt()
}

/// Total p-norm descriptor of the linear saddle over `[-τ_b, τ_f]`.
pub fn linear_saddle_ld(lambda: f64, mu: f64, p: f64, tau_f: f64, tau_b: f64, ic: [f64; 2]) -> f64 {
    let [x0, y0] = ic;
    let ax = lambda.powf(p - 1.0) * x0.abs().powf(p) / p;
    let ay = mu.powf(p - 1.0) * y0.abs().powf(p) / p;
    ax * ((p * lambda * tau_f).exp() - (-p * lambda * tau_b).exp())
        - ay * ((-p * mu * tau_f).exp() - (p * mu * tau_b).exp())
}

/// Backward horizon that makes the forward and backward contributions of a
/// saddle with expansion rate `λ` and contraction rate `μ` comparable.
pub fn balance_integration_times(lambda: f64, mu: f64, p: f64, tau_f: f64) -> f64 {
    if lambda == mu {
        return tau_f;
    }
    lambda / mu * tau_f + (1.0 - p) / (mu * p) * (mu / lambda).ln()
}

/// Slow-manifold curve `y(x)` for the systems that have one.
pub fn slow_manifold_curve(spec: &SystemSpec, x: f64) -> Result<f64> {
    match spec.id {
        SystemId::NonlinearSaddle => {
            let lambda = spec.param("lambda")?;
            let mu = spec.param("mu")?;
            Ok(lambda * x * x / (lambda - 2.0 * mu))
        }
        SystemId::BeadHoop => {
            let mu = spec.param("mu")?;
            Ok((mu * x.cos() - 1.0) * x.sin())
        }
        SystemId::VdpLienard => Ok(x * x * x / 3.0 - x),
        _ => Err(Error::Unsupported(spec.id.as_str())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{StateVec, SystemSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    #[test]
    fn linear_saddle_solution_values() {
        assert_eq!(linear_saddle_solution(1.0, 2.0, [1.0, 1.0], 0.0), [1.0, 1.0]);
        let [x, y] = linear_saddle_solution(1.0, 2.0, [1.0, 1.0], 1.0);
        assert_abs_diff_eq!(x, E, epsilon = 1e-15);
        assert_abs_diff_eq!(y, (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.13534, epsilon = 1e-5);
        for t in [-3.0, 0.5, 7.0] {
            let [x, y] = linear_saddle_solution(1.0, 2.0, [0.0, 0.7], t);
            assert_eq!(x, 0.0);
            assert_abs_diff_eq!(y, 0.7 * (-2.0 * t).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn nonlinear_saddle_solution_values() {
        let [x, y] = nonlinear_saddle_solution([0.0, 1.0], 1.0);
        assert_eq!(x, 0.0);
        assert_abs_diff_eq!(y, (-2.0f64).exp(), epsilon = 1e-15);
        for t in [-2.0, 0.3, 4.0] {
            let [x, y] = nonlinear_saddle_solution([1.0, 0.5], t);
            assert_abs_diff_eq!(x, t.exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(y, 0.5 * (2.0 * t).exp(), epsilon = 1e-9);
            assert_abs_diff_eq!(y, 0.5 * x * x, epsilon = 1e-9);
        }
        let [x, y] = nonlinear_saddle_solution([1.0, 1.0], 0.5);
        assert_abs_diff_eq!(x, 1.64872, epsilon = 1e-5);
        // ½e + ½e⁻¹ = cosh 1.
        assert_abs_diff_eq!(y, 1.54308, epsilon = 1e-5);
    }

    #[test]
    fn hopf_beta0_values() {
        assert_eq!(hopf_beta0_solution(1.0, 1.0, 0.0, 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(hopf_blow_up_time(1.0, 1.0), -0.5);
        let (r, th) = hopf_beta0_solution(1.0, 1.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(r, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(th, 4.0);
        assert!(matches!(
            hopf_beta0_solution(1.0, 1.0, 0.0, -0.5),
            Err(Error::BlowUp { blow_up_time }) if blow_up_time == -0.5
        ));
        assert!(hopf_beta0_solution(1.0, 0.0, 0.0, -100.0).is_ok());
    }

    #[test]
    fn hopf_polar_ld_branches() {
        let v = hopf_beta0_polar_ld_forward(1.0, 2.0 / 3.0, 0.5, 8.0);
        assert_abs_diff_eq!(v, 0.5 * 5.0f64.ln() + 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 8.8047, epsilon = 1e-4);
        // The generic branch approaches the logarithmic one as p → 2/3.
        let near = hopf_beta0_polar_ld_forward(1.0, 2.0 / 3.0 + 1e-7, 0.5, 8.0);
        assert_abs_diff_eq!(near, v, epsilon = 1e-5);
        let back = hopf_beta0_polar_ld_backward(1.0, 2.0 / 3.0 + 1e-7, 0.2, 8.0);
        let back_log = hopf_beta0_polar_ld_backward(1.0, 2.0 / 3.0, 0.2, 8.0);
        assert_abs_diff_eq!(back, back_log, epsilon = 1e-5);
        assert_eq!(hopf_false_ring_radius(1.0, 8.0), 0.25);
    }

    #[test]
    fn linear_saddle_ld_values() {
        assert_eq!(linear_saddle_ld(1.0, 2.0, 0.5, 8.0, 8.0, [0.0, 0.0]), 0.0);
        let v = linear_saddle_ld(1.0, 2.0, 0.5, 8.0, 8.0, [1.0, 0.0]);
        assert_abs_diff_eq!(v, 2.0 * (4.0f64.exp() - (-4.0f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 109.1597, epsilon = 1e-4);
        let w = linear_saddle_ld(1.0, 2.0, 0.5, 8.0, 8.0, [1.0, 1.0]);
        let second = 2.0f64.powf(-0.5) * 2.0 * (8.0f64.exp() - (-8.0f64).exp());
        assert_abs_diff_eq!(w, v + second, epsilon = 1e-9);
        assert_abs_diff_eq!(w, 4324.9, epsilon = 0.05);
    }

    #[test]
    fn linear_saddle_ld_symmetry_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let p = rng.random_range(0.05..=1.0);
            let (tf, tb) = (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0));
            let v = linear_saddle_ld(1.0, 2.0, p, tf, tb, [x, y]);
            assert_eq!(v, linear_saddle_ld(1.0, 2.0, p, tf, tb, [-x, y]));
            assert_eq!(v, linear_saddle_ld(1.0, 2.0, p, tf, tb, [x, -y]));
            assert!(linear_saddle_ld(1.0, 2.0, p, tf + 0.1, tb, [x, y]) >= v);
            assert!(linear_saddle_ld(1.0, 2.0, p, tf, tb + 0.1, [x, y]) >= v);
        }
    }

    #[test]
    fn balancing_formula() {
        assert_abs_diff_eq!(balance_integration_times(1.0, 2.0, 0.5, 8.0), 4.3466, epsilon = 5e-5);
        for (l, p, t) in [(0.3, 0.5, 2.0), (1.0, 1.0, 8.0), (4.0, 0.1, 0.7)] {
            assert_eq!(balance_integration_times(l, l, p, t), t);
        }
        // Swapping the roles inverts the relation: τ_f ≈ 8 is recovered
        // up to the sign flip of the logarithmic correction.
        let tb = balance_integration_times(1.0, 2.0, 0.5, 8.0);
        let back = balance_integration_times(2.0, 1.0, 0.5, tb);
        let expected = 2.0 * tb + 0.5f64.ln();
        assert_abs_diff_eq!(back, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(back, 8.0, epsilon = 1e-3);
    }

    #[test]
    fn slow_manifold_curves() {
        let ns = SystemSpec::new(SystemId::NonlinearSaddle, &[("lambda", -1.0), ("mu", -0.05)])
            .unwrap();
        assert_abs_diff_eq!(slow_manifold_curve(&ns, 1.0).unwrap(), 1.0 / 0.9, epsilon = 1e-15);
        let lienard = SystemSpec::builtin(SystemId::VdpLienard);
        assert_abs_diff_eq!(slow_manifold_curve(&lienard, 3.0f64.sqrt()).unwrap(), 0.0, epsilon = 1e-15);
        let bead = SystemSpec::builtin(SystemId::BeadHoop);
        let phi = (1.0f64 / 2.3).acos();
        assert_abs_diff_eq!(phi, 1.121, epsilon = 1e-3);
        assert_abs_diff_eq!(slow_manifold_curve(&bead, phi).unwrap(), 0.0, epsilon = 1e-15);
        assert!(slow_manifold_curve(&SystemSpec::builtin(SystemId::Hopf), 0.0).is_err());
    }

    fn assert_solves_ode(spec: &SystemSpec, sol: impl Fn(f64) -> [f64; 2], t: f64) {
        let h = 1e-6 * (1.0 + t.abs());
        let (a, b) = (sol(t + h), sol(t - h));
        let x = sol(t);
        let f = spec.eval_vector_field(&StateVec::new(x.to_vec(), t).unwrap()).unwrap();
        for k in 0..2 {
            let fd = (a[k] - b[k]) / (2.0 * h);
            let scale = f[k].abs().max(1e-3 * (1.0 + x[k].abs()));
            assert!((fd - f[k]).abs() / scale <= 1e-6, "component {k}: fd {fd} vs f {}", f[k]);
        }
    }

    #[test]
    fn analytic_solutions_satisfy_their_odes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lin = SystemSpec::new(SystemId::LinearSaddle, &[("lambda", 1.0), ("mu", 2.0)]).unwrap();
        let nonlin = SystemSpec::builtin(SystemId::NonlinearSaddle);
        let hopf = SystemSpec::new(SystemId::Hopf, &[("beta", 0.0), ("sigma", 1.0)]).unwrap();
        for _ in 0..20 {
            let ic = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let t = rng.random_range(-1.0..1.5);
            assert_solves_ode(&lin, |s| linear_saddle_solution(1.0, 2.0, ic, s), t);
            assert_solves_ode(&nonlin, |s| nonlinear_saddle_solution(ic, s), t);

            let r0 = rng.random_range(0.1..1.0);
            let th0 = rng.random_range(0.0..6.0);
            let t = rng.random_range(0.5 * hopf_blow_up_time(1.0, r0)..3.0);
            let cart = |s: f64| {
                let (r, th) = hopf_beta0_solution(1.0, r0, th0, s).unwrap();
                [r * th.cos(), r * th.sin()]
            };
            assert_solves_ode(&hopf, cart, t);
        }
    }
}
