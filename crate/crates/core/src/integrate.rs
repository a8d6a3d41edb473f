//! Trajectory integration with an attached descriptor accumulator.
//!
//! All runs advance a pseudo-time `s ≥ 0`; physical time is `t₀ ± s`, so a
//! backward run integrates the negated field forward and shares the event
//! logic with forward runs. When a descriptor exponent is supplied the state
//! is extended by one component holding `∫ Σ_k |f_k|^p`, which puts the
//! accumulated value under the same error control as the trajectory.

use serde::{Deserialize, Serialize};

use crate::dynsys::{StateVec, VectorField};
use crate::error::{Error, Result};

/// Largest extended state (4 coordinates + accumulator) plus slack.
const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk45Adaptive,
    Rk4Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step, in time units.
    pub max_step: f64,
    pub method: Method,
    /// Step of the fixed-step scheme; ignored by the adaptive one.
    pub fixed_step: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            max_step: 0.1,
            method: Method::Rk45Adaptive,
            fixed_step: 1e-2,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("integrator `{name}` must be positive, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("max_step", self.max_step)?;
        if self.method == Method::Rk4Fixed {
            positive("fixed_step", self.fixed_step)?;
        }
        if self.max_steps == 0 {
            return Err(Error::Config("integrator `max_steps` must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

/// Ball outside of which integration and accumulation stop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeRegion {
    /// Centre in the leading coordinates; shorter than the state is allowed.
    pub center: Vec<f64>,
    pub radius: f64,
    pub enabled: bool,
}

impl Default for EscapeRegion {
    fn default() -> Self {
        Self::disabled()
    }
}

impl EscapeRegion {
    pub fn disabled() -> Self {
        EscapeRegion { center: Vec::new(), radius: 0.0, enabled: false }
    }

    /// Circle of `radius` about the origin of a planar system.
    pub fn circle(radius: f64) -> Self {
        EscapeRegion { center: vec![0.0, 0.0], radius, enabled: true }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        EscapeRegion { center, radius, enabled: true }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("escape radius must be positive, got {}", self.radius)));
        }
        if self.center.is_empty() || self.center.len() > dim {
            return Err(Error::Config(format!(
                "escape centre has {} coordinates for a {dim}-dimensional system",
                self.center.len()
            )));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("escape centre must be finite".into()));
        }
        Ok(())
    }

    /// Signed distance to the boundary, positive outside.
    #[inline]
    pub fn event(&self, x: &[f64]) -> f64 {
        let d2: f64 = self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
        d2.sqrt() - self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Escaped,
    /// Step-size underflow or a non-finite state; treated as an escape at the
    /// last accepted step.
    EscapedByFailure,
    /// An observer asked to stop.
    Stopped,
}

impl Termination {
    pub fn escaped(self) -> bool {
        matches!(self, Termination::Escaped | Termination::EscapedByFailure)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LDAccumResult {
    pub ld_value: f64,
    pub escaped: bool,
    pub failed: bool,
    pub stop_time: f64,
    pub final_state: StateVec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<StateVec>,
    pub final_state: StateVec,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrobeResult {
    pub points: Vec<StateVec>,
    pub failed: bool,
}

/// Extended right-hand side in pseudo-time.
struct Flow<'a, F: ?Sized> {
    field: &'a F,
    t0: f64,
    sign: f64,
    n: usize,
    p: Option<f64>,
}

impl<F: VectorField + ?Sized> Flow<'_, F> {
    fn len(&self) -> usize {
        self.n + usize::from(self.p.is_some())
    }

    fn time(&self, s: f64) -> f64 {
        self.t0 + self.sign * s
    }

    #[inline]
    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        self.field.eval(self.time(s), &y[..n], &mut dy[..n]);
        if let Some(p) = self.p {
            dy[n] = if p == 0.5 {
                dy[..n].iter().map(|v| v.abs().sqrt()).sum()
            } else if p == 1.0 {
                dy[..n].iter().map(|v| v.abs()).sum()
            } else {
                dy[..n].iter().map(|v| v.abs().powf(p)).sum()
            };
        }
        if self.sign < 0.0 {
            for v in &mut dy[..n] {
                *v = -*v;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Advance {
    Reached,
    Escaped,
    Failed,
    Stopped,
}

type Buf = [f64; MAX_DIM];

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Propagator<'a, 'f, F: ?Sized> {
    flow: &'a Flow<'f, F>,
    cfg: &'a IntegratorConfig,
    escape: &'a EscapeRegion,
    m: usize,
    s: f64,
    y: Buf,
    /// Derivative at `(s, y)` (first-same-as-last).
    dy: Buf,
    h: f64,
    steps: u64,
}

impl<'a, 'f, F: VectorField + ?Sized> Propagator<'a, 'f, F> {
    fn new(flow: &'a Flow<'f, F>, cfg: &'a IntegratorConfig, escape: &'a EscapeRegion, y0: &[f64]) -> Self {
        let m = flow.len();
        let mut y = [0.0; MAX_DIM];
        y[..m].copy_from_slice(&y0[..m]);
        let mut dy = [0.0; MAX_DIM];
        flow.rhs(0.0, &y, &mut dy);
        let mut prop = Propagator { flow, cfg, escape, m, s: 0.0, y, dy, h: 0.0, steps: 0 };
        prop.h = match cfg.method {
            Method::Rk45Adaptive => prop.initial_step(),
            Method::Rk4Fixed => cfg.fixed_step,
        };
        prop
    }

    fn escaped_now(&self) -> bool {
        self.escape.enabled && self.escape.event(&self.y[..self.flow.n]) >= 0.0
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&self) -> f64 {
        let m = self.m;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..m {
            let sc = self.scale(self.y[i], 0.0);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.dy[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / m as f64).sqrt(), (d1 / m as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.cfg.max_step);
        let mut y1 = [0.0; MAX_DIM];
        for i in 0..m {
            y1[i] = self.y[i] + h0 * self.dy[i];
        }
        let mut f1 = [0.0; MAX_DIM];
        self.flow.rhs(h0, &y1, &mut f1);
        let mut d2 = 0.0;
        for i in 0..m {
            d2 += ((f1[i] - self.dy[i]) / self.scale(self.y[i], 0.0)).powi(2);
        }
        let d2 = (d2 / m as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        let h = (100.0 * h0).min(h1).min(self.cfg.max_step);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            1e-6
        }
    }

    /// One Dormand–Prince step of size `h` from the current state. Returns the
    /// new state, its derivative, and the scaled error norm.
    fn dopri_step(&self, h: f64) -> (Buf, Buf, f64) {
        let (m, s, y, k1) = (self.m, self.s, &self.y, &self.dy);
        let flow = self.flow;
        let mut tmp = [0.0; MAX_DIM];
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            ([0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM]);
        for i in 0..m {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        flow.rhs(s + C2 * h, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        flow.rhs(s + C3 * h, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        flow.rhs(s + C4 * h, &tmp, &mut k4);
        for i in 0..m {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        flow.rhs(s + C5 * h, &tmp, &mut k5);
        for i in 0..m {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        flow.rhs(s + h, &tmp, &mut k6);
        let mut y_new = [0.0; MAX_DIM];
        for i in 0..m {
            y_new[i] = y[i]
                + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        flow.rhs(s + h, &y_new, &mut k7);
        let mut err = 0.0;
        for i in 0..m {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.scale(y[i], y_new[i]);
            err += (e / sc).powi(2);
        }
        let err = (err / m as f64).sqrt();
        let finite = y_new[..m].iter().chain(&k7[..m]).all(|v| v.is_finite());
        (y_new, k7, if finite { err } else { f64::INFINITY })
    }

    fn rk4_step(&self, h: f64) -> (Buf, Buf, bool) {
        let (m, s, y, k1) = (self.m, self.s, &self.y, &self.dy);
        let flow = self.flow;
        let mut tmp = [0.0; MAX_DIM];
        let (mut k2, mut k3, mut k4) = ([0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM]);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        flow.rhs(s + 0.5 * h, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        flow.rhs(s + 0.5 * h, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        flow.rhs(s + h, &tmp, &mut k4);
        let mut y_new = [0.0; MAX_DIM];
        for i in 0..m {
            y_new[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut dy_new = [0.0; MAX_DIM];
        flow.rhs(s + h, &y_new, &mut dy_new);
        let finite = y_new[..m].iter().chain(&dy_new[..m]).all(|v| v.is_finite());
        (y_new, dy_new, finite)
    }

    /// Trial step used only for event location inside an accepted step.
    fn sub_step(&self, h: f64) -> Buf {
        match self.cfg.method {
            Method::Rk45Adaptive => self.dopri_step(h).0,
            Method::Rk4Fixed => self.rk4_step(h).0,
        }
    }

    /// Bisects the escape crossing inside the step `[s, s + h]`.
    fn locate_escape(&mut self, h: f64, y_end: Buf) {
        let n = self.flow.n;
        let (mut lo, mut hi) = (0.0, h);
        let mut y_hi = y_end;
        for _ in 0..200 {
            let g_hi = self.escape.event(&y_hi[..n]);
            if g_hi.abs() <= self.cfg.abs_tol || hi - lo <= 4.0 * f64::EPSILON * (self.s.abs() + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let y_mid = self.sub_step(mid);
            if self.escape.event(&y_mid[..n]) >= 0.0 {
                hi = mid;
                y_hi = y_mid;
            } else {
                lo = mid;
            }
        }
        self.s += hi;
        self.y = y_hi;
        let mut dy = [0.0; MAX_DIM];
        self.flow.rhs(self.s, &self.y, &mut dy);
        self.dy = dy;
    }

    /// Advances to `s_end`, invoking `observer` after every accepted step.
    fn advance_to(&mut self, s_end: f64, observer: &mut dyn FnMut(f64, &[f64]) -> bool) -> Advance {
        if self.escaped_now() {
            return Advance::Escaped;
        }
        let h_cap = match self.cfg.method {
            Method::Rk45Adaptive => self.cfg.max_step,
            Method::Rk4Fixed => self.cfg.fixed_step,
        };
        while self.s < s_end {
            if self.steps >= self.cfg.max_steps {
                return Advance::Failed;
            }
            let remaining = s_end - self.s;
            let mut h = self.h.min(h_cap);
            let landing = h >= remaining;
            if landing {
                h = remaining;
            }
            let h_min = 16.0 * f64::EPSILON * self.s.abs().max(1.0);
            let (y_new, dy_new) = match self.cfg.method {
                Method::Rk45Adaptive => {
                    let (y_new, dy_new, err) = self.dopri_step(h);
                    if !(err <= 1.0) {
                        let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                        self.h = h * fac;
                        if self.h < h_min {
                            return Advance::Failed;
                        }
                        continue;
                    }
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !landing {
                        self.h = h * fac;
                    } else {
                        // Keep the step the controller would have taken; a
                        // short landing step says nothing about the scale.
                        self.h = self.h.max(h * fac).min(h_cap);
                    }
                    (y_new, dy_new)
                }
                Method::Rk4Fixed => {
                    let (y_new, dy_new, finite) = self.rk4_step(h);
                    if !finite {
                        return Advance::Failed;
                    }
                    (y_new, dy_new)
                }
            };
            self.steps += 1;
            if self.escape.enabled && self.escape.event(&y_new[..self.flow.n]) >= 0.0 {
                self.locate_escape(h, y_new);
                observer(self.s, &self.y[..self.m]);
                return Advance::Escaped;
            }
            self.s = if landing { s_end } else { self.s + h };
            self.y = y_new;
            self.dy = dy_new;
            if observer(self.s, &self.y[..self.m]) {
                return Advance::Stopped;
            }
        }
        Advance::Reached
    }

    fn state(&self) -> StateVec {
        StateVec {
            coords: self.y[..self.flow.n].to_vec(),
            t: self.flow.time(self.s),
        }
    }
}

fn check_state<F: VectorField + ?Sized>(field: &F, ic: &[f64], t0: f64) -> Result<()> {
    if ic.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: ic.len() });
    }
    if ic.len() + 1 > MAX_DIM {
        return Err(Error::InvalidInput(format!("state dimension {} is too large", ic.len())));
    }
    if !t0.is_finite() || ic.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("initial condition {ic:?} at t = {t0} is not finite")));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("descriptor exponent p must lie in (0, 1], got {p}")))
    }
}

/// Integrates from `t0` to `t1` (either direction), recording the state at
/// each of `sample_times`, which must lie between `t0` and `t1`.
pub fn integrate_trajectory<F: VectorField + ?Sized>(
    field: &F,
    ic: &[f64],
    t0: f64,
    t1: f64,
    sample_times: &[f64],
    cfg: &IntegratorConfig,
    escape: &EscapeRegion,
) -> Result<Trajectory> {
    check_state(field, ic, t0)?;
    cfg.validate()?;
    escape.validate(field.dim())?;
    let sign = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut offsets = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let s = sign * (t - t0);
        if !(0.0..=span).contains(&s) {
            return Err(Error::InvalidInput(format!("sample time {t} outside [{t0}, {t1}]")));
        }
        offsets.push(s);
    }
    if offsets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("sample times must be ordered from t0 towards t1".into()));
    }
    let start = StateVec { coords: ic.to_vec(), t: t0 };
    if span == 0.0 {
        return Ok(Trajectory { samples: Vec::new(), final_state: start, termination: Termination::Completed });
    }

    let flow = Flow { field, t0, sign, n: ic.len(), p: None };
    let mut prop = Propagator::new(&flow, cfg, escape, ic);
    let mut samples = Vec::with_capacity(offsets.len());
    let mut none = |_: f64, _: &[f64]| false;
    let mut termination = Termination::Completed;
    for s in offsets.into_iter().chain(std::iter::once(span)) {
        match prop.advance_to(s, &mut none) {
            Advance::Reached => {}
            Advance::Escaped => {
                termination = Termination::Escaped;
                break;
            }
            Advance::Failed => {
                termination = Termination::EscapedByFailure;
                break;
            }
            Advance::Stopped => unreachable!("observer never stops"),
        }
        if s < span || samples.len() < sample_times.len() {
            samples.push(prop.state());
        }
    }
    samples.truncate(sample_times.len());
    Ok(Trajectory { samples, final_state: prop.state(), termination })
}

/// Accumulates `∫ Σ_k |f_k(x(t), t)|^p dt` over `[t0, t0 + τ]` (forward) or
/// `[t0 - τ, t0]` (backward), stopping at the escape boundary if enabled.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_ld<F: VectorField + ?Sized>(
    field: &F,
    ic: &[f64],
    t0: f64,
    tau: f64,
    direction: Direction,
    p: f64,
    cfg: &IntegratorConfig,
    escape: &EscapeRegion,
) -> Result<LDAccumResult> {
    check_state(field, ic, t0)?;
    check_exponent(p)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be non-negative, got {tau}")));
    }
    cfg.validate()?;
    escape.validate(field.dim())?;
    Ok(accumulate_unchecked(field, ic, t0, tau, direction, p, cfg, escape))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate_unchecked<F: VectorField + ?Sized>(
    field: &F,
    ic: &[f64],
    t0: f64,
    tau: f64,
    direction: Direction,
    p: f64,
    cfg: &IntegratorConfig,
    escape: &EscapeRegion,
) -> LDAccumResult {
    let n = ic.len();
    let flow = Flow { field, t0, sign: direction.sign(), n, p: Some(p) };
    let mut y0 = [0.0; MAX_DIM];
    y0[..n].copy_from_slice(ic);
    let mut prop = Propagator::new(&flow, cfg, escape, &y0);
    let outcome = if tau == 0.0 {
        if prop.escaped_now() { Advance::Escaped } else { Advance::Reached }
    } else {
        prop.advance_to(tau, &mut |_, _| false)
    };
    LDAccumResult {
        ld_value: prop.y[n],
        escaped: matches!(outcome, Advance::Escaped | Advance::Failed),
        failed: outcome == Advance::Failed,
        stop_time: flow.time(prop.s),
        final_state: prop.state(),
    }
}

/// Samples the trajectory at `t0 + k·period` for `k = n_skip..=n_periods`.
pub fn strobe_map<F: VectorField + ?Sized>(
    field: &F,
    ic: &[f64],
    t0: f64,
    period: f64,
    n_periods: usize,
    n_skip: usize,
    cfg: &IntegratorConfig,
) -> Result<StrobeResult> {
    check_state(field, ic, t0)?;
    cfg.validate()?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!("strobe period must be positive, got {period}")));
    }
    if n_skip > n_periods {
        return Err(Error::InvalidInput(format!("n_skip {n_skip} exceeds n_periods {n_periods}")));
    }
    let escape = EscapeRegion::disabled();
    let flow = Flow { field, t0, sign: 1.0, n: ic.len(), p: None };
    let mut prop = Propagator::new(&flow, cfg, &escape, ic);
    let mut points = Vec::with_capacity(n_periods - n_skip + 1);
    let mut none = |_: f64, _: &[f64]| false;
    for k in 0..=n_periods {
        if k > 0 && prop.advance_to(k as f64 * period, &mut none) != Advance::Reached {
            return Ok(StrobeResult { points, failed: true });
        }
        if k >= n_skip {
            let mut state = prop.state();
            state.t = t0 + k as f64 * period;
            points.push(state);
        }
    }
    Ok(StrobeResult { points, failed: false })
}

/// Forward run calling `observer(t, x)` after each accepted step; the
/// observer returns `true` to stop. Used for event-driven classification.
pub fn integrate_observed<F: VectorField + ?Sized>(
    field: &F,
    ic: &[f64],
    t0: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(f64, &[f64]) -> bool,
) -> Result<(StateVec, Termination)> {
    check_state(field, ic, t0)?;
    cfg.validate()?;
    let escape = EscapeRegion::disabled();
    let flow = Flow { field, t0, sign: 1.0, n: ic.len(), p: None };
    let mut prop = Propagator::new(&flow, cfg, &escape, ic);
    let mut wrapped = |s: f64, y: &[f64]| observer(t0 + s, y);
    let outcome = prop.advance_to(t_max - t0, &mut wrapped);
    let termination = match outcome {
        Advance::Reached => Termination::Completed,
        Advance::Stopped => Termination::Stopped,
        Advance::Escaped => Termination::Escaped,
        Advance::Failed => Termination::EscapedByFailure,
    };
    Ok((prop.state(), termination))
}
