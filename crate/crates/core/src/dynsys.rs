//! Vector fields of the built-in model systems.
//!
//! Every system is identified by a [`SystemId`] and parameterised by a named
//! map of reals, validated once when the [`SystemSpec`] is built. Evaluation
//! goes through a typed model cached inside the spec, so the hot path never
//! touches the map.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Complex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod analytic;

/// A vector field `dx/dt = f(x, t)` on a fixed-dimensional phase space.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], dxdt: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    LinearSaddle,
    NonlinearSaddle,
    Hopf,
    Vanderpol,
    BeadHoop,
    VdpLienard,
    Duffing,
    DoubleWell2dof,
}

impl SystemId {
    pub const ALL: [SystemId; 8] = [
        SystemId::LinearSaddle,
        SystemId::NonlinearSaddle,
        SystemId::Hopf,
        SystemId::Vanderpol,
        SystemId::BeadHoop,
        SystemId::VdpLienard,
        SystemId::Duffing,
        SystemId::DoubleWell2dof,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::LinearSaddle => "linear_saddle",
            SystemId::NonlinearSaddle => "nonlinear_saddle",
            SystemId::Hopf => "hopf",
            SystemId::Vanderpol => "vanderpol",
            SystemId::BeadHoop => "bead_hoop",
            SystemId::VdpLienard => "vdp_lienard",
            SystemId::Duffing => "duffing",
            SystemId::DoubleWell2dof => "double_well_2dof",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            SystemId::DoubleWell2dof => 4,
            _ => 2,
        }
    }

    /// Coordinate names, in state-vector order.
    pub fn coord_names(self) -> &'static [&'static str] {
        match self {
            SystemId::BeadHoop => &["phi", "omega"],
            SystemId::VdpLienard => &["x", "w"],
            SystemId::DoubleWell2dof => &["x", "y", "px", "py"],
            _ => &["x", "y"],
        }
    }

    /// Parameter names with their default values.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            SystemId::LinearSaddle => &[("lambda", 1.0), ("mu", 2.0)],
            SystemId::NonlinearSaddle => &[("lambda", -2.0), ("mu", 1.0)],
            SystemId::Hopf => &[("beta", 0.5), ("sigma", 1.0)],
            SystemId::Vanderpol => &[("mu", 1.5)],
            SystemId::BeadHoop => &[("epsilon", 0.02), ("mu", 2.3)],
            SystemId::VdpLienard => &[("mu", 10.0)],
            SystemId::Duffing => &[
                ("alpha", 1.0),
                ("beta", 1.0),
                ("delta", 0.3),
                ("gamma", 0.0),
                ("omega", 1.2),
            ],
            SystemId::DoubleWell2dof => &[
                ("m1", 1.0),
                ("m2", 1.0),
                ("a", 1.0),
                ("b", 1.0),
                ("omega", 1.0),
                ("gamma_x", 0.25),
                ("gamma_y", 0.25),
            ],
        }
    }

    pub fn coord_index(self, name: &str) -> Option<usize> {
        self.coord_names().iter().position(|c| *c == name)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

/// Typed parameters, resolved from the named map at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Model {
    LinearSaddle { lambda: f64, mu: f64 },
    NonlinearSaddle { lambda: f64, mu: f64 },
    Hopf { beta: f64, sigma: f64 },
    Vanderpol { mu: f64 },
    BeadHoop { epsilon: f64, mu: f64 },
    VdpLienard { mu: f64 },
    Duffing { alpha: f64, beta: f64, delta: f64, gamma: f64, omega: f64 },
    DoubleWell(DoubleWellParams),
}

/// Parameters of the damped two-degree-of-freedom double well.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleWellParams {
    pub m1: f64,
    pub m2: f64,
    pub a: f64,
    pub b: f64,
    pub omega: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
}

impl DoubleWellParams {
    pub fn potential(&self, x: f64, y: f64) -> f64 {
        0.25 * self.a * x.powi(4) - 0.5 * self.b * x * x + 0.5 * self.omega * self.omega * y * y
    }
}

/// A built-in system together with its validated parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawSystemSpec", into = "RawSystemSpec")]
pub struct SystemSpec {
    pub id: SystemId,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub autonomous: bool,
    model: Model,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystemSpec {
    id: SystemId,
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    autonomous: Option<bool>,
}

impl TryFrom<RawSystemSpec> for SystemSpec {
    type Error = Error;

    fn try_from(raw: RawSystemSpec) -> Result<Self> {
        let spec = SystemSpec::with_params(raw.id, &raw.params)?;
        if let Some(dim) = raw.dim {
            if dim != spec.dim {
                return Err(Error::DimensionMismatch { expected: spec.dim, got: dim });
            }
        }
        if let Some(autonomous) = raw.autonomous {
            if autonomous != spec.autonomous {
                return Err(Error::Config(format!(
                    "`autonomous = {autonomous}` is inconsistent with the parameters of {}",
                    spec.id
                )));
            }
        }
        Ok(spec)
    }
}

impl From<SystemSpec> for RawSystemSpec {
    fn from(spec: SystemSpec) -> Self {
        RawSystemSpec {
            id: spec.id,
            params: spec.params,
            dim: Some(spec.dim),
            autonomous: Some(spec.autonomous),
        }
    }
}

impl PartialEq for SystemSpec {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.params == other.params
    }
}

impl SystemSpec {
    /// The system with all parameters at their defaults.
    pub fn builtin(id: SystemId) -> Self {
        Self::with_params(id, &BTreeMap::new()).expect("defaults are valid")
    }

    /// Defaults overridden by `overrides`. Unknown names are rejected.
    ///
    /// For `double_well_2dof` the shorthand `gamma` sets both `gamma_x` and
    /// `gamma_y`.
    pub fn with_params(id: SystemId, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut params: BTreeMap<String, f64> = id
            .default_params()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (name, &value) in overrides {
            if id == SystemId::DoubleWell2dof && name == "gamma" {
                params.insert("gamma_x".into(), value);
                params.insert("gamma_y".into(), value);
                continue;
            }
            match params.get_mut(name) {
                Some(slot) => *slot = value,
                None => {
                    return Err(Error::UnknownParameter {
                        system: id.as_str(),
                        param: name.clone(),
                    })
                }
            }
        }
        for (name, &value) in &params {
            if !value.is_finite() {
                return Err(Error::NonFiniteParameter { param: name.clone(), value });
            }
        }
        let model = build_model(id, &params)?;
        let autonomous = !matches!(model, Model::Duffing { gamma, .. } if gamma != 0.0);
        Ok(SystemSpec {
            id,
            params,
            dim: id.dim(),
            autonomous,
            model,
        })
    }

    /// Convenience for a handful of overrides.
    pub fn new(id: SystemId, overrides: &[(&str, f64)]) -> Result<Self> {
        let map = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Self::with_params(id, &map)
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params.get(name).copied().ok_or_else(|| Error::MissingParameter {
            system: self.id.as_str(),
            param: name.to_string(),
        })
    }

    pub fn coord_names(&self) -> &'static [&'static str] {
        self.id.coord_names()
    }

    pub fn double_well_params(&self) -> Result<DoubleWellParams> {
        match self.model {
            Model::DoubleWell(p) => Ok(p),
            _ => Err(Error::Unsupported(self.id.as_str())),
        }
    }

    /// Forcing period `2π/ω` for the forced Duffing oscillator.
    pub fn forcing_period(&self) -> Option<f64> {
        match self.model {
            Model::Duffing { gamma, omega, .. } if gamma != 0.0 && omega != 0.0 => {
                Some(2.0 * std::f64::consts::PI / omega.abs())
            }
            _ => None,
        }
    }

    /// Checked evaluation of the vector field at a state.
    pub fn eval_vector_field(&self, state: &StateVec) -> Result<Vec<f64>> {
        if state.coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.coords.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.eval(state.t, &state.coords, &mut out);
        Ok(out)
    }

    /// Analytic Jacobian `∂f/∂x` at `(x, t)`, row-major.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let _ = t;
        match self.model {
            Model::LinearSaddle { lambda, mu } => {
                DMatrix::from_row_slice(2, 2, &[lambda, 0.0, 0.0, -mu])
            }
            Model::NonlinearSaddle { lambda, mu } => {
                DMatrix::from_row_slice(2, 2, &[mu, 0.0, -2.0 * lambda * x[0], lambda])
            }
            Model::Hopf { beta, sigma } => {
                let (u, v) = (x[0], x[1]);
                let r2 = u * u + v * v;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        beta - sigma * (r2 + 2.0 * u * u),
                        -1.0 - 2.0 * sigma * u * v,
                        1.0 - 2.0 * sigma * u * v,
                        beta - sigma * (r2 + 2.0 * v * v),
                    ],
                )
            }
            Model::Vanderpol { mu } => {
                let (u, v) = (x[0], x[1]);
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.0, 1.0, -1.0 - 2.0 * mu * u * v, mu * (1.0 - u * u)],
                )
            }
            Model::BeadHoop { epsilon, mu } => {
                let phi = x[0];
                let df = mu * (2.0 * phi).cos() - phi.cos();
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, df / epsilon, -1.0 / epsilon])
            }
            Model::VdpLienard { mu } => {
                let u = x[0];
                DMatrix::from_row_slice(2, 2, &[-mu * (u * u - 1.0), mu, -1.0 / mu, 0.0])
            }
            Model::Duffing { alpha, beta, delta, .. } => {
                let u = x[0];
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.0, 1.0, alpha - 3.0 * beta * u * u, -delta],
                )
            }
            Model::DoubleWell(p) => {
                let u = x[0];
                #[rustfmt::skip]
                let rows = [
                    0.0, 0.0, 1.0 / p.m1, 0.0,
                    0.0, 0.0, 0.0, 1.0 / p.m2,
                    p.b - 3.0 * p.a * u * u, 0.0, -p.gamma_x, 0.0,
                    0.0, -p.omega * p.omega, 0.0, -p.gamma_y,
                ];
                DMatrix::from_row_slice(4, 4, &rows)
            }
        }
    }

    /// Known equilibria with linear stability. Systems without closed-form
    /// equilibria (the forced Duffing oscillator) yield an empty list.
    pub fn equilibria(&self) -> Vec<Equilibrium> {
        let points: Vec<Vec<f64>> = match self.model {
            Model::LinearSaddle { .. }
            | Model::Hopf { .. }
            | Model::Vanderpol { .. }
            | Model::VdpLienard { .. } => vec![vec![0.0, 0.0]],
            Model::NonlinearSaddle { mu, .. } => {
                if mu == 0.0 {
                    // Whole parabola y = x² is fixed; no isolated equilibria.
                    vec![]
                } else {
                    vec![vec![0.0, 0.0]]
                }
            }
            Model::BeadHoop { mu, .. } => {
                let mut pts = vec![vec![0.0, 0.0], vec![std::f64::consts::PI, 0.0]];
                if mu.abs() > 1.0 {
                    let phi = (1.0 / mu).acos();
                    pts.push(vec![phi, 0.0]);
                    pts.push(vec![-phi, 0.0]);
                }
                pts
            }
            Model::Duffing { alpha, beta, gamma, .. } => {
                if gamma != 0.0 {
                    vec![]
                } else {
                    let mut pts = vec![vec![0.0, 0.0]];
                    if beta != 0.0 && alpha / beta > 0.0 {
                        let s = (alpha / beta).sqrt();
                        pts.push(vec![-s, 0.0]);
                        pts.push(vec![s, 0.0]);
                    }
                    pts
                }
            }
            Model::DoubleWell(p) => {
                let mut pts = vec![vec![0.0; 4]];
                if p.a != 0.0 && p.b / p.a > 0.0 {
                    let s = (p.b / p.a).sqrt();
                    pts.push(vec![-s, 0.0, 0.0, 0.0]);
                    pts.push(vec![s, 0.0, 0.0, 0.0]);
                }
                pts
            }
        };
        points
            .into_iter()
            .map(|point| {
                let eigenvalues: Vec<Complex<f64>> = self
                    .jacobian(0.0, &point)
                    .complex_eigenvalues()
                    .iter()
                    .copied()
                    .collect();
                Equilibrium {
                    stability: Stability::classify(&eigenvalues),
                    point,
                    eigenvalues,
                }
            })
            .collect()
    }
}

impl VectorField for SystemSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn eval(&self, t: f64, x: &[f64], dxdt: &mut [f64]) {
        match self.model {
            Model::LinearSaddle { lambda, mu } => {
                dxdt[0] = lambda * x[0];
                dxdt[1] = -mu * x[1];
            }
            Model::NonlinearSaddle { lambda, mu } => {
                dxdt[0] = mu * x[0];
                dxdt[1] = lambda * (x[1] - x[0] * x[0]);
            }
            Model::Hopf { beta, sigma } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                dxdt[0] = beta * x[0] - x[1] - sigma * x[0] * r2;
                dxdt[1] = x[0] + beta * x[1] - sigma * x[1] * r2;
            }
            Model::Vanderpol { mu } => {
                dxdt[0] = x[1];
                dxdt[1] = -x[0] + mu * (1.0 - x[0] * x[0]) * x[1];
            }
            Model::BeadHoop { epsilon, mu } => {
                let phi = x[0];
                let f = (mu * phi.cos() - 1.0) * phi.sin();
                dxdt[0] = x[1];
                dxdt[1] = (f - x[1]) / epsilon;
            }
            Model::VdpLienard { mu } => {
                let u = x[0];
                let big_f = u * u * u / 3.0 - u;
                dxdt[0] = mu * (x[1] - big_f);
                dxdt[1] = -u / mu;
            }
            Model::Duffing { alpha, beta, delta, gamma, omega } => {
                let u = x[0];
                let forcing = if gamma != 0.0 { gamma * (omega * t).cos() } else { 0.0 };
                dxdt[0] = x[1];
                dxdt[1] = -delta * x[1] + alpha * u - beta * u * u * u + forcing;
            }
            Model::DoubleWell(p) => {
                let (u, v, pu, pv) = (x[0], x[1], x[2], x[3]);
                dxdt[0] = pu / p.m1;
                dxdt[1] = pv / p.m2;
                dxdt[2] = p.b * u - p.a * u * u * u - p.gamma_x * pu;
                // Restoring force of the harmonic y-oscillator, -∂H/∂y = -ω²y.
                dxdt[3] = -p.omega * p.omega * v - p.gamma_y * pv;
            }
        }
    }
}

fn build_model(id: SystemId, params: &BTreeMap<String, f64>) -> Result<Model> {
    let get = |name: &str| {
        params.get(name).copied().ok_or_else(|| Error::MissingParameter {
            system: id.as_str(),
            param: name.to_string(),
        })
    };
    let nonzero = |name: &str| -> Result<f64> {
        let v = get(name)?;
        if v == 0.0 {
            return Err(Error::Config(format!("{id}: parameter `{name}` must be nonzero")));
        }
        Ok(v)
    };
    Ok(match id {
        SystemId::LinearSaddle => Model::LinearSaddle { lambda: get("lambda")?, mu: get("mu")? },
        SystemId::NonlinearSaddle => {
            Model::NonlinearSaddle { lambda: get("lambda")?, mu: get("mu")? }
        }
        SystemId::Hopf => Model::Hopf { beta: get("beta")?, sigma: get("sigma")? },
        SystemId::Vanderpol => Model::Vanderpol { mu: get("mu")? },
        SystemId::BeadHoop => Model::BeadHoop { epsilon: nonzero("epsilon")?, mu: get("mu")? },
        SystemId::VdpLienard => Model::VdpLienard { mu: nonzero("mu")? },
        SystemId::Duffing => Model::Duffing {
            alpha: get("alpha")?,
            beta: get("beta")?,
            delta: get("delta")?,
            gamma: get("gamma")?,
            omega: get("omega")?,
        },
        SystemId::DoubleWell2dof => Model::DoubleWell(DoubleWellParams {
            m1: nonzero("m1")?,
            m2: nonzero("m2")?,
            a: get("a")?,
            b: get("b")?,
            omega: get("omega")?,
            gamma_x: get("gamma_x")?,
            gamma_y: get("gamma_y")?,
        }),
    })
}

/// A phase-space point at a given time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    pub coords: Vec<f64>,
    pub t: f64,
}

impl StateVec {
    pub fn new(coords: Vec<f64>, t: f64) -> Result<Self> {
        if !t.is_finite() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "state must be finite, got {coords:?} at t = {t}"
            )));
        }
        Ok(StateVec { coords, t })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    /// Non-hyperbolic: every eigenvalue has (numerically) zero real part.
    Center,
}

impl Stability {
    const TOL: f64 = 1e-12;

    fn classify(eigenvalues: &[Complex<f64>]) -> Self {
        let pos = eigenvalues.iter().any(|l| l.re > Self::TOL);
        let neg = eigenvalues.iter().any(|l| l.re < -Self::TOL);
        match (pos, neg) {
            (true, true) => Stability::Saddle,
            (false, true) => Stability::Stable,
            (true, false) => Stability::Unstable,
            (false, false) => Stability::Center,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub stability: Stability,
    pub eigenvalues: Vec<Complex<f64>>,
}
