//! Grid sweeps producing forward, backward and total descriptor layers.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::analytic::balance_integration_times;
use crate::dynsys::{SystemId, SystemSpec, VectorField};
use crate::error::{Error, Result};
use crate::integrate::{accumulate_unchecked, Direction, EscapeRegion, IntegratorConfig};

/// Rectangular grid of initial conditions over two named coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec2D {
    pub axis_names: [String; 2],
    pub ranges: [[f64; 2]; 2],
    /// Node counts along the first and second axis.
    pub resolution: [usize; 2],
    #[serde(default)]
    pub fixed_coords: BTreeMap<String, f64>,
    #[serde(default)]
    pub t0: f64,
}

impl GridSpec2D {
    /// Grid over the first two coordinates of a planar system.
    pub fn planar(spec: &SystemSpec, x: [f64; 2], y: [f64; 2], resolution: usize) -> Self {
        let names = spec.coord_names();
        GridSpec2D {
            axis_names: [names[0].to_string(), names[1].to_string()],
            ranges: [x, y],
            resolution: [resolution, resolution],
            fixed_coords: BTreeMap::new(),
            t0: 0.0,
        }
    }

    pub fn nx(&self) -> usize {
        self.resolution[0]
    }

    pub fn ny(&self) -> usize {
        self.resolution[1]
    }

    /// Layer shape `(rows, cols) = (ny, nx)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.ny(), self.nx())
    }

    fn axis_value(&self, axis: usize, k: usize) -> f64 {
        let [lo, hi] = self.ranges[axis];
        let n = self.resolution[axis];
        if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.axis_value(0, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        self.axis_value(1, j)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny()).map(|j| self.y(j)).collect()
    }

    pub fn spacing(&self) -> [f64; 2] {
        [0, 1].map(|a| (self.ranges[a][1] - self.ranges[a][0]) / (self.resolution[a] - 1) as f64)
    }

    /// Checks geometry only.
    pub fn validate_shape(&self) -> Result<()> {
        for a in 0..2 {
            let [lo, hi] = self.ranges[a];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("grid axis `{}` needs lo < hi, got [{lo}, {hi}]", self.axis_names[a])));
            }
            if self.resolution[a] < 2 {
                return Err(Error::Config(format!("grid resolution must be at least 2, got {}", self.resolution[a])));
            }
        }
        if !self.t0.is_finite() {
            return Err(Error::Config("grid t0 must be finite".into()));
        }
        Ok(())
    }

    /// Checks that axes and fixed coordinates cover every coordinate once.
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        self.validate_shape()?;
        let names = spec.coord_names();
        let mut covered = vec![false; names.len()];
        let all = self.axis_names.iter().chain(self.fixed_coords.keys());
        for name in all {
            let idx = spec
                .id
                .coord_index(name)
                .ok_or_else(|| Error::Config(format!("`{name}` is not a coordinate of {}", spec.id)))?;
            if covered[idx] {
                return Err(Error::Config(format!("coordinate `{name}` assigned twice")));
            }
            covered[idx] = true;
        }
        if let Some(k) = covered.iter().position(|c| !c) {
            return Err(Error::Config(format!("coordinate `{}` is neither an axis nor fixed", names[k])));
        }
        if self.fixed_coords.values().any(|v| !v.is_finite()) {
            return Err(Error::Config("fixed coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Full initial state at node `(i, j)`. Assumes `validate` passed.
    pub fn state_at(&self, spec: &SystemSpec, i: usize, j: usize) -> Vec<f64> {
        let mut state = vec![0.0; spec.dim];
        for (name, v) in &self.fixed_coords {
            state[spec.id.coord_index(name).expect("validated")] = *v;
        }
        state[spec.id.coord_index(&self.axis_names[0]).expect("validated")] = self.x(i);
        state[spec.id.coord_index(&self.axis_names[1]).expect("validated")] = self.y(j);
        state
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LDConfig {
    pub p: f64,
    pub tau_f: f64,
    pub tau_b: f64,
    pub escape: EscapeRegion,
    /// Replace `tau_b` with the balanced horizon for the saddle rates.
    pub auto_balance: bool,
    /// Expansion and contraction rates `(λ, μ)` used by `auto_balance` when
    /// the system does not carry them as parameters.
    pub balance_rates: Option<[f64; 2]>,
}

impl Default for LDConfig {
    fn default() -> Self {
        LDConfig {
            p: 0.5,
            tau_f: 10.0,
            tau_b: 10.0,
            escape: EscapeRegion::disabled(),
            auto_balance: false,
            balance_rates: None,
        }
    }
}

impl LDConfig {
    pub fn new(p: f64, tau_f: f64, tau_b: f64) -> Self {
        LDConfig { p, tau_f, tau_b, ..LDConfig::default() }
    }

    pub fn with_escape(mut self, escape: EscapeRegion) -> Self {
        self.escape = escape;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1], got {}", self.p)));
        }
        for (name, tau) in [("tau_f", self.tau_f), ("tau_b", self.tau_b)] {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {tau}")));
            }
        }
        if self.tau_f == 0.0 && self.tau_b == 0.0 && !self.auto_balance {
            return Err(Error::Config("at least one of tau_f, tau_b must be positive".into()));
        }
        self.escape.validate(dim)
    }

    /// Returns the configuration with `tau_b` resolved by `auto_balance`.
    pub fn resolve(&self, spec: &SystemSpec) -> Result<LDConfig> {
        let mut out = self.clone();
        if self.auto_balance {
            let [lambda, mu] = match self.balance_rates {
                Some(rates) => rates,
                None if spec.id == SystemId::LinearSaddle => [spec.param("lambda")?, spec.param("mu")?],
                None => {
                    return Err(Error::Config(format!(
                        "auto_balance on {} needs explicit balance_rates",
                        spec.id
                    )))
                }
            };
            if !(lambda > 0.0 && mu > 0.0) {
                return Err(Error::Config(format!("balance rates must be positive, got ({lambda}, {mu})")));
            }
            out.tau_b = balance_integration_times(lambda, mu, self.p, self.tau_f);
            if !(out.tau_b >= 0.0) {
                return Err(Error::Config(format!("balanced tau_b is negative ({})", out.tau_b)));
            }
        }
        out.validate(spec.dim)?;
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    Minmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Forward,
    Backward,
    Total,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Forward, Layer::Backward, Layer::Total];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Forward => "forward",
            Layer::Backward => "backward",
            Layer::Total => "total",
        }
    }
}

impl std::str::FromStr for Layer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Layer::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown layer `{s}`")))
    }
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Provenance carried with every field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub system: SystemSpec,
    pub ld: LDConfig,
    pub integrator: IntegratorConfig,
    pub engine_version: String,
    /// Nodes where either direction hit the escape boundary.
    pub escape_count: usize,
    /// Nodes where either direction stopped on integration failure.
    pub failure_count: usize,
    #[serde(default)]
    pub normalization: Normalization,
    /// Layers that were constant when normalized.
    #[serde(default)]
    pub normalization_warnings: Vec<Layer>,
    /// Section descriptor for fields seeded on an energy surface.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<crate::hamsec::SectionSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LDField {
    pub grid: GridSpec2D,
    pub forward: Array2<f64>,
    pub backward: Array2<f64>,
    pub total: Array2<f64>,
    pub escape_mask: Array2<bool>,
    /// Nodes with no admissible initial condition (energy sections only).
    pub forbidden_mask: Option<Array2<bool>>,
    pub meta: FieldMeta,
}

impl LDField {
    pub fn layer(&self, layer: Layer) -> &Array2<f64> {
        match layer {
            Layer::Forward => &self.forward,
            Layer::Backward => &self.backward,
            Layer::Total => &self.total,
        }
    }

    pub fn layer_mut(&mut self, layer: Layer) -> &mut Array2<f64> {
        match layer {
            Layer::Forward => &mut self.forward,
            Layer::Backward => &mut self.backward,
            Layer::Total => &mut self.total,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }
}

#[derive(Clone, Copy, Default)]
pub(crate) struct NodeResult {
    pub forward: f64,
    pub backward: f64,
    pub escaped: bool,
    pub failed: bool,
    pub forbidden: bool,
}

/// Parallel sweep over `(j, i)` in row-major order; results are collected by
/// index so the output does not depend on scheduling.
pub(crate) fn sweep<F, S>(field: &F, grid: &GridSpec2D, ld: &LDConfig, cfg: &IntegratorConfig, seed: S) -> Vec<NodeResult>
where
    F: VectorField + ?Sized,
    S: Fn(usize, usize) -> Option<Vec<f64>> + Sync,
{
    let nx = grid.nx();
    (0..grid.nx() * grid.ny())
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / nx, k % nx);
            let Some(ic) = seed(i, j) else {
                return NodeResult { forbidden: true, ..NodeResult::default() };
            };
            let mut node = NodeResult::default();
            for (dir, tau) in [(Direction::Forward, ld.tau_f), (Direction::Backward, ld.tau_b)] {
                let res = accumulate_unchecked(field, &ic, grid.t0, tau, dir, ld.p, cfg, &ld.escape);
                match dir {
                    Direction::Forward => node.forward = res.ld_value,
                    Direction::Backward => node.backward = res.ld_value,
                }
                node.escaped |= res.escaped;
                node.failed |= res.failed;
            }
            node
        })
        .collect()
}

pub(crate) fn assemble(grid: GridSpec2D, nodes: Vec<NodeResult>, meta: FieldMeta, with_forbidden: bool) -> LDField {
    let shape = grid.shape();
    let pick = |f: fn(&NodeResult) -> f64| Array2::from_shape_vec(shape, nodes.iter().map(f).collect()).expect("shape");
    let forward = pick(|n| n.forward);
    let backward = pick(|n| n.backward);
    let total = pick(|n| n.forward + n.backward);
    let escape_mask = Array2::from_shape_vec(shape, nodes.iter().map(|n| n.escaped).collect()).expect("shape");
    let forbidden_mask =
        with_forbidden.then(|| Array2::from_shape_vec(shape, nodes.iter().map(|n| n.forbidden).collect()).expect("shape"));
    let mut meta = meta;
    meta.escape_count = nodes.iter().filter(|n| n.escaped && !n.failed).count();
    meta.failure_count = nodes.iter().filter(|n| n.failed).count();
    LDField { grid, forward, backward, total, escape_mask, forbidden_mask, meta }
}

/// Computes the descriptor layers on every node of `grid`.
pub fn compute_ld_field(spec: &SystemSpec, grid: &GridSpec2D, ld: &LDConfig, cfg: &IntegratorConfig) -> Result<LDField> {
    grid.validate(spec)?;
    cfg.validate()?;
    let ld = ld.resolve(spec)?;
    let nodes = sweep(spec, grid, &ld, cfg, |i, j| Some(grid.state_at(spec, i, j)));
    let meta = FieldMeta {
        system: spec.clone(),
        ld,
        integrator: cfg.clone(),
        engine_version: crate::ENGINE_VERSION.to_string(),
        escape_count: 0,
        failure_count: 0,
        normalization: Normalization::None,
        normalization_warnings: Vec::new(),
        section: None,
    };
    Ok(assemble(grid.clone(), nodes, meta, false))
}

/// Rescales each layer independently. Constant layers become zeros and are
/// listed in `meta.normalization_warnings`.
pub fn normalize_field(field: &LDField, mode: Normalization) -> LDField {
    let mut out = field.clone();
    if mode == Normalization::None {
        return out;
    }
    out.meta.normalization = mode;
    out.meta.normalization_warnings.clear();
    for layer in Layer::ALL {
        let a = out.layer_mut(layer);
        let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi > lo {
            let range = hi - lo;
            a.mapv_inplace(|v| if v == hi { 1.0 } else { (v - lo) / range });
        } else {
            a.fill(0.0);
            out.meta.normalization_warnings.push(layer);
        }
    }
    out
}
