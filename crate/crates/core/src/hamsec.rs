//! Energy-shell sections of the damped double well, section fields, and
//! reactive/nonreactive classification.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{DoubleWellParams, StateVec, SystemId, SystemSpec};
use crate::error::{Error, Result};
use crate::extract::{field_ridges, ridge_clusters, FieldRidgeConfig, RidgeSet};
use crate::integrate::{integrate_observed, EscapeRegion, IntegratorConfig, Termination};
use crate::ldfield::{assemble, sweep, FieldMeta, GridSpec2D, LDConfig, LDField, Layer, Normalization};

/// `p_x²/2m₁ + p_y²/2m₂ + V(x, y)` for a state `(x, y, p_x, p_y)`.
pub fn hamiltonian_energy(params: &DoubleWellParams, state: &[f64]) -> f64 {
    let (x, y, px, py) = (state[0], state[1], state[2], state[3]);
    px * px / (2.0 * params.m1) + py * py / (2.0 * params.m2) + params.potential(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionId {
    /// `y = 0`, grid `(x, p_x)`, solve `p_y`.
    Sigma1,
    /// `p_y = 0`, grid `(x, y)`, solve `p_x`.
    Sigma2,
    /// `x = x_value`, grid `(y, p_y)`, solve `p_x`.
    Sigma3,
}

impl SectionId {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionId::Sigma1 => "sigma1",
            SectionId::Sigma2 => "sigma2",
            SectionId::Sigma3 => "sigma3",
        }
    }

    /// Grid axes, in order.
    pub fn axes(self) -> [&'static str; 2] {
        match self {
            SectionId::Sigma1 => ["x", "px"],
            SectionId::Sigma2 => ["x", "y"],
            SectionId::Sigma3 => ["y", "py"],
        }
    }

    /// Coordinate recovered from the energy constraint.
    pub fn solved(self) -> &'static str {
        match self {
            SectionId::Sigma1 => "py",
            SectionId::Sigma2 | SectionId::Sigma3 => "px",
        }
    }
}

impl std::str::FromStr for SectionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma1" => Ok(SectionId::Sigma1),
            "sigma2" => Ok(SectionId::Sigma2),
            "sigma3" => Ok(SectionId::Sigma3),
            _ => Err(Error::Config(format!("unknown section `{s}`"))),
        }
    }
}

impl std::fmt::Display for SectionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub id: SectionId,
    #[serde(default = "default_x_value")]
    pub x_value: f64,
    pub h0: f64,
    #[serde(default)]
    pub branch: Branch,
}

fn default_x_value() -> f64 {
    -0.4
}

impl SectionSpec {
    pub fn new(id: SectionId, h0: f64) -> Self {
        SectionSpec { id, x_value: default_x_value(), h0, branch: Branch::Positive }
    }

    pub fn validate(&self, params: &DoubleWellParams) -> Result<()> {
        if !self.h0.is_finite() {
            return Err(Error::Config(format!("section energy must be finite, got {}", self.h0)));
        }
        if self.id == SectionId::Sigma3 {
            if !self.x_value.is_finite() {
                return Err(Error::Config("section x_value must be finite".into()));
            }
            let v = params.potential(self.x_value, 0.0);
            if v > self.h0 {
                return Err(Error::Config(format!(
                    "x = {} is energetically forbidden at H0 = {} (V = {v})",
                    self.x_value, self.h0
                )));
            }
        }
        Ok(())
    }

    /// Grid on this section's axes with the section constraint recorded in
    /// `fixed_coords`.
    pub fn grid(&self, ranges: [[f64; 2]; 2], resolution: [usize; 2]) -> GridSpec2D {
        let [a, b] = self.id.axes();
        let fixed = match self.id {
            SectionId::Sigma1 => ("y", 0.0),
            SectionId::Sigma2 => ("py", 0.0),
            SectionId::Sigma3 => ("x", self.x_value),
        };
        GridSpec2D {
            axis_names: [a.to_string(), b.to_string()],
            ranges,
            resolution,
            fixed_coords: BTreeMap::from([(fixed.0.to_string(), fixed.1)]),
            t0: 0.0,
        }
    }

    fn sign(&self) -> f64 {
        match self.branch {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// Lifts a section point `(u, v)` to a full state on the energy shell, or
/// `None` where the remaining momentum would be imaginary.
pub fn seed_on_section(params: &DoubleWellParams, section: &SectionSpec, point: [f64; 2]) -> Option<StateVec> {
    let [u, v] = point;
    let sign = section.sign();
    let coords = match section.id {
        SectionId::Sigma1 => {
            let rem = section.h0 - v * v / (2.0 * params.m1) - params.potential(u, 0.0);
            (rem >= 0.0).then(|| vec![u, 0.0, v, sign * (2.0 * params.m2 * rem).sqrt()])?
        }
        SectionId::Sigma2 => {
            let rem = section.h0 - params.potential(u, v);
            (rem >= 0.0).then(|| vec![u, v, sign * (2.0 * params.m1 * rem).sqrt(), 0.0])?
        }
        SectionId::Sigma3 => {
            let rem = section.h0 - v * v / (2.0 * params.m2) - params.potential(section.x_value, u);
            (rem >= 0.0).then(|| vec![section.x_value, u, sign * (2.0 * params.m1 * rem).sqrt(), v])?
        }
    };
    coords.iter().all(|c| c.is_finite()).then_some(StateVec { coords, t: 0.0 })
}

/// Closed curves bounding the energetically allowed part of the section.
pub fn energy_boundary(params: &DoubleWellParams, section: &SectionSpec, samples: usize) -> Vec<Vec<[f64; 2]>> {
    let samples = samples.max(8);
    match section.id {
        SectionId::Sigma3 => {
            let e = section.h0 - params.potential(section.x_value, 0.0);
            if e < 0.0 {
                return Vec::new();
            }
            let (ry, rp) = ((2.0 * e).sqrt() / params.omega, (2.0 * params.m2 * e).sqrt());
            let ring = (0..=samples)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                    [ry * th.cos(), rp * th.sin()]
                })
                .collect();
            vec![ring]
        }
        SectionId::Sigma1 | SectionId::Sigma2 => {
            let scale = match section.id {
                SectionId::Sigma1 => (2.0 * params.m1).sqrt(),
                _ => 2f64.sqrt() / params.omega,
            };
            let height = |x: f64| {
                let rem = section.h0 - params.potential(x, 0.0);
                (rem >= 0.0).then(|| scale * rem.sqrt())
            };
            // Roots of a x⁴/4 − b x²/2 = H₀ in x².
            let (a, b, h) = (params.a, params.b, section.h0);
            let disc = b * b + 4.0 * a * h;
            if disc < 0.0 {
                return Vec::new();
            }
            let outer = ((b + disc.sqrt()) / a).sqrt();
            let inner_sq = (b - disc.sqrt()) / a;
            let intervals: Vec<[f64; 2]> = if inner_sq > 0.0 {
                let inner = inner_sq.sqrt();
                vec![[-outer, -inner], [inner, outer]]
            } else {
                vec![[-outer, outer]]
            };
            intervals
                .into_iter()
                .map(|[lo, hi]| {
                    // Cosine spacing resolves the vertical tangents at the ends.
                    let xs: Vec<f64> = (0..=samples)
                        .map(|k| {
                            let s = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / samples as f64).cos());
                            if k == samples { hi } else { lo + (hi - lo) * s }
                        })
                        .collect();
                    let top = xs.iter().map(|&x| [x, height(x).unwrap_or(0.0)]);
                    let bottom = xs.iter().rev().map(|&x| [x, -height(x).unwrap_or(0.0)]);
                    top.chain(bottom).collect()
                })
                .collect()
        }
    }
}

fn check_double_well(spec: &SystemSpec) -> Result<DoubleWellParams> {
    if spec.id != SystemId::DoubleWell2dof {
        return Err(Error::Config(format!("sections need double_well_2dof, got {}", spec.id)));
    }
    spec.double_well_params()
}

/// Descriptor field on a section. Forbidden nodes carry zeros and are marked
/// in `forbidden_mask`; escape regions are not used.
pub fn compute_section_ld_field(
    spec: &SystemSpec,
    section: &SectionSpec,
    grid: &GridSpec2D,
    ld: &LDConfig,
    cfg: &IntegratorConfig,
) -> Result<LDField> {
    let params = check_double_well(spec)?;
    section.validate(&params)?;
    grid.validate_shape()?;
    if grid.axis_names != section.id.axes().map(String::from) {
        return Err(Error::Config(format!(
            "section {} needs grid axes {:?}, got {:?}",
            section.id,
            section.id.axes(),
            grid.axis_names
        )));
    }
    cfg.validate()?;
    let mut ld = ld.clone();
    ld.escape = EscapeRegion::disabled();
    let ld = ld.resolve(spec)?;
    let nodes = sweep(spec, grid, &ld, cfg, |i, j| {
        seed_on_section(&params, section, [grid.x(i), grid.y(j)]).map(|s| s.coords)
    });
    let meta = FieldMeta {
        system: spec.clone(),
        ld,
        integrator: cfg.clone(),
        engine_version: crate::ENGINE_VERSION.to_string(),
        escape_count: 0,
        failure_count: 0,
        normalization: Normalization::None,
        normalization_warnings: Vec::new(),
        section: Some(section.clone()),
    };
    Ok(assemble(grid.clone(), nodes, meta, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Reactive,
    Nonreactive,
    AsymptoticOrTimeout,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Reactive => "reactive",
            Label::Nonreactive => "nonreactive",
            Label::AsymptoticOrTimeout => "asymptotic_or_timeout",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionLabel {
    pub label: Label,
    pub settle_time: Option<f64>,
    /// Sign changes of `x` along the run.
    pub crossings: u32,
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub t_max: f64,
    pub eps_settle: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { t_max: 200.0, eps_settle: 1e-3, integrator: IntegratorConfig::default() }
    }
}

/// Runs forward until the state settles within `eps_settle` of a well
/// minimum or `t_max` elapses.
pub fn classify_transition(spec: &SystemSpec, state: &[f64], cfg: &ClassifyConfig) -> Result<TransitionLabel> {
    let params = check_double_well(spec)?;
    if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {}", cfg.t_max)));
    }
    if !(cfg.eps_settle > 0.0) {
        return Err(Error::InvalidInput(format!("eps_settle must be positive, got {}", cfg.eps_settle)));
    }
    let well = (params.b / params.a).sqrt();
    let basin = |x: &[f64]| {
        let d = |c: f64| ((x[0] - c).powi(2) + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
        if d(well) < cfg.eps_settle {
            Some(Label::Reactive)
        } else if d(-well) < cfg.eps_settle {
            Some(Label::Nonreactive)
        } else {
            None
        }
    };
    if state.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: state.len() });
    }
    if let Some(label) = basin(state) {
        return Ok(TransitionLabel { label, settle_time: Some(0.0), crossings: 0, failed: false });
    }
    let mut last_sign = state[0].signum() * f64::from(u8::from(state[0] != 0.0));
    let mut crossings = 0u32;
    let mut settled = None;
    let (_, termination) = integrate_observed(spec, state, 0.0, cfg.t_max, &cfg.integrator, |t, x| {
        if x[0] != 0.0 {
            let s = x[0].signum();
            if last_sign != 0.0 && s != last_sign {
                crossings += 1;
            }
            last_sign = s;
        }
        match basin(x) {
            Some(label) => {
                settled = Some((label, t));
                true
            }
            None => false,
        }
    })?;
    Ok(match settled {
        Some((label, t)) => TransitionLabel { label, settle_time: Some(t), crossings, failed: false },
        None => TransitionLabel {
            label: Label::AsymptoticOrTimeout,
            settle_time: None,
            crossings,
            failed: termination == Termination::EscapedByFailure,
        },
    })
}

/// Labels for every node of a section grid; `None` marks forbidden nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationGrid {
    pub section: SectionSpec,
    pub grid: GridSpec2D,
    /// Row-major, shape `(ny, nx)`.
    pub labels: Array2<Option<TransitionLabel>>,
}

pub fn classify_section_grid(
    spec: &SystemSpec,
    section: &SectionSpec,
    grid: &GridSpec2D,
    cfg: &ClassifyConfig,
) -> Result<ClassificationGrid> {
    let params = check_double_well(spec)?;
    section.validate(&params)?;
    grid.validate_shape()?;
    cfg.integrator.validate()?;
    let nx = grid.nx();
    let labels: Vec<Result<Option<TransitionLabel>>> = (0..grid.nx() * grid.ny())
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / nx, k % nx);
            match seed_on_section(&params, section, [grid.x(i), grid.y(j)]) {
                Some(s) => classify_transition(spec, &s.coords, cfg).map(Some),
                None => Ok(None),
            }
        })
        .collect();
    let labels = labels.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ClassificationGrid {
        section: section.clone(),
        grid: grid.clone(),
        labels: Array2::from_shape_vec(grid.shape(), labels).expect("shape"),
    })
}

/// Closed polygon through the outer envelope of a ridge set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeLoop {
    pub vertices: Vec<[f64; 2]>,
    pub center: [f64; 2],
    pub area: f64,
}

impl RidgeLoop {
    /// Orders `points` by angle about their centroid and keeps the point
    /// farthest from it in each of `bins` angular sectors. Distances are
    /// measured after scaling each axis by `spacing`.
    pub fn from_points(points: &[[f64; 2]], bins: usize, spacing: [f64; 2]) -> Result<RidgeLoop> {
        if points.len() < 3 || bins < 3 {
            return Err(Error::InvalidInput("a ridge loop needs at least three points".into()));
        }
        let n = points.len() as f64;
        let center = [
            points.iter().map(|p| p[0]).sum::<f64>() / n,
            points.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let mut best: Vec<Option<(f64, [f64; 2])>> = vec![None; bins];
        for p in points {
            let (u, v) = ((p[0] - center[0]) / spacing[0], (p[1] - center[1]) / spacing[1]);
            let angle = v.atan2(u).rem_euclid(2.0 * std::f64::consts::PI);
            let k = ((angle / (2.0 * std::f64::consts::PI) * bins as f64) as usize).min(bins - 1);
            let r = u.hypot(v);
            if best[k].is_none_or(|(r0, _)| r > r0) {
                best[k] = Some((r, *p));
            }
        }
        let vertices: Vec<[f64; 2]> = best.into_iter().flatten().map(|(_, p)| p).collect();
        if vertices.len() < 3 {
            return Err(Error::InvalidInput("ridge points do not surround their centroid".into()));
        }
        let area = polygon_area(&vertices).abs();
        Ok(RidgeLoop { vertices, center, area })
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut k = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[k]);
            if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
                inside = !inside;
            }
            k = i;
        }
        inside
    }

    /// Distance from `p` to the polygon boundary in grid cells.
    pub fn boundary_distance_cells(&self, p: [f64; 2], spacing: [f64; 2]) -> f64 {
        let s = |q: [f64; 2]| [q[0] / spacing[0], q[1] / spacing[1]];
        let p = s(p);
        let v = &self.vertices;
        (0..v.len())
            .map(|i| segment_distance(p, s(v[i]), s(v[(i + 1) % v.len()])))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Signed shoelace area.
pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub ridge: FieldRidgeConfig,
    pub bins: usize,
    /// Ridge points with `|y|` below this are dropped (Σ₂ only). The line
    /// `y = 0` is invariant there and the field has a cusp along it.
    pub rest_line_halfwidth: f64,
    /// Ridge points are grouped into clusters chained by steps of at most
    /// this many cells; 0 disables clustering and keeps every point.
    pub cluster_link: usize,
    /// Clusters smaller than this fraction of the largest one are dropped.
    pub cluster_keep: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            ridge: FieldRidgeConfig::new(Layer::Forward, crate::extract::Operator::Laplacian, 95.0),
            bins: 90,
            rest_line_halfwidth: 0.04,
            cluster_link: 2,
            cluster_keep: 0.25,
        }
    }
}

fn major_clusters(ridges: &RidgeSet, link: usize, keep: f64) -> Vec<[f64; 2]> {
    let clusters = ridge_clusters(ridges, link);
    let largest = clusters.first().map_or(0, Vec::len) as f64;
    clusters
        .iter()
        .filter(|c| c.len() as f64 >= keep * largest)
        .flatten()
        .map(|&k| [ridges.points[k].x, ridges.points[k].y])
        .collect()
}

/// Ridge loop of a section field.
pub fn section_ridge_loop(field: &LDField, cfg: &LoopConfig) -> Result<RidgeLoop> {
    let section = field
        .meta
        .section
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("field has no section metadata".into()))?;
    let mut ridges = field_ridges(field, &cfg.ridge)?;
    let spacing = field.grid.spacing();
    if section.id == SectionId::Sigma2 {
        ridges.points.retain(|p| p.y.abs() > cfg.rest_line_halfwidth);
    }
    let points: Vec<[f64; 2]> = if cfg.cluster_link == 0 {
        ridges.coords()
    } else {
        major_clusters(&ridges, cfg.cluster_link, cfg.cluster_keep)
    };
    RidgeLoop::from_points(&points, cfg.bins, spacing)
}
