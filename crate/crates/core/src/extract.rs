//! Ridge extraction from descriptor layers and ridge-to-curve metrics.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldfield::{GridSpec2D, LDField, Layer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    GradientNorm,
    Laplacian,
}

impl Operator {
    pub fn as_str(self) -> &'static str {
        match self {
            Operator::GradientNorm => "gradient_norm",
            Operator::Laplacian => "laplacian",
        }
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient_norm" | "gradient" => Ok(Operator::GradientNorm),
            "laplacian" => Ok(Operator::Laplacian),
            _ => Err(Error::Config(format!("unknown operator `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgePoint {
    /// Column index (first grid axis).
    pub i: usize,
    /// Row index (second grid axis).
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeSet {
    /// Sorted by `(i, j)`.
    pub points: Vec<RidgePoint>,
    pub source_layer: Layer,
    pub operator: Operator,
    pub threshold_percentile: f64,
    /// Operator value at the percentile.
    pub threshold: f64,
}

impl RidgeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.points.binary_search_by(|p| (p.i, p.j).cmp(&(i, j))).is_ok()
    }
}

/// `‖∇L‖` with central differences inside and one-sided ones at the border.
/// `spacing` is `[dx, dy]` for columns and rows respectively.
pub fn gradient_norm(layer: &Array2<f64>, spacing: [f64; 2]) -> Array2<f64> {
    let (ny, nx) = layer.dim();
    assert!(nx >= 2 && ny >= 2, "gradient_norm needs at least a 2x2 layer");
    let [dx, dy] = spacing;
    let diff = |lo: f64, hi: f64, n: usize, h: f64| (hi - lo) / (n as f64 * h);
    Array2::from_shape_fn((ny, nx), |(j, i)| {
        let gx = if i == 0 {
            diff(layer[[j, 0]], layer[[j, 1]], 1, dx)
        } else if i + 1 == nx {
            diff(layer[[j, i - 1]], layer[[j, i]], 1, dx)
        } else {
            diff(layer[[j, i - 1]], layer[[j, i + 1]], 2, dx)
        };
        let gy = if j == 0 {
            diff(layer[[0, i]], layer[[1, i]], 1, dy)
        } else if j + 1 == ny {
            diff(layer[[j - 1, i]], layer[[j, i]], 1, dy)
        } else {
            diff(layer[[j - 1, i]], layer[[j + 1, i]], 2, dy)
        };
        gx.hypot(gy)
    })
}

/// Five-point Laplacian; border rows and columns are zero.
pub fn laplacian(layer: &Array2<f64>, spacing: [f64; 2]) -> Array2<f64> {
    let (ny, nx) = layer.dim();
    let [dx, dy] = spacing;
    Array2::from_shape_fn((ny, nx), |(j, i)| {
        if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
            return 0.0;
        }
        let c = layer[[j, i]];
        (layer[[j, i - 1]] - 2.0 * c + layer[[j, i + 1]]) / (dx * dx)
            + (layer[[j - 1, i]] - 2.0 * c + layer[[j + 1, i]]) / (dy * dy)
    })
}

/// Operator layer used for thresholding: `‖∇L‖` or `|ΔL|`.
pub fn apply_operator(layer: &Array2<f64>, spacing: [f64; 2], op: Operator) -> Array2<f64> {
    match op {
        Operator::GradientNorm => gradient_norm(layer, spacing),
        Operator::Laplacian => laplacian(layer, spacing).mapv(f64::abs),
    }
}

/// Linear-interpolation percentile of `values` (sorted in place).
pub fn percentile(values: &mut [f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(values[lo] + (values[hi] - values[lo]) * frac)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RidgeOptions {
    /// Nodes that may not become ridge points; also left out of the
    /// percentile distribution.
    pub exclude: Option<Array2<bool>>,
    /// One-pass non-maximum suppression across the ridge.
    pub nms: bool,
}

fn check_percentile(pct: f64) -> Result<()> {
    if pct > 0.0 && pct < 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("percentile must lie in (0, 100), got {pct}")))
    }
}

/// Ridge set of `layer` on `grid`: nodes whose operator value lies strictly
/// above the given percentile of all candidate values.
pub fn extract_ridges(layer: &Array2<f64>, grid: &GridSpec2D, op: Operator, pct: f64) -> Result<RidgeSet> {
    extract_ridges_with(layer, grid, Layer::Total, op, pct, &RidgeOptions::default())
}

pub fn extract_ridges_with(
    layer: &Array2<f64>,
    grid: &GridSpec2D,
    source_layer: Layer,
    op: Operator,
    pct: f64,
    opts: &RidgeOptions,
) -> Result<RidgeSet> {
    check_percentile(pct)?;
    let (ny, nx) = layer.dim();
    if (ny, nx) != grid.shape() {
        return Err(Error::InvalidInput(format!(
            "layer shape {:?} does not match grid shape {:?}",
            (ny, nx),
            grid.shape()
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidInput("ridge extraction needs at least a 2x2 layer".into()));
    }
    if let Some(ex) = &opts.exclude {
        if ex.dim() != (ny, nx) {
            return Err(Error::InvalidInput("exclusion mask shape mismatch".into()));
        }
    }
    let values = apply_operator(layer, grid.spacing(), op);
    let border = op == Operator::Laplacian;
    let candidate = |j: usize, i: usize| {
        let on_border = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
        !(border && on_border) && !opts.exclude.as_ref().is_some_and(|ex| ex[[j, i]]) && values[[j, i]].is_finite()
    };
    let mut pool: Vec<f64> = values
        .indexed_iter()
        .filter(|((j, i), _)| candidate(*j, *i))
        .map(|(_, v)| *v)
        .collect();
    let threshold = percentile(&mut pool, pct).unwrap_or(f64::INFINITY);
    let mut points = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let v = values[[j, i]];
            if v > threshold && candidate(j, i) && (!opts.nms || is_local_max(&values, j, i)) {
                points.push(RidgePoint { i, j, x: grid.x(i), y: grid.y(j), value: v });
            }
        }
    }
    Ok(RidgeSet { points, source_layer, operator: op, threshold_percentile: pct, threshold })
}

/// Keeps a node when it is not smaller than both neighbours along the
/// quantised direction of steepest change of the operator layer.
fn is_local_max(values: &Array2<f64>, j: usize, i: usize) -> bool {
    let (ny, nx) = values.dim();
    let at = |dj: isize, di: isize| -> f64 {
        let (jj, ii) = (j as isize + dj, i as isize + di);
        if jj < 0 || ii < 0 || jj >= ny as isize || ii >= nx as isize {
            f64::NEG_INFINITY
        } else {
            values[[jj as usize, ii as usize]]
        }
    };
    let gx = at(0, 1).max(f64::MIN) - at(0, -1).max(f64::MIN);
    let gy = at(1, 0).max(f64::MIN) - at(-1, 0).max(f64::MIN);
    let angle = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
    let sector = ((angle / (std::f64::consts::PI / 4.0)).round() as usize) % 4;
    let (dj, di) = [(0, 1), (1, 1), (1, 0), (1, -1)][sector];
    let v = values[[j, i]];
    v >= at(dj, di) && v >= at(-dj, -di)
}

/// Marks nodes within `margin` cells (Chebyshev) of any `true` node of `mask`.
pub fn dilate(mask: &Array2<bool>, margin: usize) -> Array2<bool> {
    let (ny, nx) = mask.dim();
    let mut out = mask.clone();
    if margin == 0 {
        return out;
    }
    for ((j, i), &m) in mask.indexed_iter() {
        if !m {
            continue;
        }
        for jj in j.saturating_sub(margin)..=(j + margin).min(ny - 1) {
            for ii in i.saturating_sub(margin)..=(i + margin).min(nx - 1) {
                out[[jj, ii]] = true;
            }
        }
    }
    out
}

/// Nodes adjacent (within `margin` cells) to a change in `mask`.
pub fn transition_band(mask: &Array2<bool>, margin: usize) -> Array2<bool> {
    let (ny, nx) = mask.dim();
    let mut edges = Array2::from_elem((ny, nx), false);
    for ((j, i), &m) in mask.indexed_iter() {
        let differs = |jj: usize, ii: usize| mask[[jj, ii]] != m;
        if (i + 1 < nx && differs(j, i + 1)) || (j + 1 < ny && differs(j + 1, i)) {
            edges[[j, i]] = true;
            if i + 1 < nx && differs(j, i + 1) {
                edges[[j, i + 1]] = true;
            }
            if j + 1 < ny && differs(j + 1, i) {
                edges[[j + 1, i]] = true;
            }
        }
    }
    dilate(&edges, margin)
}

/// Candidacy rules for ridges taken from a computed field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldRidgeConfig {
    pub layer: Layer,
    pub operator: Operator,
    pub percentile: f64,
    /// Cells around forbidden nodes that are not ridge candidates.
    pub forbidden_margin: usize,
    /// Exclude nodes next to escape-mask transitions.
    pub exclude_escape_boundary: bool,
    pub escape_margin: usize,
    pub nms: bool,
}

impl Default for FieldRidgeConfig {
    fn default() -> Self {
        FieldRidgeConfig {
            layer: Layer::Total,
            operator: Operator::GradientNorm,
            percentile: 95.0,
            forbidden_margin: 2,
            exclude_escape_boundary: false,
            escape_margin: 1,
            nms: false,
        }
    }
}

impl FieldRidgeConfig {
    pub fn new(layer: Layer, operator: Operator, percentile: f64) -> Self {
        FieldRidgeConfig { layer, operator, percentile, ..FieldRidgeConfig::default() }
    }

    pub fn exclusion_mask(&self, field: &LDField) -> Array2<bool> {
        let mut ex = Array2::from_elem(field.shape(), false);
        if let Some(forbidden) = &field.forbidden_mask {
            ex = dilate(forbidden, self.forbidden_margin);
        }
        if self.exclude_escape_boundary {
            let band = transition_band(&field.escape_mask, self.escape_margin);
            ex.zip_mut_with(&band, |a, b| *a |= *b);
        }
        ex
    }
}

pub fn field_ridges(field: &LDField, cfg: &FieldRidgeConfig) -> Result<RidgeSet> {
    let opts = RidgeOptions { exclude: Some(cfg.exclusion_mask(field)), nms: cfg.nms };
    extract_ridges_with(field.layer(cfg.layer), &field.grid, cfg.layer, cfg.operator, cfg.percentile, &opts)
}

/// Groups ridge points into clusters whose members are chained by steps of
/// at most `link` cells (Chebyshev). Clusters are returned largest first as
/// indices into `ridges.points`.
pub fn ridge_clusters(ridges: &RidgeSet, link: usize) -> Vec<Vec<usize>> {
    let index: std::collections::HashMap<(usize, usize), usize> =
        ridges.points.iter().enumerate().map(|(k, p)| ((p.i, p.j), k)).collect();
    let link = link.max(1) as isize;
    let mut seen = vec![false; ridges.points.len()];
    let mut clusters = Vec::new();
    for start in 0..ridges.points.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut next = 0;
        while next < members.len() {
            let p = &ridges.points[members[next]];
            next += 1;
            for dj in -link..=link {
                for di in -link..=link {
                    let (ii, jj) = (p.i as isize + di, p.j as isize + dj);
                    if ii < 0 || jj < 0 {
                        continue;
                    }
                    if let Some(&k) = index.get(&(ii as usize, jj as usize)) {
                        if !seen[k] {
                            seen[k] = true;
                            members.push(k);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    clusters
}

/// Absorbs rounding in node coordinates so that a point exactly `k` cells
/// away counts as within `k` cells.
const CELL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeDistance {
    /// Mean over ridge points of the distance to the nearest curve sample.
    pub mean: f64,
    pub max: f64,
    /// The same, measured in grid cells (each axis scaled by its spacing).
    pub mean_cells: f64,
    pub max_cells: f64,
    /// Mean over curve samples of the distance to the nearest ridge point.
    pub curve_mean: f64,
    pub curve_mean_cells: f64,
    /// Fraction of curve samples with a ridge point within `k` cells.
    pub coverage_fraction: f64,
}

/// Distances between `ridges` and the sampled `curve`. Cell units use
/// `spacing = [dx, dy]`.
pub fn ridge_distance(ridges: &RidgeSet, curve: &[[f64; 2]], spacing: [f64; 2], k_cells: f64) -> Result<RidgeDistance> {
    if ridges.is_empty() || curve.is_empty() {
        return Err(Error::InvalidInput("ridge_distance needs a nonempty ridge set and curve".into()));
    }
    let [dx, dy] = spacing;
    let pts = ridges.coords();
    let nearest = |from: &[f64; 2], to: &[[f64; 2]]| {
        to.iter().fold((f64::INFINITY, f64::INFINITY), |(phys, cells), q| {
            let (ex, ey) = (from[0] - q[0], from[1] - q[1]);
            (phys.min(ex.hypot(ey)), cells.min((ex / dx).hypot(ey / dy)))
        })
    };
    let per_ridge: Vec<(f64, f64)> = pts.par_iter().map(|p| nearest(p, curve)).collect();
    let n = per_ridge.len() as f64;
    let mean = per_ridge.iter().map(|d| d.0).sum::<f64>() / n;
    let mean_cells = per_ridge.iter().map(|d| d.1).sum::<f64>() / n;
    let max = per_ridge.iter().map(|d| d.0).fold(0.0, f64::max);
    let max_cells = per_ridge.iter().map(|d| d.1).fold(0.0, f64::max);
    let per_sample: Vec<(f64, f64)> = curve.par_iter().map(|q| nearest(q, &pts)).collect();
    let m = per_sample.len() as f64;
    let curve_mean = per_sample.iter().map(|d| d.0).sum::<f64>() / m;
    let curve_mean_cells = per_sample.iter().map(|d| d.1).sum::<f64>() / m;
    let covered = per_sample.iter().filter(|d| d.1 <= k_cells + CELL_SLACK).count();
    Ok(RidgeDistance {
        mean,
        max,
        mean_cells,
        max_cells,
        curve_mean,
        curve_mean_cells,
        coverage_fraction: covered as f64 / m,
    })
}

/// Fraction of `samples` with a ridge point within `k_cells`.
pub fn coverage(ridges: &RidgeSet, samples: &[[f64; 2]], spacing: [f64; 2], k_cells: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let [dx, dy] = spacing;
    let pts = ridges.coords();
    let hit = samples
        .par_iter()
        .filter(|q| pts.iter().any(|p| ((p[0] - q[0]) / dx).hypot((p[1] - q[1]) / dy) <= k_cells + CELL_SLACK))
        .count();
    hit as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{SystemId, SystemSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_grid(nx: usize, ny: usize) -> GridSpec2D {
        let spec = SystemSpec::builtin(SystemId::LinearSaddle);
        let mut g = GridSpec2D::planar(&spec, [0.0, (nx - 1) as f64], [0.0, (ny - 1) as f64], nx);
        g.resolution = [nx, ny];
        g
    }

    #[test]
    fn gradient_of_constant_and_linear_layers() {
        let c = Array2::from_elem((4, 5), 3.0);
        assert!(gradient_norm(&c, [1.0, 1.0]).iter().all(|v| *v == 0.0));
        let lin = Array2::from_shape_fn((4, 5), |(_, i)| i as f64);
        assert!(gradient_norm(&lin, [1.0, 1.0]).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn gradient_of_abs_peaks_at_kink_column() {
        let g = GridSpec2D::planar(&SystemSpec::builtin(SystemId::LinearSaddle), [-1.0, 1.0], [-1.0, 1.0], 201);
        let xs = g.xs();
        let layer = Array2::from_shape_fn((201, 201), |(_, i)| xs[i].abs());
        let gn = gradient_norm(&layer, g.spacing());
        // Central differences give 1 away from the kink and 0 on it; the
        // kink is the extremum of the gradient's variation, picked up by
        // the Laplacian below. The column next to it keeps full slope.
        assert_abs_diff_eq!(gn[[50, 100]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gn[[50, 30]], 1.0, epsilon = 1e-9);
        let lap = laplacian(&layer, g.spacing()).mapv(f64::abs);
        let row = lap.row(50);
        let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 100);
        assert_abs_diff_eq!(row[100], 2.0 / g.spacing()[0], epsilon = 1e-6);
        assert!(row.iter().enumerate().filter(|(i, _)| *i != 100).all(|(_, v)| *v < 1e-6));
    }

    #[test]
    fn laplacian_of_quadratic_and_linear() {
        let q = Array2::from_shape_fn((6, 7), |(j, i)| (i * i + j * j) as f64);
        let l = laplacian(&q, [1.0, 1.0]);
        for ((j, i), v) in l.indexed_iter() {
            let interior = i > 0 && j > 0 && i < 6 && j < 5;
            assert_eq!(*v, if interior { 4.0 } else { 0.0 });
        }
        let lin = Array2::from_shape_fn((6, 7), |(j, i)| 2.0 * i as f64 - j as f64);
        assert!(laplacian(&lin, [1.0, 1.0]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&mut v, 50.0), Some(2.5));
        assert_eq!(percentile(&mut v, 100.0), Some(4.0));
        assert_eq!(percentile(&mut [], 50.0), None);
    }

    #[test]
    fn constant_layer_has_no_ridges() {
        let g = unit_grid(5, 4);
        let layer = Array2::from_elem((4, 5), 1.0);
        for op in [Operator::GradientNorm, Operator::Laplacian] {
            assert!(extract_ridges(&layer, &g, op, 90.0).unwrap().is_empty());
        }
        assert!(extract_ridges(&layer, &g, Operator::Laplacian, 100.0).is_err());
        assert!(extract_ridges(&layer, &g, Operator::Laplacian, 0.0).is_err());
    }

    #[test]
    fn ridge_points_sorted_and_exclusion_respected() {
        let g = unit_grid(9, 9);
        let layer = Array2::from_shape_fn((9, 9), |(j, i)| (i as f64 - 4.0).abs() + 0.1 * (j as f64 - 4.0).abs());
        let set = extract_ridges(&layer, &g, Operator::Laplacian, 80.0).unwrap();
        assert!(!set.is_empty());
        assert!(set.points.windows(2).all(|w| (w[0].i, w[0].j) < (w[1].i, w[1].j)));
        assert!(set.points.iter().all(|p| p.i == 4));
        let mut ex = Array2::from_elem((9, 9), false);
        ex.column_mut(4).fill(true);
        let opts = RidgeOptions { exclude: Some(ex), nms: false };
        let set2 = extract_ridges_with(&layer, &g, Layer::Total, Operator::Laplacian, 80.0, &opts).unwrap();
        assert!(set2.points.iter().all(|p| p.i != 4));
    }

    #[test]
    fn nms_thins_a_band() {
        let g = unit_grid(21, 21);
        let layer = Array2::from_shape_fn((21, 21), |(_, i)| -((i as f64 - 10.0) / 3.0).powi(2));
        let set = extract_ridges(&layer, &g, Operator::Laplacian, 10.0).unwrap();
        let opts = RidgeOptions { exclude: None, nms: true };
        let thin = extract_ridges_with(&layer, &g, Layer::Total, Operator::GradientNorm, 50.0, &opts).unwrap();
        let thick = extract_ridges(&layer, &g, Operator::GradientNorm, 50.0).unwrap();
        assert!(!set.is_empty());
        assert!(thin.len() < thick.len());
        assert!(thin.points.iter().all(|p| thick.contains(p.i, p.j)));
    }

    #[test]
    fn dilate_and_band() {
        let mut m = Array2::from_elem((5, 5), false);
        m[[2, 2]] = true;
        assert_eq!(dilate(&m, 1).iter().filter(|v| **v).count(), 9);
        let half = Array2::from_shape_fn((4, 6), |(_, i)| i >= 3);
        let band = transition_band(&half, 0);
        assert!(band.indexed_iter().all(|((_, i), v)| *v == (i == 2 || i == 3)));
    }

    fn set_from(coords: &[[f64; 2]]) -> RidgeSet {
        RidgeSet {
            points: coords.iter().enumerate().map(|(k, c)| RidgePoint { i: k, j: 0, x: c[0], y: c[1], value: 1.0 }).collect(),
            source_layer: Layer::Total,
            operator: Operator::GradientNorm,
            threshold_percentile: 95.0,
            threshold: 0.0,
        }
    }

    #[test]
    fn ridge_distance_examples() {
        let curve: Vec<[f64; 2]> = (0..20).map(|k| [k as f64 * 0.1, (k as f64 * 0.1).sin()]).collect();
        let exact = ridge_distance(&set_from(&curve), &curve, [0.1, 0.1], 1.0).unwrap();
        assert_eq!((exact.mean, exact.max, exact.coverage_fraction), (0.0, 0.0, 1.0));
        let h = [0.1, 0.05];
        let shifted: Vec<[f64; 2]> = curve.iter().map(|c| [c[0] + h[0] + 5.0, c[1] + h[1]]).collect();
        let base: Vec<[f64; 2]> = curve.iter().map(|c| [c[0] + 5.0, c[1]]).collect();
        let one = ridge_distance(&set_from(&shifted), &base, h, 1.0).unwrap();
        assert!(one.max <= h[0].hypot(h[1]) + 1e-12);
        assert!(one.max_cells <= 2f64.sqrt() + 1e-9);
        assert!(ridge_distance(&set_from(&[]), &curve, h, 1.0).is_err());
        assert!(ridge_distance(&set_from(&curve), &[], h, 1.0).is_err());
    }

    #[test]
    fn diagonal_shift_is_one_cell_diagonal() {
        let h = [0.2, 0.1];
        let curve = vec![[0.0, 0.0]];
        let r = ridge_distance(&set_from(&[[0.2, 0.1]]), &curve, h, 1.0).unwrap();
        assert_abs_diff_eq!(r.max, 0.2f64.hypot(0.1), epsilon = 1e-15);
        assert_abs_diff_eq!(r.max_cells, 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.coverage_fraction, 0.0);
        assert_eq!(coverage(&set_from(&[[0.2, 0.1]]), &curve, h, 1.5), 1.0);
    }

    #[test]
    fn clusters_chain_by_link_distance() {
        let at = |cells: &[(usize, usize)]| RidgeSet {
            points: cells.iter().map(|&(i, j)| RidgePoint { i, j, x: i as f64, y: j as f64, value: 1.0 }).collect(),
            source_layer: Layer::Total,
            operator: Operator::GradientNorm,
            threshold_percentile: 95.0,
            threshold: 0.0,
        };
        let r = at(&[(0, 0), (1, 1), (2, 2), (10, 0), (12, 0), (30, 30)]);
        assert_eq!(ridge_clusters(&r, 1), vec![vec![0, 1, 2], vec![3], vec![4], vec![5]]);
        assert_eq!(ridge_clusters(&r, 2), vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
        assert_eq!(ridge_clusters(&r, 0), ridge_clusters(&r, 1));
        let all: usize = ridge_clusters(&r, 40).iter().map(Vec::len).sum();
        assert_eq!((ridge_clusters(&r, 40).len(), all), (1, 6));
        assert!(ridge_clusters(&at(&[]), 2).is_empty());
    }

    fn layer_strategy() -> impl Strategy<Value = Array2<f64>> {
        (3usize..9, 3usize..9).prop_flat_map(|(ny, nx)| {
            prop::collection::vec(-10.0f64..10.0, ny * nx)
                .prop_map(move |v| Array2::from_shape_vec((ny, nx), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn operators_ignore_added_constants(layer in layer_strategy(), c in -100.0f64..100.0) {
            let shifted = layer.mapv(|v| v + c);
            for op in [Operator::GradientNorm, Operator::Laplacian] {
                let a = apply_operator(&layer, [0.5, 0.25], op);
                let b = apply_operator(&shifted, [0.5, 0.25], op);
                for (u, v) in a.iter().zip(b.iter()) {
                    prop_assert!((u - v).abs() <= 1e-9 * (1.0 + c.abs()) * 100.0);
                }
            }
        }

        #[test]
        fn operators_are_translation_equivariant(layer in layer_strategy()) {
            let (ny, nx) = layer.dim();
            // Shift content one column right, repeating the first column.
            let shifted = Array2::from_shape_fn((ny, nx), |(j, i)| layer[[j, i.saturating_sub(1)]]);
            for op in [Operator::GradientNorm, Operator::Laplacian] {
                let a = apply_operator(&layer, [1.0, 1.0], op);
                let b = apply_operator(&shifted, [1.0, 1.0], op);
                for j in 1..ny - 1 {
                    for i in 2..nx - 1 {
                        prop_assert_eq!(b[[j, i]], a[[j, i - 1]]);
                    }
                }
            }
        }

        #[test]
        fn ridges_are_monotone_in_percentile(layer in layer_strategy(), lo in 1.0f64..98.0, d in 0.0f64..1.0) {
            let (ny, nx) = layer.dim();
            let mut g = unit_grid(nx, ny);
            g.resolution = [nx, ny];
            let hi = lo + d * (99.0 - lo);
            for op in [Operator::GradientNorm, Operator::Laplacian] {
                let a = extract_ridges(&layer, &g, op, lo).unwrap();
                let b = extract_ridges(&layer, &g, op, hi).unwrap();
                prop_assert!(b.points.iter().all(|p| a.contains(p.i, p.j)));
            }
        }
    }
}
