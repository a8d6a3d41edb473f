//! Field files, CSV exports and PNG rendering.
//!
//! Field file layout:
//!
//! ```text
//! b"LDF1" | header length: u64 LE | JSON header | layers: f64 LE, row-major,
//! in `layer_order` | masks: one byte per node (0 or 1), in `masks` order
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynsys::StateVec;
use crate::error::{Error, Result};
use crate::extract::{apply_operator, Operator, RidgeSet};
use crate::hamsec::ClassificationGrid;
use crate::ldfield::{FieldMeta, GridSpec2D, LDField, Layer};

pub const MAGIC: [u8; 4] = *b"LDF1";
pub const FORMAT_VERSION: u32 = 1;
const ENDIANNESS: &str = "little";
const MASK_ESCAPE: &str = "escape";
const MASK_FORBIDDEN: &str = "forbidden";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    endianness: String,
    engine_version: String,
    grid: GridSpec2D,
    meta: FieldMeta,
    layer_order: Vec<Layer>,
    masks: Vec<String>,
}

/// Serializes a field to the byte layout above.
pub fn encode_field(field: &LDField) -> Result<Vec<u8>> {
    let shape = field.grid.shape();
    for layer in Layer::ALL {
        if field.layer(layer).dim() != shape {
            return Err(Error::InvalidInput(format!("{layer} layer does not match the grid shape")));
        }
    }
    let mut masks = vec![MASK_ESCAPE.to_string()];
    if field.forbidden_mask.is_some() {
        masks.push(MASK_FORBIDDEN.to_string());
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        endianness: ENDIANNESS.into(),
        engine_version: crate::ENGINE_VERSION.into(),
        grid: field.grid.clone(),
        meta: field.meta.clone(),
        layer_order: Layer::ALL.to_vec(),
        masks,
    };
    let json = serde_json::to_vec(&header)?;
    let n = shape.0 * shape.1;
    let mut out = Vec::with_capacity(12 + json.len() + n * (3 * 8 + 2));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in Layer::ALL {
        for v in field.layer(layer).iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend(field.escape_mask.iter().map(|&b| u8::from(b)));
    if let Some(forbidden) = &field.forbidden_mask {
        out.extend(forbidden.iter().map(|&b| u8::from(b)));
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        Error::Truncated(format!("{what}: need {n} bytes at offset {at}, file has {}", bytes.len()))
    })?;
    let out = &bytes[*at..end];
    *at = end;
    Ok(out)
}

/// Parses bytes produced by [`encode_field`].
pub fn decode_field(bytes: &[u8]) -> Result<LDField> {
    let mut at = 0;
    let magic = take(bytes, &mut at, 4, "magic")?;
    if magic != MAGIC {
        return Err(Error::MagicMismatch { found: magic.try_into().expect("4 bytes") });
    }
    let len = u64::from_le_bytes(take(bytes, &mut at, 8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Malformed(format!("header length {len} too large")))?;
    let json = take(bytes, &mut at, len, "header")?;
    let value: serde_json::Value = serde_json::from_slice(json)?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("header lacks format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch { expected: FORMAT_VERSION, found: version as u32 });
    }
    let header: Header = serde_json::from_value(value)?;
    if header.endianness != ENDIANNESS {
        return Err(Error::Malformed(format!("unsupported endianness `{}`", header.endianness)));
    }
    header.grid.validate_shape().map_err(|e| Error::Malformed(e.to_string()))?;
    let mut order = header.layer_order.clone();
    order.sort_by_key(|l| *l as u8);
    order.dedup();
    if order.len() != 3 || header.layer_order.len() != 3 {
        return Err(Error::Malformed("layer_order must list forward, backward and total once".into()));
    }
    let has_forbidden = match header.masks.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        [MASK_ESCAPE] => false,
        [MASK_ESCAPE, MASK_FORBIDDEN] => true,
        other => return Err(Error::Malformed(format!("unsupported mask list {other:?}"))),
    };
    let shape = header.grid.shape();
    let n = shape
        .0
        .checked_mul(shape.1)
        .ok_or_else(|| Error::Malformed("grid too large".into()))?;

    let mut layers: [Option<Array2<f64>>; 3] = [None, None, None];
    for layer in &header.layer_order {
        let raw = take(bytes, &mut at, n * 8, &format!("{layer} layer"))?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        layers[*layer as usize] = Some(Array2::from_shape_vec(shape, values).expect("shape"));
    }
    let mut read_mask = |name: &str| -> Result<Array2<bool>> {
        let raw = take(bytes, &mut at, n, &format!("{name} mask"))?;
        let values = raw
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Malformed(format!("{name} mask byte {b} is not 0 or 1"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(Array2::from_shape_vec(shape, values).expect("shape"))
    };
    let escape_mask = read_mask(MASK_ESCAPE)?;
    let forbidden_mask = if has_forbidden { Some(read_mask(MASK_FORBIDDEN)?) } else { None };
    if at != bytes.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - at)));
    }
    let [forward, backward, total] = layers.map(|l| l.expect("all layers read"));
    Ok(LDField { grid: header.grid, forward, backward, total, escape_mask, forbidden_mask, meta: header.meta })
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_field(field: &LDField, path: impl AsRef<Path>) -> Result<()> {
    write_atomically(path.as_ref(), &encode_field(field)?)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<LDField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per node: `i, j, <axis0>, <axis1>, forward, backward, total,
/// escaped[, forbidden]`.
pub fn export_field_csv(field: &LDField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let [a, b] = &field.grid.axis_names;
    let mut header = vec!["i", "j", a.as_str(), b.as_str(), "forward", "backward", "total", "escaped"];
    if field.forbidden_mask.is_some() {
        header.push("forbidden");
    }
    w.write_record(&header)?;
    let (ny, nx) = field.shape();
    for j in 0..ny {
        for i in 0..nx {
            let mut row = vec![
                i.to_string(),
                j.to_string(),
                fmt_f64(field.grid.x(i)),
                fmt_f64(field.grid.y(j)),
                fmt_f64(field.forward[[j, i]]),
                fmt_f64(field.backward[[j, i]]),
                fmt_f64(field.total[[j, i]]),
                u8::from(field.escape_mask[[j, i]]).to_string(),
            ];
            if let Some(f) = &field.forbidden_mask {
                row.push(u8::from(f[[j, i]]).to_string());
            }
            w.write_record(&row)?;
        }
    }
    finish(w, path)
}

/// Layers recovered from [`export_field_csv`] output.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvField {
    pub forward: Array2<f64>,
    pub backward: Array2<f64>,
    pub total: Array2<f64>,
    pub escape_mask: Array2<bool>,
    pub forbidden_mask: Option<Array2<bool>>,
}

pub fn import_field_csv(path: impl AsRef<Path>) -> Result<CsvField> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let has_forbidden = r.headers()?.len() == 9;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Malformed(format!("row too short: {rec:?}")));
        let num = |k: usize| -> Result<f64> {
            field(k)?.parse::<f64>().map_err(|e| Error::Malformed(format!("bad number: {e}")))
        };
        let idx = |k: usize| -> Result<usize> {
            field(k)?.parse::<usize>().map_err(|e| Error::Malformed(format!("bad index: {e}")))
        };
        let flag = |k: usize| -> Result<bool> { Ok(field(k)? == "1") };
        let forbidden = if has_forbidden { flag(8)? } else { false };
        rows.push((idx(0)?, idx(1)?, num(4)?, num(5)?, num(6)?, flag(7)?, forbidden));
    }
    let nx = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let ny = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != nx * ny {
        return Err(Error::Malformed(format!("{} rows for a {nx}x{ny} grid", rows.len())));
    }
    let mut out = CsvField {
        forward: Array2::zeros((ny, nx)),
        backward: Array2::zeros((ny, nx)),
        total: Array2::zeros((ny, nx)),
        escape_mask: Array2::from_elem((ny, nx), false),
        forbidden_mask: has_forbidden.then(|| Array2::from_elem((ny, nx), false)),
    };
    for (i, j, f, b, t, e, fb) in rows {
        out.forward[[j, i]] = f;
        out.backward[[j, i]] = b;
        out.total[[j, i]] = t;
        out.escape_mask[[j, i]] = e;
        if let Some(m) = &mut out.forbidden_mask {
            m[[j, i]] = fb;
        }
    }
    Ok(out)
}

/// Columns `i, j, x, y, operator_value`.
pub fn export_ridges_csv(ridges: &RidgeSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["i", "j", "x", "y", "operator_value"])?;
    for p in &ridges.points {
        w.write_record([p.i.to_string(), p.j.to_string(), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.value)])?;
    }
    finish(w, path)
}

/// Columns `t, <coord names...>`.
pub fn export_points_csv(points: &[StateVec], coord_names: &[&str], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["t"];
    header.extend_from_slice(coord_names);
    w.write_record(&header)?;
    for p in points {
        let row: Vec<String> = std::iter::once(p.t).chain(p.coords.iter().copied()).map(fmt_f64).collect();
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Columns `i, j, <axis0>, <axis1>, label, settle_time, crossings, failed`;
/// forbidden nodes are omitted.
pub fn export_classification_csv(grid: &ClassificationGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let [a, b] = &grid.grid.axis_names;
    w.write_record(["i", "j", a.as_str(), b.as_str(), "label", "settle_time", "crossings", "failed"])?;
    for ((j, i), label) in grid.labels.indexed_iter() {
        let Some(l) = label else { continue };
        w.write_record([
            i.to_string(),
            j.to_string(),
            fmt_f64(grid.grid.x(i)),
            fmt_f64(grid.grid.y(j)),
            l.label.as_str().to_string(),
            l.settle_time.map(fmt_f64).unwrap_or_default(),
            l.crossings.to_string(),
            u8::from(l.failed).to_string(),
        ])?;
    }
    finish(w, path)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderLayer {
    Forward,
    Backward,
    #[default]
    Total,
    /// Gradient norm of `RenderConfig::source`.
    Gradient,
    /// Absolute Laplacian of `RenderConfig::source`.
    Laplacian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    #[default]
    Viridis,
    Magma,
    Grayscale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlayKind {
    Curve,
    Markers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub kind: OverlayKind,
    /// Points in grid coordinates; non-finite points break a curve.
    pub points: Vec<[f64; 2]>,
    pub color: [u8; 3],
    pub label: String,
    /// Line half-width or marker radius, in pixels.
    pub size: u32,
}

pub const MAGENTA: [u8; 3] = [255, 0, 255];
pub const YELLOW: [u8; 3] = [255, 221, 0];
pub const RED: [u8; 3] = [230, 30, 30];
pub const BLUE: [u8; 3] = [40, 90, 255];
pub const WHITE: [u8; 3] = [255, 255, 255];

impl Overlay {
    pub fn curve(points: Vec<[f64; 2]>, color: [u8; 3], label: impl Into<String>) -> Self {
        Overlay { kind: OverlayKind::Curve, points, color, label: label.into(), size: 1 }
    }

    pub fn markers(points: Vec<[f64; 2]>, color: [u8; 3], label: impl Into<String>) -> Self {
        Overlay { kind: OverlayKind::Markers, points, color, label: label.into(), size: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub layer: RenderLayer,
    pub source: Layer,
    pub colormap: Colormap,
    pub width: u32,
    pub height: u32,
    /// Permit sizes that divide the grid resolution exactly.
    pub allow_downscale: bool,
    pub overlays: Vec<Overlay>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            layer: RenderLayer::Total,
            source: Layer::Total,
            colormap: Colormap::Viridis,
            width: 0,
            height: 0,
            allow_downscale: false,
            overlays: Vec::new(),
        }
    }
}

impl RenderConfig {
    /// One pixel per node.
    pub fn native(field: &LDField) -> Self {
        RenderConfig { width: field.grid.nx() as u32, height: field.grid.ny() as u32, ..RenderConfig::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RenderReport {
    pub warnings: Vec<String>,
}

const FORBIDDEN_GRAY: [u8; 3] = [128, 128, 128];

fn color(map: Colormap, t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    match map {
        Colormap::Viridis => colorous::VIRIDIS.eval_continuous(t).as_array(),
        Colormap::Magma => colorous::MAGMA.eval_continuous(t).as_array(),
        Colormap::Grayscale => {
            let g = (t * 255.0).round() as u8;
            [g, g, g]
        }
    }
}

/// Renders `field` to an RGB image; normalization is for display only.
pub fn render_image(field: &LDField, cfg: &RenderConfig) -> Result<(image::RgbImage, RenderReport)> {
    let (ny, nx) = field.shape();
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let exact_divisor = |n: usize, s: usize| s > 0 && n.is_multiple_of(s);
    let fits = w >= nx && h >= ny;
    let downscale = cfg.allow_downscale && exact_divisor(nx, w) && exact_divisor(ny, h);
    if !(fits || downscale) {
        return Err(Error::InvalidInput(format!(
            "image {w}x{h} is smaller than the {nx}x{ny} grid and is not an allowed integer downscale"
        )));
    }
    let values = match cfg.layer {
        RenderLayer::Forward => field.forward.clone(),
        RenderLayer::Backward => field.backward.clone(),
        RenderLayer::Total => field.total.clone(),
        RenderLayer::Gradient => apply_operator(field.layer(cfg.source), field.grid.spacing(), Operator::GradientNorm),
        RenderLayer::Laplacian => apply_operator(field.layer(cfg.source), field.grid.spacing(), Operator::Laplacian),
    };
    let forbidden = |j: usize, i: usize| field.forbidden_mask.as_ref().is_some_and(|m| m[[j, i]]);
    let (lo, hi) = values
        .indexed_iter()
        .filter(|((j, i), v)| v.is_finite() && !forbidden(*j, *i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    let mut report = RenderReport::default();
    let constant = !(hi > lo);
    if constant {
        report.warnings.push("layer is constant; rendered uniformly".into());
    }
    let shade = |v: f64| if constant { 0.0 } else { (v - lo) / (hi - lo) };

    let mut img = image::RgbImage::new(cfg.width, cfg.height);
    for py in 0..h {
        for px in 0..w {
            // Row 0 of the image is the top of the grid.
            let rgb = if fits {
                let i = px * nx / w;
                let j = ny - 1 - py * ny / h;
                if forbidden(j, i) { FORBIDDEN_GRAY } else { color(cfg.colormap, shade(values[[j, i]])) }
            } else {
                let (fx, fy) = (nx / w, ny / h);
                let (mut sum, mut count) = (0.0, 0usize);
                for jj in 0..fy {
                    for ii in 0..fx {
                        let (i, j) = (px * fx + ii, ny - 1 - (py * fy + jj));
                        if !forbidden(j, i) && values[[j, i]].is_finite() {
                            sum += values[[j, i]];
                            count += 1;
                        }
                    }
                }
                if count == 0 { FORBIDDEN_GRAY } else { color(cfg.colormap, shade(sum / count as f64)) }
            };
            img.put_pixel(px as u32, py as u32, image::Rgb(rgb));
        }
    }

    let g = &field.grid;
    let [dx, dy] = g.spacing();
    let to_pixel = |p: [f64; 2]| {
        let fi = (p[0] - g.ranges[0][0]) / dx;
        let fj = (p[1] - g.ranges[1][0]) / dy;
        ((fi + 0.5) * w as f64 / nx as f64, (ny as f64 - 0.5 - fj) * h as f64 / ny as f64)
    };
    for overlay in &cfg.overlays {
        let size = overlay.size as i64;
        match overlay.kind {
            OverlayKind::Markers => {
                for p in overlay.points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
                    let (cx, cy) = to_pixel(*p);
                    disc(&mut img, cx.floor() as i64, cy.floor() as i64, size, overlay.color);
                }
            }
            OverlayKind::Curve => {
                for seg in overlay.points.windows(2) {
                    if seg.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                        continue;
                    }
                    let (a, b) = (to_pixel(seg[0]), to_pixel(seg[1]));
                    line(&mut img, a, b, size - 1, overlay.color);
                }
            }
        }
    }
    Ok((img, report))
}

fn plot(img: &mut image::RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, image::Rgb(c));
    }
}

fn disc(img: &mut image::RgbImage, cx: i64, cy: i64, r: i64, c: [u8; 3]) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                plot(img, cx + dx, cy + dy, c);
            }
        }
    }
}

fn line(img: &mut image::RgbImage, a: (f64, f64), b: (f64, f64), half: i64, c: [u8; 3]) {
    // Skip segments far outside the canvas.
    let lim = 4.0 * f64::from(img.width().max(img.height()));
    if [a.0, a.1, b.0, b.1].iter().any(|v| v.abs() > lim) {
        return;
    }
    let (mut x0, mut y0) = (a.0.floor() as i64, a.1.floor() as i64);
    let (x1, y1) = (b.0.floor() as i64, b.1.floor() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        if half > 0 {
            disc(img, x0, y0, half, c);
        } else {
            plot(img, x0, y0, c);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Renders and writes a PNG.
pub fn render_png(field: &LDField, cfg: &RenderConfig, path: impl AsRef<Path>) -> Result<RenderReport> {
    let path = path.as_ref();
    let (img, report) = render_image(field, cfg)?;
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    write_atomically(path, &bytes)?;
    Ok(report)
}
