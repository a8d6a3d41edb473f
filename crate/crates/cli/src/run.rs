//! Executes a resolved [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use ldscope::dynsys::analytic::slow_manifold_curve;
use ldscope::extract::{field_ridges, FieldRidgeConfig};
use ldscope::hamsec::{classify_section_grid, compute_section_ld_field, energy_boundary};
use ldscope::io::{
    export_classification_csv, export_field_csv, export_points_csv, export_ridges_csv, read_field, render_png,
    write_field, Overlay as Mark, RenderConfig, RenderLayer, MAGENTA, WHITE, YELLOW,
};
use ldscope::{
    compute_ld_field, strobe_map, EscapeRegion, GridSpec2D, IntegratorConfig, LDConfig, LDField, Layer, Operator,
    SectionSpec, Stability, SystemId, SystemSpec, ENGINE_VERSION,
};
use serde::Serialize;

use crate::cli::Invocation;
use crate::config::{Command, Origin, RunConfig, DEFAULT_RESOLUTION};
use crate::error::CliError;
use crate::figures::{figure, Figure, Overlay};

/// Percentile used for ridge sets written by `repro`.
pub const REPRO_PERCENTILE: f64 = 95.0;
const OVERLAY_SAMPLES: usize = 400;

/// Merges the config file named by the flags with the flags themselves.
pub fn resolve(inv: Invocation) -> Result<(RunConfig, Origin), CliError> {
    let (mut cfg, origin) = match &inv.config {
        Some(path) => RunConfig::load(path)?,
        None => (RunConfig::default(), Origin::default()),
    };
    cfg.apply(inv.overrides);
    if !inv.integrator.is_empty() {
        let mut ic = cfg.integrator_config();
        inv.integrator.apply(&mut ic);
        cfg.integrator = Some(ic);
    }
    Ok((cfg, origin))
}

/// Runs the configured command on a pool of the resolved worker count and
/// returns the artifacts written.
pub fn run(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let command = cfg.command.ok_or_else(|| CliError::Config("no command given".into()))?;
    let workers = cfg.resolved_workers().map_err(|e| origin.locate("workers", e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match command {
        Command::Field => run_field(cfg, origin),
        Command::Extract => run_extract(cfg, origin),
        Command::Section => run_section(cfg, origin),
        Command::Strobe => run_strobe(cfg, origin),
        Command::Classify => run_classify(cfg, origin),
        Command::Repro => {
            let id = cfg.figure.as_deref().ok_or_else(|| CliError::Config("repro needs a figure id".into()))?;
            let fig = figure(id).ok_or_else(|| origin.locate("figure", format!("unknown figure `{id}`")))?;
            let n = cfg.resolution.unwrap_or(DEFAULT_RESOLUTION);
            if n < 2 {
                return Err(origin.locate("resolution", format!("resolution must be at least 2, got {n}")));
            }
            let dir = cfg.output.dir.clone().unwrap_or_else(|| Path::new("repro").join(fig.id));
            let integrator = integrator(cfg, origin)?;
            repro(fig, n, &integrator, &dir)
        }
    })
}

/// Attaches the config line of the first key (in order) that was set.
fn locate_first(origin: &Origin, keys: &[&str], msg: impl std::fmt::Display) -> CliError {
    let key = keys.iter().copied().find(|k| origin.line_of(k).is_some()).unwrap_or(keys[0]);
    origin.locate(key, msg)
}

fn config_error(origin: &Origin, keys: &[&str], e: ldscope::Error) -> CliError {
    match CliError::from(e) {
        CliError::Config(msg) => locate_first(origin, keys, msg),
        other => other,
    }
}

fn system(cfg: &RunConfig, origin: &Origin, default: Option<SystemId>) -> Result<SystemSpec, CliError> {
    let id = match (&cfg.system, default) {
        (Some(name), _) => name.parse::<SystemId>().map_err(|e| config_error(origin, &["system"], e))?,
        (None, Some(id)) => id,
        (None, None) => return Err(CliError::Config("a system is required (--system)".into())),
    };
    SystemSpec::with_params(id, &cfg.params).map_err(|e| {
        let key = match &e {
            ldscope::Error::UnknownParameter { param, .. } | ldscope::Error::NonFiniteParameter { param, .. } => {
                format!("params.{param}")
            }
            _ => "params".into(),
        };
        config_error(origin, &[&key, "system"], e)
    })
}

fn integrator(cfg: &RunConfig, origin: &Origin) -> Result<IntegratorConfig, CliError> {
    let ic = cfg.integrator_config();
    ic.validate().map_err(|e| {
        let msg = e.to_string();
        let key = ["rel_tol", "abs_tol", "max_step", "fixed_step", "max_steps"]
            .into_iter()
            .find(|k| msg.contains(&format!("`{k}`")))
            .map_or("integrator".to_string(), |k| format!("integrator.{k}"));
        config_error(origin, &[&key], e)
    })?;
    Ok(ic)
}

fn ld_config(cfg: &RunConfig, origin: &Origin, spec: &SystemSpec) -> Result<LDConfig, CliError> {
    let d = LDConfig::default();
    let a = &cfg.ld;
    let escape = match a.escape_radius {
        Some(r) if r > 0.0 => EscapeRegion::ball(vec![0.0; spec.dim], r),
        Some(0.0) => EscapeRegion::disabled(),
        Some(r) => return Err(origin.locate("ld.escape_radius", format!("escape radius must be positive, got {r}"))),
        None => EscapeRegion::disabled(),
    };
    let ld = LDConfig {
        p: a.p.unwrap_or(d.p),
        tau_f: a.tau_f.or(a.tau).unwrap_or(d.tau_f),
        tau_b: a.tau_b.or(a.tau).unwrap_or(d.tau_b),
        escape,
        auto_balance: a.auto_balance,
        balance_rates: a.balance_rates,
    };
    ld.resolve(spec).map_err(|e| {
        let msg = e.to_string();
        let keys: &[&str] = if msg.contains("p must") {
            &["ld.p"]
        } else if msg.contains("tau") {
            &["ld.tau_f", "ld.tau_b", "ld.tau"]
        } else if msg.contains("escape") {
            &["ld.escape_radius"]
        } else {
            &["ld.balance_rates", "ld.auto_balance"]
        };
        config_error(origin, keys, e)
    })
}

fn grid_ranges(cfg: &RunConfig, origin: &Origin) -> Result<crate::config::GridRanges, CliError> {
    let grid = cfg.grid.as_ref().ok_or_else(|| CliError::Config("a grid is required (--grid)".into()))?;
    grid.ranges().map_err(|e| origin.locate("grid", e))
}

fn planar_grid(cfg: &RunConfig, origin: &Origin, spec: &SystemSpec) -> Result<GridSpec2D, CliError> {
    let r = grid_ranges(cfg, origin)?;
    let names = spec.coord_names();
    let axis_names = cfg.axes.clone().unwrap_or_else(|| [names[0].to_string(), names[1].to_string()]);
    let grid = GridSpec2D {
        axis_names,
        ranges: [r.x, r.y],
        resolution: r.resolution,
        fixed_coords: cfg.fixed.clone(),
        t0: cfg.t0.unwrap_or(0.0),
    };
    grid.validate(spec).map_err(|e| config_error(origin, &["grid", "axes", "fixed", "t0"], e))?;
    Ok(grid)
}

fn section_setup(cfg: &RunConfig, origin: &Origin) -> Result<(SystemSpec, SectionSpec, GridSpec2D), CliError> {
    let spec = system(cfg, origin, Some(SystemId::DoubleWell2dof))?;
    if spec.id != SystemId::DoubleWell2dof {
        return Err(origin.locate("system", format!("section commands require double_well_2dof, got {}", spec.id)));
    }
    let s = &cfg.section;
    let id = s.id.ok_or_else(|| CliError::Config("a section is required (--section)".into()))?;
    let h0 = s.h0.ok_or_else(|| CliError::Config("a section energy is required (--h0)".into()))?;
    let mut section = SectionSpec::new(id, h0);
    if let Some(x) = s.x_value {
        section.x_value = x;
    }
    section.branch = s.branch.unwrap_or_default();
    let params = spec.double_well_params()?;
    section.validate(&params).map_err(|e| config_error(origin, &["section.x_value", "section.h0"], e))?;
    if let Some(axes) = &cfg.axes {
        if axes.clone() != id.axes().map(String::from) {
            return Err(origin.locate("axes", format!("section {id} has axes {:?}", id.axes())));
        }
    }
    let r = grid_ranges(cfg, origin)?;
    let grid = GridSpec2D { t0: cfg.t0.unwrap_or(0.0), ..section.grid([r.x, r.y], r.resolution) };
    grid.validate_shape().map_err(|e| config_error(origin, &["grid"], e))?;
    Ok((spec, section, grid))
}

fn out_path(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.output.path.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write_field_outputs(field: &LDField, cfg: &RunConfig, default: &str, marks: Vec<Mark>) -> Result<Vec<PathBuf>, CliError> {
    let path = out_path(cfg, default);
    write_field(field, &path)?;
    let mut written = vec![path];
    if let Some(png) = &cfg.output.png {
        render_png(field, &RenderConfig { overlays: marks, ..RenderConfig::native(field) }, png)?;
        written.push(png.clone());
    }
    if let Some(csv) = &cfg.output.csv {
        export_field_csv(field, csv)?;
        written.push(csv.clone());
    }
    report_failures(field);
    Ok(written)
}

fn report_failures(field: &LDField) {
    if field.meta.failure_count > 0 {
        eprintln!("warning: integration failed at {} nodes (recorded in metadata)", field.meta.failure_count);
    }
}

fn run_field(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let spec = system(cfg, origin, None)?;
    let grid = planar_grid(cfg, origin, &spec)?;
    let ld = ld_config(cfg, origin, &spec)?;
    let ic = integrator(cfg, origin)?;
    let field = compute_ld_field(&spec, &grid, &ld, &ic)?;
    write_field_outputs(&field, cfg, "field.ldf", Vec::new())
}

fn run_section(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let (spec, section, grid) = section_setup(cfg, origin)?;
    let ld = ld_config(cfg, origin, &spec)?;
    let ic = integrator(cfg, origin)?;
    let field = compute_section_ld_field(&spec, &section, &grid, &ld, &ic)?;
    let marks = energy_marks(&spec, &section)?;
    write_field_outputs(&field, cfg, "section.ldf", marks)
}

fn run_extract(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let e = &cfg.extract;
    let input = e.input.as_ref().ok_or_else(|| CliError::Config("an input field is required (--input)".into()))?;
    let field = read_field(input)?;
    let d = FieldRidgeConfig::default();
    let rc = FieldRidgeConfig {
        layer: e.layer.unwrap_or(d.layer),
        operator: e.operator.unwrap_or(d.operator),
        percentile: e.percentile.unwrap_or(d.percentile),
        nms: e.nms,
        ..d
    };
    let ridges = field_ridges(&field, &rc).map_err(|err| config_error(origin, &["extract.percentile"], err))?;
    let path = out_path(cfg, "ridges.csv");
    export_ridges_csv(&ridges, &path)?;
    let mut written = vec![path];
    if let Some(png) = &cfg.output.png {
        let layer = match rc.operator {
            Operator::GradientNorm => RenderLayer::Gradient,
            Operator::Laplacian => RenderLayer::Laplacian,
        };
        let mut mark = Mark::markers(ridges.coords(), WHITE, "ridges");
        mark.size = 0;
        let rcfg = RenderConfig { layer, source: rc.layer, overlays: vec![mark], ..RenderConfig::native(&field) };
        render_png(&field, &rcfg, png)?;
        written.push(png.clone());
    }
    Ok(written)
}

fn run_strobe(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let spec = system(cfg, origin, None)?;
    let period = spec
        .forcing_period()
        .ok_or_else(|| locate_first(origin, &["system", "params"], format!("{} with these parameters is not periodically forced", spec.id)))?;
    let s = &cfg.strobe;
    let ic = s.ic.as_ref().ok_or_else(|| CliError::Config("an initial condition is required (--ic)".into()))?;
    if ic.len() != spec.dim {
        return Err(origin.locate("strobe.ic", format!("initial condition needs {} values, got {}", spec.dim, ic.len())));
    }
    let periods = s.periods.ok_or_else(|| CliError::Config("a period count is required (--periods)".into()))?;
    let skip = s.skip.unwrap_or(0);
    if skip > periods {
        return Err(origin.locate("strobe.skip", format!("skip {skip} exceeds periods {periods}")));
    }
    let icfg = integrator(cfg, origin)?;
    let out = strobe_map(&spec, ic, cfg.t0.unwrap_or(0.0), period, periods as usize, skip as usize, &icfg)
        .map_err(|e| config_error(origin, &["strobe.ic", "t0"], e))?;
    if out.failed {
        eprintln!("warning: integration failed after {} strobe points", out.points.len());
    }
    let path = out_path(cfg, "strobe.csv");
    export_points_csv(&out.points, spec.coord_names(), &path)?;
    Ok(vec![path])
}

fn run_classify(cfg: &RunConfig, origin: &Origin) -> Result<Vec<PathBuf>, CliError> {
    let (spec, section, grid) = section_setup(cfg, origin)?;
    integrator(cfg, origin)?;
    let cc = cfg.classify_config();
    let labels = classify_section_grid(&spec, &section, &grid, &cc)
        .map_err(|e| config_error(origin, &["classify.t_max", "classify.eps_settle"], e))?;
    let path = out_path(cfg, "labels.csv");
    export_classification_csv(&labels, &path)?;
    Ok(vec![path])
}

fn energy_marks(spec: &SystemSpec, section: &SectionSpec) -> Result<Vec<Mark>, CliError> {
    let params = spec.double_well_params()?;
    Ok(energy_boundary(&params, section, OVERLAY_SAMPLES)
        .into_iter()
        .map(|c| Mark::curve(c, MAGENTA, "energy boundary"))
        .collect())
}

fn overlay_marks(fig: &Figure, spec: &SystemSpec, section: Option<&SectionSpec>) -> Result<Vec<Mark>, CliError> {
    let mut marks = Vec::new();
    let inside = |p: &[f64]| p[0] >= fig.x[0] && p[0] <= fig.x[1] && p[1] >= fig.y[0] && p[1] <= fig.y[1];
    for overlay in fig.overlays {
        match overlay {
            Overlay::SlowManifold => {
                let pts = (0..OVERLAY_SAMPLES)
                    .map(|k| {
                        let x = fig.x[0] + (fig.x[1] - fig.x[0]) * k as f64 / (OVERLAY_SAMPLES - 1) as f64;
                        let y = slow_manifold_curve(spec, x)?;
                        Ok(if inside(&[x, y]) { [x, y] } else { [f64::NAN; 2] })
                    })
                    .collect::<ldscope::Result<Vec<_>>>()?;
                marks.push(Mark::curve(pts, MAGENTA, "slow manifold"));
            }
            Overlay::Equilibria => {
                let eq = spec.equilibria();
                let pick = |s: Stability| {
                    eq.iter()
                        .filter(|e| e.stability == s && inside(&e.point))
                        .map(|e| [e.point[0], e.point[1]])
                        .collect::<Vec<_>>()
                };
                marks.push(Mark::markers(pick(Stability::Stable), YELLOW, "stable equilibria"));
                marks.push(Mark::markers(pick(Stability::Saddle), MAGENTA, "saddle equilibria"));
            }
            Overlay::EnergyBoundary => {
                if let Some(section) = section {
                    marks.extend(energy_marks(spec, section)?);
                }
            }
        }
    }
    Ok(marks)
}

/// Everything a `repro` run used, written next to its artifacts.
#[derive(Serialize)]
struct Manifest<'a> {
    figure: &'a Figure,
    grid: &'a GridSpec2D,
    ld: &'a LDConfig,
    integrator: &'a IntegratorConfig,
    ridge_percentile: f64,
    engine_version: &'static str,
    artifacts: Vec<String>,
}

/// Regenerates one figure's data with `n` nodes along its vertical axis.
pub fn repro(fig: &Figure, n: usize, integrator: &IntegratorConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Run(ldscope::Error::Io { path: dir.to_path_buf(), source: e }))?;
    let spec = SystemSpec::new(fig.system, fig.params)?;
    let mut ld = LDConfig::new(fig.p, fig.tau_f, fig.tau_b);
    if let Some(r) = fig.escape_radius {
        ld.escape = EscapeRegion::ball(vec![0.0; spec.dim], r);
    }
    let resolution = fig.resolution(n);
    let section = fig.section.map(|s| SectionSpec::new(s.id, s.h0));
    let (field, grid) = match &section {
        Some(sec) => {
            let grid = sec.grid([fig.x, fig.y], resolution);
            (compute_section_ld_field(&spec, sec, &grid, &ld, integrator)?, grid)
        }
        None => {
            let names = spec.coord_names();
            let grid = GridSpec2D {
                axis_names: [names[0].to_string(), names[1].to_string()],
                ranges: [fig.x, fig.y],
                resolution,
                fixed_coords: Default::default(),
                t0: 0.0,
            };
            (compute_ld_field(&spec, &grid, &ld, integrator)?, grid)
        }
    };
    report_failures(&field);
    let mut written = Vec::new();
    let path = dir.join(format!("{}.ldf", fig.id));
    write_field(&field, &path)?;
    written.push(path);

    for &(layer, op) in fig.ridges {
        let ridges = field_ridges(&field, &FieldRidgeConfig::new(layer, op, REPRO_PERCENTILE))?;
        let path = dir.join(format!("{}_ridges_{}_{}.csv", fig.id, layer.as_str(), op.as_str()));
        export_ridges_csv(&ridges, &path)?;
        written.push(path);
    }

    if let Some(st) = fig.strobe {
        let period = spec.forcing_period().expect("strobe figures are forced");
        let out = strobe_map(&spec, &st.ic, 0.0, period, st.periods as usize, st.skip as usize, integrator)?;
        let path = dir.join(format!("{}_strobe.csv", fig.id));
        export_points_csv(&out.points, spec.coord_names(), &path)?;
        written.push(path);
    }

    if let (Some(sec), Some(setup)) = (&section, fig.section) {
        if setup.classify {
            let cc = ldscope::hamsec::ClassifyConfig { integrator: integrator.clone(), ..Default::default() };
            let labels = classify_section_grid(&spec, sec, &grid, &cc)?;
            let path = dir.join(format!("{}_labels.csv", fig.id));
            export_classification_csv(&labels, &path)?;
            written.push(path);
        }
    }

    let rcfg = RenderConfig {
        source: Layer::Total,
        overlays: overlay_marks(fig, &spec, section.as_ref())?,
        ..RenderConfig::native(&field)
    };
    let path = dir.join(format!("{}.png", fig.id));
    render_png(&field, &rcfg, &path)?;
    written.push(path);

    let path = dir.join(format!("{}_params.json", fig.id));
    let manifest = Manifest {
        figure: fig,
        grid: &grid,
        ld: &field.meta.ld,
        integrator,
        ridge_percentile: REPRO_PERCENTILE,
        engine_version: ENGINE_VERSION,
        artifacts: written.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(ldscope::Error::from)?;
    fs::write(&path, text).map_err(|e| CliError::Run(ldscope::Error::Io { path: path.clone(), source: e }))?;
    written.push(path);
    Ok(written)
}
