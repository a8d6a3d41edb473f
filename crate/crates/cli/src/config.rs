//! Run configuration shared by the config file and the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ldscope::hamsec::{Branch, ClassifyConfig};
use ldscope::{Error as CoreError, IntegratorConfig, Layer, Operator, SectionId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_RESOLUTION: usize = 501;
pub const WORKERS_ENV: &str = "LDSCOPE_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Field,
    Extract,
    Section,
    Strobe,
    Classify,
    Repro,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Field => "field",
            Command::Extract => "extract",
            Command::Section => "section",
            Command::Strobe => "strobe",
            Command::Classify => "classify",
            Command::Repro => "repro",
        }
    }
}

/// Grid ranges and resolution, either as `"[lo,hi]x[lo,hi]@N"` or as a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridArg {
    Text(String),
    Table(GridTable),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTable {
    pub x: [f64; 2],
    pub y: [f64; 2],
    #[serde(default)]
    pub resolution: Option<Resolution>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Square(usize),
    Rect([usize; 2]),
}

impl Resolution {
    pub fn pair(self) -> [usize; 2] {
        match self {
            Resolution::Square(n) => [n, n],
            Resolution::Rect(r) => r,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRanges {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub resolution: [usize; 2],
}

impl GridArg {
    pub fn ranges(&self) -> Result<GridRanges, String> {
        match self {
            GridArg::Text(s) => parse_grid(s),
            GridArg::Table(t) => Ok(GridRanges {
                x: t.x,
                y: t.y,
                resolution: t.resolution.map_or([DEFAULT_RESOLUTION; 2], Resolution::pair),
            }),
        }
    }
}

/// Parses `"[lo,hi]x[lo,hi]"` with an optional `"@N"` or `"@NxM"` suffix.
pub fn parse_grid(text: &str) -> Result<GridRanges, String> {
    let bad = || format!("grid `{text}` is not of the form [lo,hi]x[lo,hi]@N");
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (ranges, res) = match compact.split_once('@') {
        Some((r, n)) => (r, Some(n)),
        None => (compact.as_str(), None),
    };
    let interval = |s: &str| -> Result<[f64; 2], String> {
        let inner = s.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        Ok([lo, hi])
    };
    let (xs, ys) = ranges.split_once("]x[").ok_or_else(bad)?;
    let x = interval(&format!("{xs}]"))?;
    let y = interval(&format!("[{ys}"))?;
    let resolution = match res {
        None => [DEFAULT_RESOLUTION; 2],
        Some(n) => match n.split_once('x') {
            Some((a, b)) => [a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?],
            None => {
                let n: usize = n.parse().map_err(|_| bad())?;
                [n, n]
            }
        },
    };
    Ok(GridRanges { x, y, resolution })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdArgs {
    pub p: Option<f64>,
    /// Sets both horizons unless `tau_f` / `tau_b` are given.
    pub tau: Option<f64>,
    pub tau_f: Option<f64>,
    pub tau_b: Option<f64>,
    pub escape_radius: Option<f64>,
    pub auto_balance: bool,
    pub balance_rates: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionArgs {
    pub id: Option<SectionId>,
    pub h0: Option<f64>,
    pub x_value: Option<f64>,
    pub branch: Option<Branch>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractArgs {
    pub input: Option<PathBuf>,
    pub layer: Option<Layer>,
    pub operator: Option<Operator>,
    pub percentile: Option<f64>,
    pub nms: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrobeArgs {
    pub ic: Option<Vec<f64>>,
    pub periods: Option<u64>,
    pub skip: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyArgs {
    pub t_max: Option<f64>,
    pub eps_settle: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputArgs {
    /// Primary artifact (FieldFile or CSV depending on the command).
    pub path: Option<PathBuf>,
    pub png: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Directory for `repro` artifacts.
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub system: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub grid: Option<GridArg>,
    /// Coordinates plotted on the two grid axes (defaults to the first two).
    pub axes: Option<[String; 2]>,
    /// Values of the coordinates not on the grid.
    pub fixed: BTreeMap<String, f64>,
    pub t0: Option<f64>,
    pub ld: LdArgs,
    pub integrator: Option<IntegratorConfig>,
    pub section: SectionArgs,
    pub extract: ExtractArgs,
    pub strobe: StrobeArgs,
    pub classify: ClassifyArgs,
    pub output: OutputArgs,
    pub workers: Option<usize>,
    pub figure: Option<String>,
    /// Overrides the grid resolution of a `repro` figure.
    pub resolution: Option<usize>,
}

/// Where a configuration value came from, for error messages.
#[derive(Clone, Debug, Default)]
pub struct Origin {
    pub path: Option<PathBuf>,
    pub text: Option<String>,
}

impl Origin {
    /// Line (1-based) of the first assignment to `key` in the config file.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        let text = self.text.as_ref()?;
        let mut table = String::new();
        let (section, leaf) = match key.rsplit_once('.') {
            Some((s, l)) => (Some(s), l),
            None => (None, key),
        };
        for (n, line) in text.lines().enumerate() {
            let t = line.trim();
            if let Some(name) = t.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                table = name.trim().to_string();
                continue;
            }
            let Some((lhs, _)) = t.split_once('=') else { continue };
            let lhs = lhs.trim();
            let matches = match section {
                Some(s) => (table == s && lhs == leaf) || (table.is_empty() && lhs == key),
                None => table.is_empty() && lhs == leaf,
            };
            if matches {
                return Some(n + 1);
            }
        }
        None
    }

    /// Prefixes `msg` with `file:line` when `key` was set in the file.
    pub fn locate(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        match (&self.path, self.line_of(key)) {
            (Some(path), Some(line)) => CliError::Config(format!("{}:{line}: {msg}", path.display())),
            _ => CliError::Config(msg.to_string()),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<(RunConfig, Origin), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = RunConfig::from_toml(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let msg = e.message().trim().to_string();
            match line {
                Some(line) => CliError::Config(format!("{}:{line}: {msg}", path.display())),
                None => CliError::Config(format!("{}: {msg}", path.display())),
            }
        })?;
        Ok((cfg, Origin { path: Some(path.to_path_buf()), text: Some(text) }))
    }

    /// Fills every field that `over` sets.
    pub fn apply(&mut self, over: RunConfig) {
        macro_rules! take {
            ($($f:ident).+) => {
                if over.$($f).+.is_some() {
                    self.$($f).+ = over.$($f).+;
                }
            };
        }
        take!(command);
        take!(system);
        self.params.extend(over.params);
        take!(grid);
        take!(axes);
        self.fixed.extend(over.fixed);
        take!(t0);
        take!(ld.p);
        take!(ld.tau);
        take!(ld.tau_f);
        take!(ld.tau_b);
        take!(ld.escape_radius);
        self.ld.auto_balance |= over.ld.auto_balance;
        take!(ld.balance_rates);
        take!(integrator);
        take!(section.id);
        take!(section.h0);
        take!(section.x_value);
        take!(section.branch);
        take!(extract.input);
        take!(extract.layer);
        take!(extract.operator);
        take!(extract.percentile);
        self.extract.nms |= over.extract.nms;
        take!(strobe.ic);
        take!(strobe.periods);
        take!(strobe.skip);
        take!(classify.t_max);
        take!(classify.eps_settle);
        take!(output.path);
        take!(output.png);
        take!(output.csv);
        take!(output.dir);
        take!(workers);
        take!(figure);
        take!(resolution);
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        self.integrator.clone().unwrap_or_default()
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        let d = ClassifyConfig::default();
        ClassifyConfig {
            t_max: self.classify.t_max.unwrap_or(d.t_max),
            eps_settle: self.classify.eps_settle.unwrap_or(d.eps_settle),
            integrator: self.integrator_config(),
        }
    }

    /// Worker count: config or flag, then the environment, then all cores.
    pub fn resolved_workers(&self) -> Result<usize, CliError> {
        if let Some(n) = self.workers {
            return if n == 0 { Err(CliError::Config("workers must be at least 1".into())) } else { Ok(n) };
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match usize::from_str(v.trim()) {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

/// Parses `name=value`.
pub fn parse_assignment(text: &str) -> Result<(String, f64), String> {
    let (k, v) = text.split_once('=').ok_or_else(|| format!("expected name=value, got `{text}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{}` is not a number", v.trim()))?;
    Ok((k.trim().to_string(), v))
}

/// Parses a comma-separated list of reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", s.trim())))
        .collect()
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(msg) => CliError::Config(msg),
            CoreError::UnknownSystem(_)
            | CoreError::MissingParameter { .. }
            | CoreError::UnknownParameter { .. }
            | CoreError::NonFiniteParameter { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::Unsupported(_)
            | CoreError::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other),
        }
    }
}
