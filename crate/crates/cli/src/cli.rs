//! Command-line flags. Every flag maps onto a [`RunConfig`] key and overrides
//! the value read from `--config`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ldscope::hamsec::Branch;
use ldscope::{Layer, Method, Operator, SectionId};

use crate::config::{parse_assignment, parse_list, Command, GridArg, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ldscope", version, about = "Lagrangian descriptor fields, ridge extraction and energy-shell sections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Descriptor field on a planar grid, written as a FieldFile.
    Field {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        ld: LdFlags,
        #[command(flatten)]
        integrator: IntegratorFlags,
        #[command(flatten)]
        extras: ExtraOutputs,
    },
    /// Ridge points of a stored field, written as CSV.
    Extract {
        #[command(flatten)]
        common: CommonArgs,
        /// FieldFile to read.
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long, value_parser = parse_layer)]
        layer: Option<Layer>,
        /// `gradient` or `laplacian`.
        #[arg(long, value_parser = parse_operator)]
        operator: Option<Operator>,
        #[arg(long)]
        percentile: Option<f64>,
        /// Thin ridges with non-maximum suppression.
        #[arg(long)]
        nms: bool,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Descriptor field seeded on a double-well energy-shell section.
    Section {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        section: SectionFlags,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        ld: LdFlags,
        #[command(flatten)]
        integrator: IntegratorFlags,
        #[command(flatten)]
        extras: ExtraOutputs,
    },
    /// Stroboscopic samples of a periodically forced trajectory, as CSV.
    Strobe {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        system: SystemArgs,
        /// Initial condition, comma separated.
        #[arg(long, value_parser = parse_reals, allow_hyphen_values = true)]
        ic: Option<Reals>,
        #[arg(long)]
        periods: Option<u64>,
        /// Leading periods left out of the output.
        #[arg(long)]
        skip: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[command(flatten)]
        integrator: IntegratorFlags,
    },
    /// Reactive / nonreactive labels for every allowed node of a section grid.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        section: SectionFlags,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        eps_settle: Option<f64>,
        #[command(flatten)]
        integrator: IntegratorFlags,
    },
    /// Regenerates the data behind a figure with its published parameters.
    Repro {
        #[command(flatten)]
        common: CommonArgs,
        /// Figure id; `--list` prints them all.
        figure: Option<String>,
        #[arg(long)]
        list: bool,
        /// Output directory (default `repro/<figure>`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Nodes along the vertical axis.
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        integrator: IntegratorFlags,
    },
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML file with RunConfig keys; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: LDSCOPE_WORKERS, else all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Primary output path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct SystemArgs {
    #[arg(long)]
    pub system: Option<String>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_assignment, allow_hyphen_values = true)]
    pub params: Vec<(String, f64)>,
}

#[derive(Debug, Default, Args)]
pub struct GridArgs {
    /// `"[lo,hi]x[lo,hi]@N"`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Coordinates on the two axes, e.g. `x,px`.
    #[arg(long)]
    pub axes: Option<String>,
    /// Value of an off-grid coordinate `name=value`; repeatable.
    #[arg(long = "fix", value_parser = parse_assignment, allow_hyphen_values = true)]
    pub fixed: Vec<(String, f64)>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct LdFlags {
    /// Descriptor exponent (default 0.5).
    #[arg(long)]
    pub p: Option<f64>,
    /// Forward and backward horizon.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tau_f: Option<f64>,
    #[arg(long)]
    pub tau_b: Option<f64>,
    #[arg(long)]
    pub escape_radius: Option<f64>,
    /// Derive tau_b from tau_f and the expansion rates.
    #[arg(long)]
    pub auto_balance: bool,
    /// Rates `lambda,mu` for --auto-balance.
    #[arg(long, value_parser = parse_reals)]
    pub balance_rates: Option<Reals>,
}

#[derive(Debug, Default, Args)]
pub struct SectionFlags {
    /// `sigma1`, `sigma2` or `sigma3`.
    #[arg(long = "section", value_parser = parse_section)]
    pub id: Option<SectionId>,
    #[arg(long, allow_hyphen_values = true)]
    pub h0: Option<f64>,
    /// Plane position for sigma3.
    #[arg(long, allow_hyphen_values = true)]
    pub x_value: Option<f64>,
    /// Sign of the solved momentum: `positive` or `negative`.
    #[arg(long, value_parser = parse_branch)]
    pub branch: Option<Branch>,
}

#[derive(Debug, Default, Args)]
pub struct IntegratorFlags {
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    /// `rk45` (adaptive) or `rk4` (fixed step).
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub fixed_step: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct ExtraOutputs {
    #[arg(long)]
    pub png: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Comma-separated reals taken as one flag value.
#[derive(Clone, Debug)]
pub struct Reals(pub Vec<f64>);

fn parse_reals(s: &str) -> Result<Reals, String> {
    parse_list(s).map(Reals)
}

fn parse_layer(s: &str) -> Result<Layer, String> {
    s.parse().map_err(|e: ldscope::Error| e.to_string())
}

fn parse_operator(s: &str) -> Result<Operator, String> {
    s.parse().map_err(|e: ldscope::Error| e.to_string())
}

fn parse_section(s: &str) -> Result<SectionId, String> {
    s.parse().map_err(|e: ldscope::Error| e.to_string())
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    match s {
        "positive" | "+" => Ok(Branch::Positive),
        "negative" | "-" => Ok(Branch::Negative),
        _ => Err(format!("unknown branch `{s}`")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "rk45" | "rk45_adaptive" => Ok(Method::Rk45Adaptive),
        "rk4" | "rk4_fixed" => Ok(Method::Rk4Fixed),
        _ => Err(format!("unknown method `{s}`")),
    }
}

/// What the flags of one invocation ask for.
#[derive(Debug, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub overrides: RunConfig,
    pub integrator: IntegratorFlags,
    pub list_figures: bool,
}

impl IntegratorFlags {
    pub fn is_empty(&self) -> bool {
        self.rtol.is_none()
            && self.atol.is_none()
            && self.max_step.is_none()
            && self.method.is_none()
            && self.fixed_step.is_none()
    }

    pub fn apply(&self, cfg: &mut ldscope::IntegratorConfig) {
        if let Some(v) = self.rtol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.atol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.max_step {
            cfg.max_step = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.fixed_step {
            cfg.fixed_step = v;
        }
    }
}

impl Cli {
    pub fn into_invocation(self) -> Result<Invocation, CliError> {
        let mut o = RunConfig::default();
        let (common, integrator, list) = match self.command {
            Cmd::Field { common, system, grid, ld, integrator, extras } => {
                o.command = Some(Command::Field);
                system.fill(&mut o);
                grid.fill(&mut o)?;
                ld.fill(&mut o)?;
                extras.fill(&mut o);
                (common, integrator, false)
            }
            Cmd::Extract { common, input, layer, operator, percentile, nms, png } => {
                o.command = Some(Command::Extract);
                o.extract.input = input;
                o.extract.layer = layer;
                o.extract.operator = operator;
                o.extract.percentile = percentile;
                o.extract.nms = nms;
                o.output.png = png;
                (common, IntegratorFlags::default(), false)
            }
            Cmd::Section { common, system, section, grid, ld, integrator, extras } => {
                o.command = Some(Command::Section);
                system.fill(&mut o);
                section.fill(&mut o);
                grid.fill(&mut o)?;
                ld.fill(&mut o)?;
                extras.fill(&mut o);
                (common, integrator, false)
            }
            Cmd::Strobe { common, system, ic, periods, skip, t0, integrator } => {
                o.command = Some(Command::Strobe);
                system.fill(&mut o);
                o.strobe.ic = ic.map(|r| r.0);
                o.strobe.periods = periods;
                o.strobe.skip = skip;
                o.t0 = t0;
                (common, integrator, false)
            }
            Cmd::Classify { common, system, section, grid, t_max, eps_settle, integrator } => {
                o.command = Some(Command::Classify);
                system.fill(&mut o);
                section.fill(&mut o);
                grid.fill(&mut o)?;
                o.classify.t_max = t_max;
                o.classify.eps_settle = eps_settle;
                (common, integrator, false)
            }
            Cmd::Repro { common, figure, list, out_dir, resolution, integrator } => {
                o.command = Some(Command::Repro);
                o.figure = figure;
                o.output.dir = out_dir;
                o.resolution = resolution;
                (common, integrator, list)
            }
        };
        o.workers = common.workers;
        o.output.path = common.output;
        Ok(Invocation { config: common.config, overrides: o, integrator, list_figures: list })
    }
}

impl SystemArgs {
    fn fill(self, o: &mut RunConfig) {
        o.system = self.system;
        o.params.extend(self.params);
    }
}

impl GridArgs {
    fn fill(self, o: &mut RunConfig) -> Result<(), CliError> {
        o.grid = self.grid.map(GridArg::Text);
        if let Some(axes) = self.axes {
            let names: Vec<&str> = axes.split(',').map(str::trim).collect();
            let [a, b] = names[..] else {
                return Err(CliError::Config(format!("--axes needs two names, got `{axes}`")));
            };
            o.axes = Some([a.to_string(), b.to_string()]);
        }
        o.fixed.extend(self.fixed);
        o.t0 = self.t0;
        Ok(())
    }
}

impl LdFlags {
    fn fill(self, o: &mut RunConfig) -> Result<(), CliError> {
        o.ld.p = self.p;
        o.ld.tau = self.tau;
        o.ld.tau_f = self.tau_f;
        o.ld.tau_b = self.tau_b;
        o.ld.escape_radius = self.escape_radius;
        o.ld.auto_balance = self.auto_balance;
        if let Some(r) = self.balance_rates {
            let [l, m] = r.0[..] else {
                return Err(CliError::Config("--balance-rates needs two values".into()));
            };
            o.ld.balance_rates = Some([l, m]);
        }
        Ok(())
    }
}

impl SectionFlags {
    fn fill(self, o: &mut RunConfig) {
        o.section.id = self.id;
        o.section.h0 = self.h0;
        o.section.x_value = self.x_value;
        o.section.branch = self.branch;
    }
}

impl ExtraOutputs {
    fn fill(self, o: &mut RunConfig) {
        o.output.png = self.png;
        o.output.csv = self.csv;
    }
}
