//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{self, simulation_derived};
use crate::error::{CliError, CliResult};
use crate::output::{destination, emit, json_bytes, metadata, Table};
use crate::spec::{
    linear_grid, parse_angle, CoinState, ExperimentSpec, OutputFormat, SweepAxis, SweepQuantity,
    SweepSpec, WalkKind,
};
use crate::verify::{self, Level};

#[derive(Debug, Parser)]
#[command(name = "ringwalk", version, about = "Coined quantum walks on a ring with an absorbing sink")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Survival probability and absorbed flux per step.
    Simulate(CommonArgs),
    /// One derived quantity over a grid of one parameter.
    Sweep(SweepArgs),
    /// Transport efficiency by every applicable method (lazy walk).
    Efficiency(CommonArgs),
    /// Spectrum of πU, norm-growth estimate and, for percolation, the channel.
    Spectral(CommonArgs),
    /// Realization-averaged survival on the percolated ring.
    Percolate(CommonArgs),
    /// Invariant checks of all modules.
    Verify(VerifyArgs),
}

/// Flags shared by all experiment commands. Unset flags take per-walk defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub walk: Option<WalkKind>,
    /// Half ring size; the ring has 2N vertices.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Coin phase, e.g. `3.1`, `pi` or `0.94pi`.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Edge presence probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// `sigma+`, `sigma1-`, `sigma2-`, `L`, `S`, `R` or `re,im;re,im[;re,im]`.
    #[arg(long, allow_hyphen_values = true)]
    pub coin_state: Option<CoinState>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; defaults to `$RINGWALK_OUT_DIR/<command>.<ext>`, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

impl CommonArgs {
    pub fn to_spec(&self, default_walk: WalkKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(self.walk.unwrap_or(default_walk));
        if let Some(v) = self.n {
            s.n = v;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.alpha {
            s.alpha = v;
        }
        if let Some(v) = self.p {
            s.p = v;
        }
        if let Some(v) = &self.coin_state {
            s.coin_state = v.clone();
        }
        if let Some(v) = self.steps {
            s.steps = v;
        }
        if let Some(v) = self.realizations {
            s.realizations = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.out = self.out.clone();
        if let Some(v) = self.format {
            s.format = v;
        }
        s
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    #[arg(long, value_enum)]
    pub quantity: SweepQuantity,
    /// Explicit comma-separated grid; overrides --from/--to/--step.
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub grid: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_angle)]
    pub from: Option<f64>,
    #[arg(long, value_parser = parse_angle)]
    pub to: Option<f64>,
    #[arg(long, value_parser = parse_angle)]
    pub step: Option<f64>,
}

impl SweepArgs {
    pub fn to_spec(&self) -> CliResult<SweepSpec> {
        let grid = match (&self.grid, self.from, self.to, self.step) {
            (Some(g), ..) => g.clone(),
            (None, Some(a), Some(b), Some(h)) => linear_grid(a, b, h)?,
            _ => return Err(CliError::invalid("sweep needs --grid or all of --from, --to, --step")),
        };
        Ok(SweepSpec {
            base: self.common.to_spec(WalkKind::TwoState),
            axis: self.axis,
            grid,
            quantity: self.quantity,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub level: Level,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn payload(format: OutputFormat, table: &Table, report: &serde_json::Value) -> CliResult<Vec<u8>> {
    match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => json_bytes(report),
    }
}

fn finish(
    command: &str,
    spec: &ExperimentSpec,
    table: &Table,
    report: serde_json::Value,
    derived: serde_json::Value,
) -> CliResult<()> {
    let dest = destination(spec.out.as_deref(), command, spec.format);
    let meta = metadata(command, spec, derived)?;
    emit(&dest, &payload(spec.format, table, &report)?, &meta)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => {
            let spec = args.to_spec(WalkKind::TwoState);
            let sim = commands::simulate(&spec)?;
            let table = commands::survival_table(&sim.series, sim.std_error.as_deref());
            let derived = simulation_derived(&sim);
            finish("simulate", &spec, &table, json!({ "spec": spec, "result": sim }), derived)
        }
        Command::Sweep(args) => {
            let sweep = args.to_spec()?;
            let result = commands::sweep(&sweep)?;
            let table = commands::sweep_table(&sweep, &result);
            let at = |i: Option<usize>| i.map(|i| sweep.grid[i]);
            let derived = json!({
                "axis": sweep.axis,
                "quantity": sweep.quantity,
                "grid": sweep.grid,
                "argmax": at(result.argmax),
                "argmin": at(result.argmin),
                "tie_rule": "first grid index within relative 1e-9",
                "log_log_slope": result.log_log_slope,
                "failed_points": result.rows.iter().filter(|r| r.error.is_some()).count(),
            });
            let dest = destination(sweep.base.out.as_deref(), "sweep", sweep.base.format);
            let meta = metadata("sweep", &sweep, derived.clone())?;
            let report = json!({ "sweep": sweep, "rows": result.rows, "summary": derived });
            emit(&dest, &payload(sweep.base.format, &table, &report)?, &meta)
        }
        Command::Efficiency(args) => {
            let mut spec = args.to_spec(WalkKind::Lazy);
            if args.format.is_none() {
                spec.format = OutputFormat::Json;
            }
            let s = commands::efficiency(&spec)?;
            let derived = json!({
                "eta_exact": s.exact.eta,
                "eta_closed_form": s.closed_form,
                "eta_line_estimate": s.line_estimate,
            });
            finish("efficiency", &spec, &commands::efficiency_table(&s), json!({ "spec": spec, "result": s }), derived)
        }
        Command::Spectral(args) => {
            let spec = args.to_spec(WalkKind::TwoState);
            let s = commands::spectral(&spec)?;
            let derived = json!({
                "leading_modulus": s.dense.leading_modulus,
                "sub_leading_modulus": s.dense.sub_leading_modulus,
                "unimodular_count": s.unimodular_count,
                "eigenvalue_one_count": s.eigenvalue_one_count,
                "predicted_gamma": s.predicted_gamma,
                "norm_growth": s.norm_growth,
                "channel_gamma": s.channel_gamma,
            });
            finish("spectral", &spec, &commands::spectral_table(&s), json!({ "spec": spec, "result": s }), derived)
        }
        Command::Percolate(args) => {
            let spec = args.to_spec(WalkKind::Percolated);
            let s = commands::percolate(&spec)?;
            let table = commands::percolation_table(&s);
            let mut derived = simulation_derived(&s.simulation);
            derived["channel_gamma"] = json!(s.channel_gamma);
            finish("percolate", &spec, &table, json!({ "spec": spec, "result": s }), derived)
        }
        Command::Verify(args) => {
            let report = verify::run(args.level);
            let bytes = json_bytes(&serde_json::to_value(&report)?)?;
            let dest = destination(args.out.as_deref(), "verify", OutputFormat::Json);
            let meta = metadata("verify", &json!({ "level": args.level }), json!({ "all_passed": report.all_passed }))?;
            emit(&dest, &bytes, &meta)?;
            if report.all_passed {
                Ok(())
            } else {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                Err(CliError::VerificationFailed(failed.join(", ")))
            }
        }
    }
}
