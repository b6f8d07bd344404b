//! Command-line front end.
//!
//! Every subcommand produces a [`Table`] that is written as CSV or JSON with
//! the resolved configuration echoed in the header, so identical invocations
//! give identical bytes.

mod commands;
pub mod table;
pub mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
pub use table::{Format, Table};

#[derive(Debug, Parser, Serialize)]
#[command(name = "multidicke", version, about = "Multichannel Dicke superradiance: exact dynamics, steady states and cross-checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub out: Format,

    /// Output file (a directory for `verify`); standard output if omitted.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,

    /// Fixed working precision for closed-form arithmetic (default: automatic).
    #[arg(long, global = true)]
    pub precision_bits: Option<u32>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Closed-form populations and intensities on a time grid.
    Dynamics(DynamicsArgs),
    /// Steady-state distribution, or an (r, n̄₂, χ) sweep.
    Steady(SteadyArgs),
    /// Peak intensity and delay versus the number of balanced channels.
    Scaling(ScalingArgs),
    /// Monte Carlo trajectory batch.
    Mc(McArgs),
    /// Mean-field stopping time and asymptotics against exact values.
    Meanfield(MeanfieldArgs),
    /// Full cavity model against the effective Dicke cascade.
    CavityCheck(CavityArgs),
    /// Run the cross-validation suite and print a pass/fail matrix.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Lin,
    Log,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// First time point (log grids need t-min > 0; default scales with the system).
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Last time point (default scales with the system).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, value_enum, default_value = "lin")]
    pub grid: Spacing,
}

#[derive(Debug, Args, Serialize)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub n: u32,
    /// Comma-separated channel rates, e.g. `0.5,0.5` or `1,2/3`.
    #[arg(long)]
    pub rates: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Emit every lattice state instead of level totals.
    #[arg(long)]
    pub states: bool,
    /// Add the total intensity as an exponential-sum JSON document to the header.
    #[arg(long)]
    pub closed_form: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SteadyArgs {
    #[arg(long)]
    pub n: u32,
    /// Two-channel ratio r = Γ₂/Γ₁.
    #[arg(long, conflicts_with = "rates")]
    pub ratio: Option<String>,
    /// General channel rates (steady state from the closed-form table).
    #[arg(long)]
    pub rates: Option<String>,
    /// Sweep r over [r-min, r-max] instead of printing one distribution.
    #[arg(long, requires = "r_max")]
    pub r_min: Option<String>,
    #[arg(long, requires = "r_min")]
    pub r_max: Option<String>,
    #[arg(long, default_value_t = 21)]
    pub r_points: u32,
    /// Relative central-difference step for χ.
    #[arg(long, default_value_t = crate::steady_state::DEFAULT_SUSCEPTIBILITY_STEP)]
    pub chi_step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 150)]
    pub n: u32,
    /// Channel counts.
    #[arg(long, default_value = "1,2,4,8")]
    pub d: String,
    /// Total rate Γ shared equally by the channels.
    #[arg(long, default_value = "1")]
    pub total_rate: String,
}

#[derive(Debug, Args, Serialize)]
pub struct McArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub rates: String,
    #[arg(long, default_value_t = 1000)]
    pub trajectories: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of time bins.
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "log")]
    pub bin_spacing: Spacing,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct MeanfieldArgs {
    /// Emitter counts.
    #[arg(long, default_value = "100,1000")]
    pub n: String,
    /// Ratios r = Γ₂/Γ₁.
    #[arg(long, default_value = "1/2,1,2")]
    pub ratio: String,
    /// Print exact and asymptotic distributions (single N and r) instead.
    #[arg(long)]
    pub distribution: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CavityArgs {
    #[arg(long, default_value_t = 5)]
    pub n: u32,
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long, default_value_t = 10)]
    pub cutoff: u32,
    /// Values of κ/g to compare.
    #[arg(long, default_value = "1,3,10,30,100")]
    pub ratios: String,
    /// Comparison window in units of 1/Γ_eff.
    #[arg(long, default_value_t = crate::cavity::DEFAULT_HORIZON)]
    pub horizon: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Small instances only (N ≤ 10).
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
}

/// Parses a comma-separated list.
pub(crate) fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::validation(format!("cannot parse {what} entry {s:?}")))
        })
        .collect()
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config = serde_json::to_value(cli)?;
    if let Command::Verify(args) = &cli.command {
        let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("verify-out"));
        let report = verify::run_suite(args.quick, args.seed, cli.precision_bits)?;
        report.write(&dir, cli.out, &config)?;
        let mut stdout = io::stdout().lock();
        report.print_matrix(&mut stdout)?;
        return if report.all_passed() {
            Ok(())
        } else {
            Err(Error::VerificationFailed {
                failures: report.failures(),
            })
        };
    }
    let table = match &cli.command {
        Command::Dynamics(a) => commands::dynamics(a, cli.precision_bits)?,
        Command::Steady(a) => commands::steady(a, cli.precision_bits)?,
        Command::Scaling(a) => commands::scaling(a, cli.precision_bits)?,
        Command::Mc(a) => commands::mc(a)?,
        Command::Meanfield(a) => commands::meanfield(a)?,
        Command::CavityCheck(a) => commands::cavity_check(a)?,
        Command::Verify(_) => unreachable!(),
    };
    let mut out = open_output(&cli.output)?;
    table.write(&mut out, cli.out, &config)?;
    out.flush()?;
    Ok(())
}
