//! `pvmpi`: synthetic data, marginal and copula fitting, scenarios, MPIs,
//! scores, the comparison report and SVG figures.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use pvmpi::config::CopulaChoice;
use pvmpi::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "pvmpi",
    version,
    about = "Copula scenarios and multivariate prediction intervals for PV power"
)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Dependence model(s) to use (overrides the config).
    #[arg(long, global = true, value_enum)]
    copula: Option<CopulaArg>,

    /// Directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CopulaArg {
    Gaussian,
    Rvine,
    Both,
}

impl From<CopulaArg> for CopulaChoice {
    fn from(c: CopulaArg) -> Self {
        match c {
            CopulaArg::Gaussian => CopulaChoice::Gaussian,
            CopulaArg::Rvine => CopulaChoice::Rvine,
            CopulaArg::Both => CopulaChoice::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit per-hour quantile regressions on the training days.
    FitMarginals,
    /// Fit the copula(s) on the training PITs.
    FitCopula,
    /// Draw scenarios for every evaluation day.
    Sample,
    /// Build nested multivariate prediction intervals from the scenarios.
    Mpi,
    /// Energy/variogram scores, MPI calibration and fit statistics.
    Score,
    /// Generate a synthetic dataset from a known copula truth.
    Synth,
    /// Run the whole pipeline and write the comparison report.
    Report,
    /// Render SVG figures from earlier outputs.
    Plot(PlotArgs),
}

#[derive(Debug, clap::Args)]
pub struct PlotArgs {
    /// Figures to draw; all of them when omitted.
    #[arg(long = "kind", value_enum)]
    pub kinds: Vec<PlotKind>,

    /// Evaluation day to draw (default: the first one).
    #[arg(long)]
    pub day: Option<NaiveDate>,

    /// Two 1-based hour indices for the bivariate box figure.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub hours: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Univariate prediction intervals with the observed day.
    Fan,
    /// Scenario trajectories.
    Scenarios,
    /// MPI bands across the hours.
    Mpi,
    /// Nested boxes at two hours with the observation.
    Boxes,
    /// Empirical against nominal MPI coverage.
    Reliability,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::Fan,
        PlotKind::Scenarios,
        PlotKind::Mpi,
        PlotKind::Boxes,
        PlotKind::Reliability,
    ];
}

/// Failures, split by exit status.
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Usage(String),
    /// Anything failing while running (exit 1).
    Failed(String),
}

impl From<pvmpi::Error> for CliError {
    fn from(e: pvmpi::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(c) = cli.copula {
        cfg.copula = c.into();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    let ctx = commands::Context::new(cfg, cli.out);
    match cli.command {
        Command::FitMarginals => ctx.fit_marginals(),
        Command::FitCopula => ctx.fit_copula(),
        Command::Sample => ctx.sample(),
        Command::Mpi => ctx.mpi(),
        Command::Score => ctx.score(),
        Command::Synth => ctx.synth(),
        Command::Report => ctx.report(),
        Command::Plot(args) => ctx.plot(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    // clap exits with status 2 on unknown subcommands and bad flags.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try 'pvmpi --help'.");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
