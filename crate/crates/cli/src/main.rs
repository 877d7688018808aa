//! `pmm`: fit, dispatch, bootstrap, simulate and benchmark PMM estimators
//! from the command line.

mod commands;
mod error;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmm_core::dispatch::DispatchConfig;
use pmm_core::mcbench::{InnovationSpec, McMethod};

use error::{CliError, CliResult};
use input::{parse_family, parse_quad, parse_triple};

#[derive(Parser)]
#[command(name = "pmm", version, about = "Polynomial maximization estimators for regression and ARIMA models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a regression (with --design) or a time-series model and write a JSON report.
    Fit(FitArgs),
    /// Print the method-selection transcript for a residual or data column.
    Dispatch(DispatchArgs),
    /// Residual (regression) or block (time series) bootstrap.
    Bootstrap(BootstrapArgs),
    /// Simulate a (seasonal) ARIMA series as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of estimators, summary CSV.
    Mc(McArgs),
    /// PMM2 advantage grid over skewness and sample size, long CSV.
    Grid(GridArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ols,
    Css,
    Pmm2,
    Pmm3,
    Auto,
}

#[derive(Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response or series column.
    #[arg(long)]
    pub column: String,
    /// Regressor columns; an intercept is always added.
    #[arg(long, value_delimiter = ',')]
    pub design: Option<Vec<String>>,
}

#[derive(Args)]
pub struct ModelArgs {
    /// Non-seasonal order `p,d,q`; omitted means AR order chosen by AIC.
    #[arg(long, value_parser = parse_triple)]
    pub order: Option<[usize; 3]>,
    /// Seasonal order `P,D,Q,s`.
    #[arg(long, value_parser = parse_quad)]
    pub seasonal: Option<[usize; 4]>,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    /// Forecast horizon (time series only).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Accepted for a uniform interface; fitting draws no random numbers.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args)]
pub struct DispatchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Treat the column as a series and dispatch on CSS residuals.
    #[arg(long)]
    pub fit_series: bool,
    #[arg(long, default_value_t = DispatchConfig::default().skew_threshold)]
    pub skew_threshold: f64,
    #[arg(long, default_value_t = DispatchConfig::default().g2_ceiling)]
    pub g2_ceiling: f64,
    #[arg(long, default_value_t = DispatchConfig::default().symmetric_threshold)]
    pub symmetric_threshold: f64,
    /// JSON report path; the transcript always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    /// Number of bootstrap replicates.
    #[arg(long = "B", default_value_t = 500)]
    pub b: usize,
    /// Block length for time series; defaults to the cube root of n.
    #[arg(long)]
    pub block_length: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ar: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sar: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean: f64,
    /// CSV of innovations to drive the recursion.
    #[arg(long)]
    pub innovations: Option<PathBuf>,
    #[arg(long, default_value = "e")]
    pub innovation_column: String,
    /// Innovation family such as `gamma:2,1` or `uniform:-1,1`; Gaussian by default.
    #[arg(long, value_parser = parse_family, allow_hyphen_values = true)]
    pub family: Option<InnovationSpec>,
    /// Series length when drawing innovations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Discarded leading values: 0 for --innovations files, 100 otherwise.
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Header of the output column.
    #[arg(long, default_value = "y")]
    pub name: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct McArgs {
    /// JSON array of specifications; a built-in regression benchmark when omitted.
    #[arg(long)]
    pub specs: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "pmm2,pmm3")]
    pub methods: Vec<McMethod>,
    #[arg(long, default_value_t = 500)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.4,0.8,1.2,1.6,2.0")]
    pub grid_gamma3: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,500")]
    pub grid_n: Vec<usize>,
    /// Replications per cell.
    #[arg(long, default_value_t = 200)]
    pub n_sim: usize,
    /// Model order of the template; ARIMA(1,1,0) by default.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Packed true coefficients of the template.
    #[arg(long, value_delimiter = ',', default_value = "0.7", allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn set_jobs(jobs: Option<usize>) -> CliResult<()> {
    let Some(k) = jobs else { return Ok(()) };
    if k == 0 {
        return Err(CliError::Args("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Args(format!("cannot start {k} worker threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Dispatch(a) => commands::dispatch(&a),
        Command::Bootstrap(a) => commands::bootstrap(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Mc(a) => {
            set_jobs(a.jobs)?;
            commands::mc(&a)
        }
        Command::Grid(a) => {
            set_jobs(a.jobs)?;
            commands::grid(&a)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
