#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exact_fpt::harness::CostUnit;
use exact_fpt::sampler::DEFAULT_MAX_ITERATIONS;

/// Exact first-passage time sampling for dX = b(X) dt + dB.
#[derive(Parser, Debug)]
#[command(name = "exact-fpt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples and write `index,value,iterations,total_points`.
    Sample(Common),
    /// Check a configuration against closed forms or an Euler-Maruyama oracle.
    Validate(ValidateArgs),
    /// Report iteration counts and sampling cost against their theoretical values.
    Bench(Common),
    /// Sweep the number of space slices and write `k,mean_total_points,stderr`.
    SplitScan(Common),
    /// Compare the cost of a1 and a2 on shared Poisson points.
    Compare(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Drift spec: constant:mu=M | sine[:offset=C] | arctan-shift[:base=B,shift=S] | neg-arctan | ou:alpha=A,beta=B
    #[arg(long)]
    pub model: String,
    /// Starting point.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
    /// Level to reach, L > x.
    #[arg(long, allow_negative_numbers = true)]
    pub level: f64,
    /// a1 | a2 | a1-shift | a2-shift | a3
    #[arg(long, default_value = "a1")]
    pub variant: String,
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// First stream id; draw i uses stream `streams + i`.
    #[arg(long, default_value_t = 0)]
    pub streams: u64,
    /// Worker threads, each given a fixed contiguous block of draws.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Upper bound on gamma (defaults exist for catalog drifts).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Lower bound on gamma used by the shift variants.
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// gamma >= -m, for a3.
    #[arg(long)]
    pub m: Option<f64>,
    /// Conditioning horizon for a3.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Truncate the drift below -rho.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Space slices: an integer or `opt`; a range `a..b` for split-scan.
    #[arg(long)]
    pub k: Option<String>,
    /// Also write a histogram with this many bins.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Cost unit for bench, split-scan and compare: variates | points.
    #[arg(long, default_value = "variates")]
    pub cost: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: u64,
}

impl Common {
    pub fn cost_unit(&self) -> Result<CostUnit, CliError> {
        self.cost
            .parse()
            .map_err(|e: exact_fpt::Error| CliError::Usage(e.to_string()))
    }
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Euler-Maruyama step of the reference oracle.
    #[arg(long, default_value_t = 1e-4)]
    pub em_step: f64,
    /// Euler-Maruyama paths of the reference oracle.
    #[arg(long, default_value_t = 100_000)]
    pub em_paths: u64,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
    Budget(String),
}

impl From<exact_fpt::Error> for CliError {
    fn from(e: exact_fpt::Error) -> Self {
        use exact_fpt::Error as E;
        match e {
            E::Config(_) | E::Parameter(_) | E::Contract(_) => CliError::Usage(e.to_string()),
            E::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sample(c) => commands::sample(c),
        Command::Validate(v) => commands::validate(v),
        Command::Bench(c) => commands::bench(c),
        Command::SplitScan(c) => commands::split_scan(c),
        Command::Compare(c) => commands::compare(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
