//! Command-line front end: synthetic data generation, calibration, analysis,
//! Monte Carlo oracle runs and a summary report.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{OracleKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<vstoxx_core::Error> for CliError {
    fn from(e: vstoxx_core::Error) -> Self {
        use vstoxx_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Invalid(_) | E::Domain(_) => CliError::Validation(msg),
            E::Io { .. }
            | E::Parse { .. }
            | E::DuplicateKey { .. }
            | E::NoExpiry { .. }
            | E::EmptySlice { .. }
            | E::MissingCalibration(_)
            | E::InsufficientData(_)
            | E::ConstantColumn(_) => CliError::Data(msg),
            E::Integration { .. }
            | E::NoSolution(_)
            | E::NonFinite(_)
            | E::NonConvergence { .. }
            | E::UndefinedShrinkage
            | E::AtStrike { .. } => CliError::Numerical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vstoxx", version, about = "VSTOXX futures pricing, calibration and inventory analysis")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic market bundle (options, index, futures, flows).
    Gen(GenArgs),
    /// Calibrate the model day by day and price the front-month future.
    Calibrate(CalibrateArgs),
    /// Correlations, Lasso path, cross-validation, forest and importance.
    Analyze(AnalyzeArgs),
    /// Monte Carlo oracle for the futures or call price.
    Oracle(OracleArgs),
    /// Summarize the outputs found in the output directory.
    Report,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub effect_strength: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Directory with the input CSVs.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["W_SIGMA", "W_IDX"])]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub de_population: Option<usize>,
    #[arg(long)]
    pub de_generations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub alphas: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub kind: Option<OracleKind>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub antithetic: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub tau_days: Option<f64>,
    #[arg(long)]
    pub forward: Option<f64>,
    #[arg(long)]
    pub strike: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    /// File values (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut c.seed, self.seed);
        set(&mut c.out_dir, self.out.clone());
        set(&mut c.threads, self.threads);
        match &self.command {
            Command::Gen(a) => {
                set(&mut c.days, a.days);
                set(&mut c.effect_strength, a.effect_strength);
                set(&mut c.noise_scale, a.noise_scale);
            }
            Command::Calibrate(a) => {
                set(&mut c.data_dir, a.data.clone());
                if let Some(w) = &a.weights {
                    c.w_sigma = w[0];
                    c.w_idx = w[1];
                }
                set(&mut c.de_population, a.de_population);
                set(&mut c.de_generations, a.de_generations);
            }
            Command::Analyze(a) => {
                set(&mut c.data_dir, a.data.clone());
                if a.calibration.is_some() {
                    c.calibration_file = a.calibration.clone();
                }
                set(&mut c.test_fraction, a.test_fraction);
                set(&mut c.folds, a.folds);
                set(&mut c.n_alphas, a.alphas);
                set(&mut c.n_trees, a.trees);
                set(&mut c.n_repeats, a.repeats);
            }
            Command::Oracle(a) => {
                set(&mut c.oracle_kind, a.kind);
                set(&mut c.mc_paths, a.paths);
                set(&mut c.mc_steps, a.steps);
                c.antithetic |= a.antithetic;
                set(&mut c.kappa, a.kappa);
                set(&mut c.theta, a.theta);
                set(&mut c.xi, a.xi);
                set(&mut c.rho, a.rho);
                set(&mut c.v0, a.v0);
                set(&mut c.tau_days, a.tau_days);
                set(&mut c.forward, a.forward);
                set(&mut c.strike, a.strike);
            }
            Command::Report => {}
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args` (program name first), runs the command on a pool with the
/// configured thread count and returns the text destined for stdout.
pub fn run<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return Ok(e.to_string()),
        Err(e) => return Err(CliError::Validation(e.to_string())),
    };
    let cfg = cli.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(_) => commands::gen(&cfg),
        Command::Calibrate(_) => commands::calibrate(&cfg),
        Command::Analyze(_) => commands::analyze(&cfg),
        Command::Oracle(_) => commands::oracle(&cfg),
        Command::Report => commands::report(&cfg),
    })
}
