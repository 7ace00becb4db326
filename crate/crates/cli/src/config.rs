//! Run configuration: a flat TOML file with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding options.csv, index.csv, futures.csv and flows.csv.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Calibration CSV read by `analyze`; defaults to `out_dir/calibration.csv`.
    pub calibration_file: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,

    pub days: usize,
    pub effect_strength: f64,
    pub noise_scale: f64,

    pub w_sigma: f64,
    pub w_idx: f64,
    pub de_population: usize,
    pub de_generations: usize,

    pub test_fraction: f64,
    pub folds: usize,
    pub n_alphas: usize,
    pub n_trees: usize,
    pub n_repeats: usize,

    pub oracle_kind: OracleKind,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub antithetic: bool,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub v0: f64,
    pub tau_days: f64,
    pub forward: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Future,
    Call,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            calibration_file: None,
            seed: 7,
            threads: 0,
            days: 500,
            effect_strength: 1.0,
            noise_scale: 0.05,
            w_sigma: vstoxx_core::calibrator::W_SIGMA,
            w_idx: vstoxx_core::calibrator::W_INDEX,
            de_population: 75,
            de_generations: 200,
            test_fraction: 0.3,
            folds: 5,
            n_alphas: 100,
            n_trees: 250,
            n_repeats: 30,
            oracle_kind: OracleKind::Future,
            mc_paths: 1_000_000,
            mc_steps: 500,
            antithetic: false,
            kappa: 2.0,
            theta: 0.04,
            xi: 0.6,
            rho: -0.7,
            v0: 0.05,
            tau_days: 21.0,
            forward: 100.0,
            strike: 100.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn calibration_path(&self) -> PathBuf {
        self.calibration_file
            .clone()
            .unwrap_or_else(|| self.out_dir.join("calibration.csv"))
    }

    /// Hash of the settings that determine command output. Paths and the
    /// thread count are excluded so relocated or re-threaded runs match.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data_dir = PathBuf::new();
        c.out_dir = PathBuf::new();
        c.calibration_file = None;
        c.threads = 0;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.n_alphas == 0 || self.n_trees == 0 || self.n_repeats == 0 {
            return bad("n_alphas, n_trees and n_repeats must be positive".into());
        }
        if self.de_population < 4 {
            return bad(format!("de_population must be at least 4, got {}", self.de_population));
        }
        if !(self.w_sigma >= 0.0 && self.w_idx >= 0.0) {
            return bad("weights must be non-negative".into());
        }
        Ok(())
    }
}
