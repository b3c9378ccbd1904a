use std::path::{Path, PathBuf};

use dpp_cftp::cftp::CftpOptions;
use dpp_cftp::diagnostics::{DEFAULT_NBINS, DEFAULT_RMAX};
use dpp_cftp::dominating::InitialDepth;
use dpp_cftp::kernel::{DEFAULT_COVERAGE, DEFAULT_MAX_ORDER};
use dpp_cftp::oracle::DEFAULT_GRID_SIZE;
use dpp_cftp::{AlphaSpec, Family, ModelSpec, SpectralKernel, Window};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "DPP_CFTP_SEED";

/// Everything a command needs, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    pub rho: f64,
    pub alpha: AlphaSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub side: f64,
    pub coverage_target: f64,
    pub max_order: usize,
    pub initial_depth: InitialDepth,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<f64>,
    pub replications: usize,
    pub root_seed: u64,
    pub output: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    pub rmax: f64,
    pub nbins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            rho: 50.0,
            alpha: AlphaSpec::Value(0.04),
            nu: None,
            side: 1.0,
            coverage_target: DEFAULT_COVERAGE,
            max_order: DEFAULT_MAX_ORDER,
            initial_depth: InitialDepth::Half,
            max_depth: None,
            replications: 1,
            root_seed: 0,
            output: PathBuf::from("out"),
            grid_size: None,
            rmax: DEFAULT_RMAX,
            nbins: DEFAULT_NBINS,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let alpha = self.alpha.resolve(self.family, self.rho, self.nu)?;
        Ok(ModelSpec::new(self.family, self.rho, alpha, self.nu)?)
    }

    pub fn kernel(&self) -> Result<SpectralKernel, CliError> {
        let window = Window::new(self.side)?;
        Ok(SpectralKernel::build(
            self.model()?,
            window,
            self.coverage_target,
            self.max_order,
        )?)
    }

    /// Checks everything that can be checked without running the sampler.
    pub fn validate(&self) -> Result<SpectralKernel, CliError> {
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if let Some(d) = self.max_depth {
            if d.is_nan() || d <= 0.0 {
                return Err(CliError::Config(format!("max_depth must be positive, got {d}")));
            }
        }
        if let Some(m) = self.grid_size {
            if m == 0 || m > dpp_cftp::oracle::MAX_GRID_SIZE {
                return Err(CliError::Config(format!("grid_size must be in 1..=64, got {m}")));
            }
        }
        self.kernel()
    }

    pub fn cftp_options(&self) -> CftpOptions {
        CftpOptions {
            initial_depth: self.initial_depth,
            max_depth: self.max_depth,
            ..CftpOptions::default()
        }
    }

    /// Replication `i` uses seed `root_seed + i`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64)
            .map(|i| self.root_seed.wrapping_add(i))
            .collect()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size.unwrap_or(DEFAULT_GRID_SIZE)
    }
}
