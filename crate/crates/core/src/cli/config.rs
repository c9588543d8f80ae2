//! Flat TOML pipeline configuration.
//!
//! ```toml
//! data_path = "epidemic.csv"
//! population_path = "population.csv"
//! output_dir = "out"
//! date_start = "2020-10-23"
//! date_end = "2021-07-05"
//! order = 4
//! num_basis = 20
//! test_regions = ["małopolskie", "podkarpackie", "świętokrzyskie", "wielkopolskie"]
//! preset = "paper-reduced"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FdaError, Result};
use crate::eval::SyntheticSpec;
use crate::ffreg::MfflrConfig;
use crate::fpca::Metric;

pub const REDUCED_PRESET: &str = "paper-reduced";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub data_path: PathBuf,
    #[serde(default)]
    pub population_path: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_start")]
    pub date_start: NaiveDate,
    #[serde(default = "default_end")]
    pub date_end: NaiveDate,

    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_num_basis")]
    pub num_basis: usize,
    /// When non-empty, the basis size is chosen per variable by GCV among
    /// these values and `num_basis` is ignored.
    #[serde(default)]
    pub basis_candidates: Vec<usize>,

    /// `0` keeps up to `n - 1` components.
    #[serde(default)]
    pub max_components: usize,
    #[serde(default)]
    pub fpca_metric: Metric,
    #[serde(default = "default_multiplier")]
    pub perturbation_multiplier: f64,

    #[serde(default, rename = "K")]
    pub k: Option<usize>,
    #[serde(default, rename = "L")]
    pub l: Option<usize>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default = "default_true")]
    pub include_intercept: bool,

    #[serde(default)]
    pub test_regions: Vec<String>,

    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_synthetic_n")]
    pub synthetic_n: usize,
    #[serde(default = "default_synthetic_predictors")]
    pub synthetic_predictors: usize,
    #[serde(default = "default_synthetic_components")]
    pub synthetic_k: usize,
    #[serde(default = "default_synthetic_components")]
    pub synthetic_l: usize,
    #[serde(default)]
    pub synthetic_noise_sd: f64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 10, 23).expect("valid date")
}
fn default_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 7, 5).expect("valid date")
}
fn default_order() -> usize {
    4
}
fn default_num_basis() -> usize {
    20
}
fn default_multiplier() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_seed() -> u64 {
    1
}
fn default_synthetic_n() -> usize {
    100
}
fn default_synthetic_predictors() -> usize {
    3
}
fn default_synthetic_components() -> usize {
    2
}

impl Default for PipelineConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FdaError::Config(e.to_string()))
    }

    /// Reads the config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FdaError::io(path, e))?;
        let mut config = PipelineConfig::from_toml(&text)
            .map_err(|e| FdaError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data_path, &mut self.population_path, &mut self.output_dir] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Checks the fields that every subcommand relies on.
    pub fn validate(&self) -> Result<()> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(FdaError::Config("output_dir is empty".into()));
        }
        if self.date_start >= self.date_end {
            return Err(FdaError::Config(format!(
                "date_start {} must precede date_end {}",
                self.date_start, self.date_end
            )));
        }
        if self.order == 0 {
            return Err(FdaError::Config("order must be at least 1".into()));
        }
        if self.basis_candidates.is_empty() && self.num_basis < self.order {
            return Err(FdaError::Config(format!(
                "num_basis {} is smaller than order {}",
                self.num_basis, self.order
            )));
        }
        if let Some(c) = self.basis_candidates.iter().find(|c| **c < self.order) {
            return Err(FdaError::Config(format!(
                "basis candidate {c} is smaller than order {}",
                self.order
            )));
        }
        if !(self.perturbation_multiplier > 0.0 && self.perturbation_multiplier.is_finite()) {
            return Err(FdaError::Config("perturbation_multiplier must be positive".into()));
        }
        if !(self.synthetic_noise_sd >= 0.0 && self.synthetic_noise_sd.is_finite()) {
            return Err(FdaError::Config("synthetic_noise_sd must be non-negative".into()));
        }
        self.regression()?;
        Ok(())
    }

    /// Checks that the input paths are set.
    pub fn validate_inputs(&self) -> Result<()> {
        if self.data_path.as_os_str().is_empty() {
            return Err(FdaError::Config("data_path is empty".into()));
        }
        if self.population_path.as_os_str().is_empty() {
            return Err(FdaError::Config("population_path is empty".into()));
        }
        Ok(())
    }

    /// Regression settings after applying the preset.
    pub fn regression(&self) -> Result<MfflrConfig> {
        let mut cfg = match self.preset.as_deref() {
            None | Some("custom") => MfflrConfig::new(self.k.unwrap_or(1), self.l.unwrap_or(1)),
            Some(REDUCED_PRESET) => {
                if self.k.is_some_and(|k| k != 1) || self.l.is_some_and(|l| l != 1) {
                    return Err(FdaError::Config(format!(
                        "preset '{REDUCED_PRESET}' fixes K = L = 1; remove the explicit K/L"
                    )));
                }
                MfflrConfig::reduced()
            }
            Some(other) => {
                return Err(FdaError::Config(format!(
                    "unknown preset '{other}' (expected '{REDUCED_PRESET}' or 'custom')"
                )))
            }
        };
        if cfg.response_components == 0 || cfg.predictor_components == 0 {
            return Err(FdaError::Config("K and L must be at least 1".into()));
        }
        cfg.include_intercept = self.include_intercept;
        cfg.metric = self.fpca_metric;
        Ok(cfg)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            order: self.order,
            num_basis: self.num_basis,
            ..SyntheticSpec::new(
                self.synthetic_n,
                self.synthetic_predictors,
                self.synthetic_k,
                self.synthetic_l,
                self.synthetic_noise_sd,
                self.seed,
            )
        }
    }

    /// SHA-256 of the effective configuration with paths made relative to
    /// the output directory, so that moving the whole run does not change it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        for p in [&mut canonical.data_path, &mut canonical.population_path] {
            if let Some(name) = p.file_name() {
                *p = PathBuf::from(name);
            }
        }
        canonical.output_dir = PathBuf::from(".");
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
