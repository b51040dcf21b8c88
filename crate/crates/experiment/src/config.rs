use std::path::{Path, PathBuf};

use fgr_core::QualityKind;
use fgr_slam::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

/// Everything that determines a batch run. Written next to the outputs so a
/// run can be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// World parameters; the per-world seed is derived from `root_seed`.
    pub sim: SimConfig,
    pub n_sims: usize,
    /// Monte Carlo samples per redundancy estimate.
    pub mc_samples: usize,
    pub kinds: Vec<QualityKind>,
    pub output_dir: PathBuf,
    pub root_seed: u64,
    /// Shuffles in each permutation test.
    pub permutations: usize,
    /// One in this many simulations gets a self-redundancy spot check.
    pub spot_check_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sim: SimConfig::default(),
            n_sims: 500,
            mc_samples: 10_000,
            kinds: QualityKind::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            root_seed: 2024,
            permutations: 10_000,
            spot_check_every: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(ExperimentError::Config("n_sims must be at least 1".into()));
        }
        if self.mc_samples < 100 {
            return Err(ExperimentError::Config(format!(
                "mc_samples must be at least 100, got {}",
                self.mc_samples
            )));
        }
        if self.kinds.is_empty() {
            return Err(ExperimentError::Config("kinds must not be empty".into()));
        }
        if self.permutations == 0 || self.spot_check_every == 0 {
            return Err(ExperimentError::Config("permutations and spot_check_every must be positive".into()));
        }
        self.sim.validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            ExperimentError::Config(msg) => ExperimentError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn has(&self, kind: QualityKind) -> bool {
        self.kinds.contains(&kind)
    }
}
