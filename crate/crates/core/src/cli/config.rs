//! TOML experiment files.
//!
//! ```toml
//! model = "cascade"              # or "pbm"
//! bias = [0.95, 0.90, 0.85]      # pbm only, one entry per position
//! profile = "appendix-d"         # built-in name or path to a profile CSV
//! k = 3
//! horizon = 500000
//! alpha = 1.5
//! attack = "cascade-ofa"         # none | cascade-ofa | pbm-ofa | cascade-atq | pbm-atq
//! targets = [4, 7, 10]
//! target_list = [4, 7, 10]       # optional; defaults to targets padded with the smallest other ids
//! w_m = 0.08                     # or epsilon = 0.0244 (cascade attacks only)
//! atq_budget = 11265             # optional; defaults to the matching OFA budget
//! runs = 50
//! seed = 0
//! ```
//!
//! Every key is optional in the file; command-line flags fill in or override.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attacks::TargetSpec;
use crate::click_models::ClickModelKind;
use crate::data_ingest::read_profile;
use crate::error::{Error, Result};
use crate::harness::{AttackKind, ExperimentConfig};
use crate::types::{AttractionProfile, ItemId, PositionBias};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Cascade,
    Pbm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelName>,
    pub bias: Option<Vec<f64>>,
    pub profile: Option<String>,
    pub k: Option<usize>,
    pub horizon: Option<u64>,
    pub alpha: Option<f64>,
    pub attack: Option<AttackKind>,
    pub targets: Option<Vec<u32>>,
    pub target_list: Option<Vec<u32>>,
    pub w_m: Option<f64>,
    pub epsilon: Option<f64>,
    pub atq_budget: Option<u64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        // Profile paths are relative to the config file.
        if let Some(p) = &config.profile {
            if AttractionProfile::builtin(p).is_none() && Path::new(p).is_relative() {
                if let Some(dir) = path.parent() {
                    config.profile = Some(dir.join(p).display().to_string());
                }
            }
        }
        Ok(config)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: FileConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            model,
            bias,
            profile,
            k,
            horizon,
            alpha,
            attack,
            targets,
            target_list,
            w_m,
            epsilon,
            atq_budget,
            runs,
            seed
        );
        self
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let missing = |key: &str| Error::Config(format!("missing required setting `{key}`"));
        let model = match self.model.ok_or_else(|| missing("model"))? {
            ModelName::Cascade => {
                if self.bias.is_some() {
                    return Err(Error::Config("`bias` only applies to the pbm model".into()));
                }
                ClickModelKind::Cascade
            }
            ModelName::Pbm => ClickModelKind::Pbm {
                bias: PositionBias::new(self.bias.clone().ok_or_else(|| missing("bias"))?)?,
            },
        };
        let profile = load_profile(self.profile.as_deref().unwrap_or("appendix-d"))?;
        let k = self.k.ok_or_else(|| missing("k"))?;
        let l = profile.len();
        let horizon = self.horizon.ok_or_else(|| missing("horizon"))?;
        let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
        let mut config = ExperimentConfig::new(model, profile, k, horizon, alpha);
        config.attack = self.attack.unwrap_or(AttackKind::None);
        config.targets = match (&self.targets, &self.target_list) {
            (Some(t), None) => Some(TargetSpec::new(ids(t), k, l)?),
            (Some(t), Some(list)) => Some(TargetSpec::with_list(ids(t), ids(list), k, l)?),
            (None, Some(_)) => return Err(Error::Config("`target_list` given without `targets`".into())),
            (None, None) => None,
        };
        config.w_m = self.w_m;
        config.epsilon = self.epsilon;
        config.atq_budget = self.atq_budget;
        config.runs = self.runs.unwrap_or(1);
        config.master_seed = self.seed.unwrap_or(0);
        config.build_attack()?;
        Ok(config)
    }
}

fn ids(raw: &[u32]) -> Vec<ItemId> {
    raw.iter().map(|&i| ItemId(i)).collect()
}

/// A built-in profile name or a profile CSV path.
pub fn load_profile(name_or_path: &str) -> Result<AttractionProfile> {
    match AttractionProfile::builtin(name_or_path) {
        Some(p) => Ok(p),
        None => read_profile(PathBuf::from(name_or_path)),
    }
}
