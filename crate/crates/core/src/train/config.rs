//! Run configuration, read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! batch_size = 16
//! max_epochs = 30
//! patience = 10
//! num_pairs = 200          # synthetic pairs, used when `dataset` is absent
//! # dataset = "pairs.jsonl"
//!
//! [audio]                  # EncoderConfig
//! [motion]                 # EncoderConfig
//! [objective]              # weights, negatives, sral_source, aux_weight, symmetric
//! [optimizer]              # learning_rate, weight_decay, beta1, beta2, epsilon
//! [synthetic]              # SyntheticPairSpec
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderConfig;
use crate::objectives::ObjectiveConfig;
use crate::rhythm::synth::SyntheticPairSpec;
use crate::train::optimizer::AdamWSettings;

pub const SEED_ENV: &str = "MOTIONBEAT_SEED";

/// Joints tracked by the synthetic generator; each contributes 9 features.
pub const SYNTHETIC_JOINTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_pairs")]
    pub num_pairs: usize,
    pub audio: EncoderConfig,
    pub motion: EncoderConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub optimizer: AdamWSettings,
    #[serde(default)]
    pub synthetic: SyntheticPairSpec,
}

fn default_pairs() -> usize {
    200
}

impl RunConfig {
    /// Two-layer, 64-unit encoders on 16-beat clips in 4/4, batches of 16.
    pub fn tiny() -> Self {
        let synthetic = SyntheticPairSpec::default();
        let bar = synthetic.bar_len;
        Self {
            seed: 0,
            batch_size: 16,
            max_epochs: 30,
            patience: 10,
            dataset: None,
            num_pairs: default_pairs(),
            audio: EncoderConfig::tiny(synthetic.n_mels, bar, false),
            motion: EncoderConfig::tiny(9 * SYNTHETIC_JOINTS, bar, true),
            objective: ObjectiveConfig::default(),
            optimizer: AdamWSettings::tiny(),
            synthetic,
        }
    }

    /// Six-layer, 512-unit encoders, batches of 64 for up to 100 epochs.
    pub fn full_scale() -> Self {
        let synthetic = SyntheticPairSpec::default();
        let bar = synthetic.bar_len;
        Self {
            batch_size: 64,
            max_epochs: 100,
            audio: EncoderConfig::full_scale(synthetic.n_mels, bar, false),
            motion: EncoderConfig::full_scale(9 * SYNTHETIC_JOINTS, bar, true),
            optimizer: AdamWSettings::default(),
            ..Self::tiny()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replaces the seed with `MOTIONBEAT_SEED` when that variable is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} is not an unsigned integer: {v:?}")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2 for in-batch negatives, got {}",
                self.batch_size
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        self.audio.validate()?;
        self.motion.validate()?;
        if self.audio.embed_dim != self.motion.embed_dim {
            return Err(Error::Config("audio and motion embed_dim differ".into()));
        }
        if self.audio.bar_len != self.motion.bar_len {
            return Err(Error::Config("audio and motion bar_len differ".into()));
        }
        self.objective.validate()?;
        self.optimizer.validate()?;
        if self.dataset.is_none() {
            self.synthetic.validate()?;
            if self.synthetic.bar_len != self.audio.bar_len {
                return Err(Error::Config("synthetic bar_len differs from the encoders'".into()));
            }
            if self.synthetic.n_mels != self.audio.input_dim {
                return Err(Error::Config(format!(
                    "audio input_dim {} does not match {} mel bands",
                    self.audio.input_dim, self.synthetic.n_mels
                )));
            }
            if self.motion.input_dim != 9 * SYNTHETIC_JOINTS {
                return Err(Error::Config(format!(
                    "motion input_dim must be {} for synthetic data",
                    9 * SYNTHETIC_JOINTS
                )));
            }
        }
        Ok(())
    }
}
