use std::fs;
use std::path::Path;

use hanforge::baselines::BaselineConfig;
use hanforge::data::DEFAULT_MAX_VOCAB;
use hanforge::encoders::{HyperParams, Variant};
use hanforge::metrics::DEFAULT_THRESHOLD;
use hanforge::training::TrainConfig;
use hanforge::viz::DEFAULT_TOP_K;
use hanforge::{HanError, Result};
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Read from `--config` when
/// given; individual flags then override single fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    /// Master seed. When unset, `train.seed` is used.
    pub seed: Option<u64>,
    pub max_vocab: usize,
    pub hyper: HyperParams,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
    pub top_k: usize,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::V2,
            seed: None,
            max_vocab: DEFAULT_MAX_VOCAB,
            hyper: HyperParams::default(),
            train: TrainConfig::default(),
            baseline: BaselineConfig::default(),
            top_k: DEFAULT_TOP_K,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| HanError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| HanError::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.train.seed)
    }

    /// Propagates the master seed and validates every section.
    pub fn finish(mut self) -> Result<Self> {
        let seed = self.seed();
        self.seed = Some(seed);
        self.train.seed = seed;
        self.hyper.validate()?;
        self.train.validate()?;
        if self.max_vocab == 0 {
            return Err(HanError::Config("max_vocab must be ≥ 1".into()));
        }
        if self.top_k == 0 {
            return Err(HanError::Config("top_k must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(HanError::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        Ok(self)
    }
}
