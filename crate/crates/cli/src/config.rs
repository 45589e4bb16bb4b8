//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use polystream::corpus::PrepareConfig;
use polystream::plansearch::SearchHyperparams;
use polystream::reward::RewardConfig;
use polystream::seqmodel::ModelHyperparams;
use serde::{Deserialize, Serialize};

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub holdout_fraction: f64,
    /// Write a checkpoint after every epoch as well as the final one.
    pub epoch_checkpoints: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection { epochs: 10, holdout_fraction: 0.1, epoch_checkpoints: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub length: usize,
    pub t_pitch: f64,
    pub t_dur: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { length: 64, t_pitch: 1.0, t_dur: 1.0 }
    }
}

/// Everything a pipeline run needs. Every field has a default, so an empty
/// file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory of `.mid` files read by `ingest`.
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub representation: PrepareConfig,
    pub model: ModelHyperparams,
    pub training: TrainingSection,
    pub sampler: SamplerSection,
    pub reward: RewardConfig,
    pub search: SearchHyperparams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: PathBuf::from("corpus/toy"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            representation: PrepareConfig::default(),
            model: ModelHyperparams::default(),
            training: TrainingSection::default(),
            sampler: SamplerSection::default(),
            reward: RewardConfig::default(),
            search: SearchHyperparams::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path).map_err(|e| InputError::new(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| InputError::new(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.corpus_dir.is_relative() {
            cfg.corpus_dir = base.join(&cfg.corpus_dir);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let r = &self.representation;
        if r.n_streams == 0 {
            return Err(InputError::new("representation.n_streams must be at least 1"));
        }
        if !(r.coverage > 0.0 && r.coverage <= 1.0) {
            return Err(InputError::new("representation.coverage must lie in (0, 1]"));
        }
        if !(r.grid > 0.0) {
            return Err(InputError::new("representation.grid must be positive"));
        }
        let m = &self.model;
        if m.layers == 0 || m.units == 0 || m.batch_size == 0 {
            return Err(InputError::new("model.layers, model.units and model.batch_size must be positive"));
        }
        if !(m.adam.learning_rate > 0.0) {
            return Err(InputError::new("model.adam.learning_rate must be positive"));
        }
        if !(0.0..=0.5).contains(&self.training.holdout_fraction) {
            return Err(InputError::new("training.holdout_fraction must lie in [0, 0.5]"));
        }
        let s = &self.sampler;
        if s.length == 0 {
            return Err(InputError::new("sampler.length must be at least 1"));
        }
        if !(s.t_pitch > 0.0 && s.t_dur > 0.0) {
            return Err(InputError::new("sampler temperatures must be positive"));
        }
        self.reward.validate().map_err(|e| InputError::new(format!("reward: {e}")))?;
        self.search.validate().map_err(|e| InputError::new(format!("search: {e}")))?;
        Ok(())
    }
}
