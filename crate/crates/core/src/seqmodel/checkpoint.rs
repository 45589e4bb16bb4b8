//! JSON checkpoints: format tag, version, hyperparameters and every weight
//! tensor with its shape. Floats are written with shortest round-trip
//! formatting, so loading reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelDims, ModelError, ModelHyperparams, ModelParams};
use crate::multistream::DurationVocab;

pub const CHECKPOINT_FORMAT: &str = "polystream-lstm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hyperparams: ModelHyperparams,
    pub dims: ModelDims,
    /// Duration vocabulary the model was trained with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<DurationVocab>,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, hyper: &ModelHyperparams) -> Self {
        let data = params.data();
        let tensors = params
            .tensors()
            .into_iter()
            .map(|t| TensorRecord { values: data[t.offset..t.offset + t.len()].to_vec(), name: t.name, shape: t.shape })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            hyperparams: *hyper,
            dims: *params.dims(),
            vocab: None,
            tensors,
        }
    }

    pub fn with_vocab(mut self, vocab: DurationVocab) -> Self {
        self.vocab = Some(vocab);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(CHECKPOINT_FORMAT) => {}
            other => return Err(ModelError::Checkpoint(format!("format tag {other:?}, expected {CHECKPOINT_FORMAT:?}"))),
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Version { expected: CHECKPOINT_VERSION, found: version });
        }
        serde_json::from_value(value).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Rebuilds the parameters, checking every tensor's name and shape.
    pub fn params(&self) -> Result<ModelParams, ModelError> {
        let mut p = ModelParams::zeros(self.dims);
        let specs = p.tensors();
        if specs.len() != self.tensors.len() {
            return Err(ModelError::Dimension { what: "tensor count".into(), expected: specs.len(), found: self.tensors.len() });
        }
        for (spec, rec) in specs.iter().zip(&self.tensors) {
            if spec.name != rec.name {
                return Err(ModelError::Checkpoint(format!("tensor {:?} where {:?} was expected", rec.name, spec.name)));
            }
            if spec.shape != rec.shape {
                for (e, f) in spec.shape.iter().zip(&rec.shape) {
                    if e != f {
                        return Err(ModelError::Dimension { what: format!("{} shape", spec.name), expected: *e, found: *f });
                    }
                }
                return Err(ModelError::Dimension { what: format!("{} rank", spec.name), expected: spec.shape.len(), found: rec.shape.len() });
            }
            if rec.values.len() != spec.len() {
                return Err(ModelError::Dimension { what: format!("{} values", spec.name), expected: spec.len(), found: rec.values.len() });
            }
            p.data_mut()[spec.offset..spec.offset + spec.len()].copy_from_slice(&rec.values);
        }
        Ok(p)
    }
}

pub fn save_checkpoint(params: &ModelParams, hyper: &ModelHyperparams, path: &Path) -> Result<(), ModelError> {
    Checkpoint::new(params, hyper).write(path)
}

/// Loads parameters; with `expected` set, the stored dimensions must match it.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelDims>) -> Result<(ModelParams, ModelHyperparams), ModelError> {
    let ck = Checkpoint::read(path)?;
    if let Some(want) = expected {
        let got = &ck.dims;
        let fields = [
            ("units", want.units, got.units),
            ("layers", want.layers, got.layers),
            ("streams", want.n_streams, got.n_streams),
            ("durations", want.n_durations, got.n_durations),
            ("plan width", want.plan_width, got.plan_width),
        ];
        for (what, e, f) in fields {
            if e != f {
                return Err(ModelError::Dimension { what: what.into(), expected: e, found: f });
            }
        }
    }
    Ok((ck.params()?, ck.hyperparams))
}

/// Hex SHA-256 of the dimensions and parameter bits.
pub fn checkpoint_id(params: &ModelParams) -> String {
    let mut h = Sha256::new();
    let d = params.dims();
    for v in [d.n_streams, d.n_durations, d.plan_width, d.layers, d.units] {
        h.update((v as u64).to_le_bytes());
    }
    for v in params.data() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
