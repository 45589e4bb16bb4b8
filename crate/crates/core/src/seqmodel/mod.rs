//! Plan-conditioned sequence model over note-set frames.
//!
//! Each timestep's input is the one-hot frame of a note-set with the plan
//! vector appended. Stacked LSTM layers feed one softmax head per stream for
//! the pitch and one per stream for the duration of the next note-set.

mod adam;
mod checkpoint;
mod network;
mod train;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multistream::{frame_hot_indices, MultiStreamSequence, NoteSet, Pitch};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{checkpoint_id, load_checkpoint, save_checkpoint, Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{loss, softmax_in_place, Layout, ModelDims, ModelParams, Prediction, SparseInput, Target, TensorSpec, LOG_FLOOR};
pub use train::{batch_gradient, train, write_loss_trace, EpochStats, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected {expected}, found {found}")]
    Dimension { what: String, expected: usize, found: usize },
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("no training examples")]
    NoExamples,
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { expected: u32, found: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Architecture and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelHyperparams {
    /// Context length in note-sets.
    pub context_len: usize,
    pub layers: usize,
    pub units: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for ModelHyperparams {
    fn default() -> Self {
        ModelHyperparams { context_len: 20, layers: 2, units: 300, batch_size: 64, adam: AdamConfig::default() }
    }
}

impl ModelHyperparams {
    pub fn dims(&self, n_streams: usize, n_durations: usize, plan_width: usize) -> ModelDims {
        ModelDims { n_streams, n_durations, plan_width, layers: self.layers, units: self.units }
    }
}

/// One context window with its plan and next-note-set target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    /// Hot indices of each context frame, oldest first.
    pub context: Vec<Vec<u32>>,
    pub plan: Vec<f64>,
    pub target: Target,
    pub song: usize,
}

impl TrainingExample {
    pub fn inputs(&self, params: &ModelParams) -> Vec<SparseInput> {
        self.context.iter().map(|hot| params.sparse_step(hot, &self.plan)).collect()
    }
}

/// Frame used to left-pad contexts at the start of a song.
pub fn padding_frame(n_streams: usize, n_durations: usize) -> Vec<u32> {
    hot_u32(&NoteSet::all_rest(0.0, n_streams, 0), n_durations)
}

pub(crate) fn hot_u32(set: &NoteSet, n_durations: usize) -> Vec<u32> {
    frame_hot_indices(set, n_durations).into_iter().map(|i| i as u32).collect()
}

pub fn target_of(set: &NoteSet) -> Target {
    Target {
        pitch: set.symbols.iter().map(|s| s.pitch.class_index()).collect(),
        duration: set.symbols.iter().map(|s| s.duration_index).collect(),
        masked: set.symbols.iter().map(|s| s.pitch == Pitch::Sustain).collect(),
    }
}

/// One example per note-set of every song: the preceding `context_len`
/// frames (left-padded with all-REST frames) predict the note-set, with the
/// song's one-hot plan.
pub fn make_training_set(corpus: &[MultiStreamSequence], context_len: usize) -> Vec<TrainingExample> {
    let n_songs = corpus.len();
    let mut out = Vec::new();
    for (song, seq) in corpus.iter().enumerate() {
        if seq.len() < 2 {
            warn!("song {song} has {} note-sets; skipping", seq.len());
            continue;
        }
        let n_d = seq.config.n_durations();
        let pad = padding_frame(seq.config.n_streams, n_d);
        let frames: Vec<Vec<u32>> = seq.note_sets.iter().map(|s| hot_u32(s, n_d)).collect();
        let mut plan = vec![0.0; n_songs];
        plan[song] = 1.0;
        for i in 0..seq.len() {
            let context = (0..context_len)
                .map(|k| {
                    let pos = i as isize - context_len as isize + k as isize;
                    if pos < 0 {
                        pad.clone()
                    } else {
                        frames[pos as usize].clone()
                    }
                })
                .collect();
            out.push(TrainingExample { context, plan: plan.clone(), target: target_of(&seq.note_sets[i]), song });
        }
    }
    out
}
