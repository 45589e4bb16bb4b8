//! Polyphonic music composition with a multi-stream note representation.
//!
//! The pipeline has six stages, one module each:
//!
//! - [`midi_io`]: Standard MIDI File reading/writing, grid quantization and
//!   key normalization.
//! - [`multistream`]: the multi-stream codec (polyphony split into a fixed
//!   number of monophonic streams with explicit durations, SUSTAIN and REST
//!   symbols) plus sparsity analytics.
//! - [`seqmodel`]: a plan-conditioned stacked LSTM over encoded note-sets,
//!   trained with Adam on per-stream cross-entropy.
//! - [`composer`]: autoregressive note-set sampling with Boltzmann
//!   temperature reshaping.
//! - [`reward`]: a seven-attribute scorer for compositions.
//! - [`plansearch`]: Q-learning over plan bits and temperatures.
//!
//! [`corpus`] chains the ingestion steps for a whole corpus and [`toy`]
//! generates the small synthetic etude corpus used by the tests.

pub mod composer;
pub mod corpus;
pub mod error;
pub mod midi_io;
pub mod multistream;
pub mod plansearch;
pub mod reward;
pub mod seqmodel;
pub mod toy;

pub use error::{Error, Result};
