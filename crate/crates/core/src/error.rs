use thiserror::Error;

use crate::composer::ComposeError;
use crate::midi_io::MidiError;
use crate::multistream::CodecError;
use crate::plansearch::SearchError;
use crate::reward::RewardError;
use crate::seqmodel::ModelError;

/// Crate-level error wrapping each module's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Midi(#[from] MidiError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
