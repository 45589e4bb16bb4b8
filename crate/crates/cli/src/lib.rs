//! Command-line pipeline: ingest a MIDI corpus, train the sequence model,
//! compose, score compositions and search the plan space.
//!
//! Exit codes are 0 on success, 1 on internal errors and 2 on invalid input
//! or configuration.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::run;
pub use config::{PipelineConfig, SamplerSection, TrainingSection};
pub use manifest::{load_corpus, Manifest, SkippedEntry, SongEntry};

/// Bad input or configuration; reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        InputError(msg.into())
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<InputError>().is_some()) {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "polystream", version, about = "Multi-stream polyphonic composer with plan search")]
pub struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Parse, quantize and transcribe every MIDI file of the corpus directory.
    Ingest(IngestArgs),
    /// Polyphony, pitch and duration statistics of the ingested corpus.
    Stats,
    /// Train the sequence model on the ingested corpus.
    Train(TrainArgs),
    /// Compose from a checkpoint and export `.mid`, `.msq` and metadata.
    Compose(ComposeArgs),
    /// Score a composition or a window of a corpus song.
    Evaluate(EvaluateArgs),
    /// Q-learning over plans and temperatures, with a random baseline.
    Search(SearchArgs),
    /// Size of the composition space, piano roll against multi-stream.
    Sparsity(SparsityArgs),
    /// Fit reward thresholds to a set of pleasant compositions.
    CalibrateRewards(CalibrateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Stats => "stats",
            Command::Train(_) => "train",
            Command::Compose(_) => "compose",
            Command::Evaluate(_) => "evaluate",
            Command::Search(_) => "search",
            Command::Sparsity(_) => "sparsity",
            Command::CalibrateRewards(_) => "calibrate-rewards",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Overrides `corpus_dir`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComposeArgs {
    /// Defaults to `<out>/model/final.json`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Plan as a bit string (`0110`, one digit per song) or comma-separated
    /// song ids. Defaults to the first song.
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long)]
    pub t_pitch: Option<f64>,
    #[arg(long)]
    pub t_dur: Option<f64>,
    /// Note-sets to compose.
    #[arg(long)]
    pub length: Option<usize>,
    /// File stem under `<out>/compositions`.
    #[arg(long, default_value = "composition")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// A `.msq` file to score.
    #[arg(long, conflicts_with = "song")]
    pub msq: Option<PathBuf>,
    /// Score a window of this corpus song instead.
    #[arg(long)]
    pub song: Option<String>,
    /// First note-set of the window.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Window length in note-sets; defaults to the rest of the song.
    #[arg(long)]
    pub len: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Defaults to `<out>/model/final.json`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SparsityArgs {
    /// Composition length in whole notes.
    #[arg(long = "T", default_value_t = 1.0)]
    pub length: f64,
    /// Piano-roll sampling step; defaults to the quantization grid.
    #[arg(long = "S")]
    pub sample_step: Option<f64>,
    /// Shortest duration; defaults to the quantization grid.
    #[arg(long)]
    pub d0: Option<f64>,
    /// Streams; defaults to the configured count.
    #[arg(long)]
    pub ns: Option<usize>,
    #[arg(long, default_value_t = 88)]
    pub np: usize,
    /// Comma-separated duration vocabulary for an exact count.
    #[arg(long, value_delimiter = ',')]
    pub vocab: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Text file listing `.msq` compositions, one path per line.
    #[arg(long)]
    pub manifest: PathBuf,
}
