//! The ingested corpus on disk: `corpus/manifest.json`, `corpus/vocab.txt`
//! and one `.msq` file per song.

use std::path::Path;

use anyhow::Context;
use polystream::multistream::{parse_sequence, DurationVocab, MultiStreamSequence};
use serde::{Deserialize, Serialize};

use crate::InputError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongEntry {
    pub id: String,
    /// MIDI file the song came from.
    pub source: String,
    /// Transcription, relative to the manifest.
    pub file: String,
    pub key: String,
    /// Semitones applied to reach C major or A minor.
    pub key_offset: i32,
    pub notes: usize,
    pub note_sets: usize,
    pub duplicates_removed: usize,
    pub polyphony_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_streams: usize,
    pub vocab: Vec<f64>,
    pub songs: Vec<SongEntry>,
    pub skipped: Vec<SkippedEntry>,
}

impl Manifest {
    pub fn ids(&self) -> Vec<String> {
        self.songs.iter().map(|s| s.id.clone()).collect()
    }
}

pub(crate) fn corpus_dir(out: &Path) -> std::path::PathBuf {
    out.join("corpus")
}

/// Reads the manifest written by `ingest` and every song it lists.
pub fn load_corpus(out: &Path) -> anyhow::Result<(Manifest, Vec<MultiStreamSequence>)> {
    let dir = corpus_dir(out);
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| InputError::new(format!("cannot read {}: {e}; run `ingest` first", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let vocab = DurationVocab::new(manifest.vocab.clone()).context("manifest vocabulary")?;
    let mut songs = Vec::with_capacity(manifest.songs.len());
    for entry in &manifest.songs {
        let p = dir.join(&entry.file);
        let text = std::fs::read_to_string(&p).map_err(|e| InputError::new(format!("cannot read {}: {e}", p.display())))?;
        let seq = parse_sequence(&text).with_context(|| format!("parsing {}", p.display()))?;
        if seq.config.n_streams != manifest.n_streams || seq.config.vocab != vocab {
            return Err(InputError::new(format!("{} does not match the manifest representation", p.display())).into());
        }
        songs.push(seq);
    }
    if songs.is_empty() {
        return Err(InputError::new("the ingested corpus has no songs").into());
    }
    Ok((manifest, songs))
}
