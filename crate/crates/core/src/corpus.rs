//! Corpus preparation: normalize tracks, derive the duration vocabulary and
//! transcribe every song.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::midi_io::{dedupe_strikes, estimate_key, quantize, transpose_to_common_key, KeyEstimate, MidiError, QuantizedTrack, DEFAULT_GRID};
use crate::multistream::{
    derive_duration_vocab, limit_polyphony, snap_durations, transcribe, CodecError, MultiStreamSequence, RepresentationConfig,
    DEFAULT_STREAMS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub n_streams: usize,
    /// Share of corpus notes whose duration the vocabulary must cover.
    pub coverage: f64,
    pub grid: f64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { n_streams: DEFAULT_STREAMS, coverage: 0.98, grid: DEFAULT_GRID }
    }
}

/// A track on the grid, in C major or A minor, without duplicate strikes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTrack {
    pub track: QuantizedTrack,
    pub key: KeyEstimate,
    pub duplicates_removed: usize,
}

pub fn normalize_track(track: &QuantizedTrack, grid: f64) -> Result<NormalizedTrack, MidiError> {
    let q = quantize(track, grid);
    let key = estimate_key(&q)?;
    let t = transpose_to_common_key(&q, &key);
    let (track, duplicates_removed) = dedupe_strikes(&t);
    Ok(NormalizedTrack { track, key, duplicates_removed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSong {
    pub id: String,
    pub key: KeyEstimate,
    pub key_offset: i32,
    /// The track as transcribed: snapped durations, polyphony limited.
    pub track: QuantizedTrack,
    pub polyphony_dropped: usize,
    pub duplicates_removed: usize,
    pub sequence: MultiStreamSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCorpus {
    pub config: RepresentationConfig,
    pub songs: Vec<PreparedSong>,
    /// Songs that could not be used, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl PreparedCorpus {
    pub fn sequences(&self) -> Vec<MultiStreamSequence> {
        self.songs.iter().map(|s| s.sequence.clone()).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.songs.iter().map(|s| s.id.clone()).collect()
    }
}

/// Normalizes every track, derives one vocabulary for the whole corpus and
/// transcribes each song with it. Songs that fail are skipped with a warning.
pub fn prepare_corpus(tracks: &[QuantizedTrack], cfg: &PrepareConfig) -> Result<PreparedCorpus, CodecError> {
    let mut normalized = Vec::new();
    let mut skipped = Vec::new();
    for t in tracks {
        match normalize_track(t, cfg.grid) {
            Ok(n) => normalized.push(n),
            Err(e) => {
                warn!("skipping {}: {e}", t.source_id);
                skipped.push((t.source_id.clone(), e.to_string()));
            }
        }
    }
    let plain: Vec<QuantizedTrack> = normalized.iter().map(|n| n.track.clone()).collect();
    let vocab = derive_duration_vocab(&plain, cfg.coverage, cfg.grid)?;
    let config = RepresentationConfig::new(cfg.n_streams, vocab);
    let mut songs = Vec::new();
    for n in normalized {
        let snapped = snap_durations(&n.track, &config.vocab);
        let (dedup, more) = dedupe_strikes(&snapped);
        let (limited, dropped) = limit_polyphony(&dedup, cfg.n_streams);
        if dropped > 0 {
            warn!("{}: dropped {dropped} notes above {} voices", n.track.source_id, cfg.n_streams);
        }
        match transcribe(&limited, &config) {
            Ok(sequence) => songs.push(PreparedSong {
                id: n.track.source_id.clone(),
                key: n.key,
                key_offset: n.track.key_offset,
                track: limited,
                polyphony_dropped: dropped,
                duplicates_removed: n.duplicates_removed + more,
                sequence,
            }),
            Err(e) => {
                warn!("skipping {}: {e}", n.track.source_id);
                skipped.push((n.track.source_id.clone(), e.to_string()));
            }
        }
    }
    Ok(PreparedCorpus { config, songs, skipped })
}
