//! MIDI ingestion: SMF parsing, grid quantization and key normalization.
//!
//! Times are measured in whole notes throughout. A quarter note is `0.25`,
//! a semiquaver is `0.0625`. Grid steps are dyadic by default so quantized
//! times are exact in `f64`.

mod key;
mod smf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use key::{estimate_key, pitch_class_histogram, KeyEstimate, Mode, MAJOR_PROFILE, MINOR_PROFILE};
pub use smf::{parse_midi, write_midi, EXPORT_DIVISION, EXPORT_TEMPO_USEC};

/// Lowest playable piano pitch (A0).
pub const LOWEST_PITCH: u8 = 21;
/// Highest playable piano pitch (C8).
pub const HIGHEST_PITCH: u8 = 108;
/// Default quantization grid: one semiquaver.
pub const DEFAULT_GRID: f64 = 1.0 / 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MidiError {
    #[error("malformed MIDI at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("cannot estimate the key of an empty track")]
    EmptyTrack,
}

impl MidiError {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        MidiError::Parse { offset, message: message.into() }
    }
}

/// A struck piano note.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedNote {
    /// MIDI note number in `[21, 108]`.
    pub pitch: u8,
    /// Onset in whole notes.
    pub onset: f64,
    /// Duration in whole notes, strictly positive.
    pub duration: f64,
}

impl TimedNote {
    pub fn new(pitch: u8, onset: f64, duration: f64) -> Self {
        TimedNote { pitch, onset, duration }
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

/// The note list of one song, sorted by onset then descending pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTrack {
    pub source_id: String,
    pub notes: Vec<TimedNote>,
    /// Semitone shift applied by [`transpose_to_common_key`].
    pub key_offset: i32,
}

impl QuantizedTrack {
    pub fn new(source_id: impl Into<String>, mut notes: Vec<TimedNote>) -> Self {
        sort_notes(&mut notes);
        QuantizedTrack { source_id: source_id.into(), notes, key_offset: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    /// Latest note end, or 0 for an empty track.
    pub fn end_time(&self) -> f64 {
        self.notes.iter().map(TimedNote::end).fold(0.0, f64::max)
    }
}

/// Canonical note order: onset ascending, pitch descending, duration ascending.
pub fn sort_notes(notes: &mut [TimedNote]) {
    notes.sort_by(|a, b| {
        a.onset
            .total_cmp(&b.onset)
            .then(b.pitch.cmp(&a.pitch))
            .then(a.duration.total_cmp(&b.duration))
    });
}

fn snap(x: f64, grid: f64) -> f64 {
    (x / grid).round() * grid
}

/// Snaps every onset and offset to the nearest grid point.
///
/// Notes that collapse to zero length are extended to one grid step.
pub fn quantize(track: &QuantizedTrack, grid: f64) -> QuantizedTrack {
    assert!(grid > 0.0, "quantization grid must be positive");
    let notes = track
        .notes
        .iter()
        .map(|n| {
            let onset = snap(n.onset, grid);
            let end = snap(n.end(), grid);
            let duration = if end - onset < grid * 0.5 { grid } else { end - onset };
            TimedNote { pitch: n.pitch, onset, duration }
        })
        .collect();
    let mut out = QuantizedTrack::new(track.source_id.clone(), notes);
    out.key_offset = track.key_offset;
    out
}

/// Collapses notes struck at the same onset with the same pitch, keeping the
/// longest. A transcribed note-set cannot strike one pitch twice.
pub fn dedupe_strikes(track: &QuantizedTrack) -> (QuantizedTrack, usize) {
    let mut notes = track.notes.clone();
    notes.sort_by(|a, b| {
        a.onset
            .total_cmp(&b.onset)
            .then(b.pitch.cmp(&a.pitch))
            .then(b.duration.total_cmp(&a.duration))
    });
    let before = notes.len();
    notes.dedup_by(|later, first| later.onset == first.onset && later.pitch == first.pitch);
    let removed = before - notes.len();
    let mut out = QuantizedTrack::new(track.source_id.clone(), notes);
    out.key_offset = track.key_offset;
    (out, removed)
}

/// Semitone shift taking `key` to C major or A minor, in `-5..=6`.
pub fn offset_to_common_key(key: &KeyEstimate) -> i32 {
    let target: i32 = match key.mode {
        Mode::Major => 0,
        Mode::Minor => 9,
    };
    let off = (target - key.tonic as i32).rem_euclid(12);
    if off > 6 {
        off - 12
    } else {
        off
    }
}

/// Moves `pitch` by `offset` semitones, folding by octaves back into the
/// piano range.
pub fn shift_pitch(pitch: u8, offset: i32) -> u8 {
    let mut p = pitch as i32 + offset;
    while p > HIGHEST_PITCH as i32 {
        p -= 12;
    }
    while p < LOWEST_PITCH as i32 {
        p += 12;
    }
    p as u8
}

/// Transposes the track so that `key` lands on C major (or A minor) by the
/// smallest shift.
pub fn transpose_to_common_key(track: &QuantizedTrack, key: &KeyEstimate) -> QuantizedTrack {
    let offset = offset_to_common_key(key);
    let notes = track
        .notes
        .iter()
        .map(|n| TimedNote { pitch: shift_pitch(n.pitch, offset), ..*n })
        .collect();
    let mut out = QuantizedTrack::new(track.source_id.clone(), notes);
    out.key_offset = track.key_offset + offset;
    out
}
