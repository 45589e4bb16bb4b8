//! The multi-stream note representation.
//!
//! A polyphonic track becomes a sequence of note-sets. Each note-set carries
//! one symbol per stream: a struck pitch with a duration, SUSTAIN (the
//! stream is still holding an earlier note) or REST. New notes go to the
//! lowest free streams, highest pitch first. A new note-set begins at the
//! earliest time any symbol of the running timeline ends, so SUSTAIN is
//! fully determined by the durations struck so far.

mod analytics;
mod text;
mod timeline;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi_io::{QuantizedTrack, TimedNote, HIGHEST_PITCH, LOWEST_PITCH};

pub use analytics::{
    count_multistream_exact, log10_big, log_count_multistream_approx, log_count_piano_roll, polyphony_profile,
    sparsity_log_ratio, PolyphonyProfile,
};
pub use text::{parse_sequence, write_sequence};
pub use timeline::Timeline;
pub use vocab::{derive_duration_vocab, snap_durations, DurationVocab};

/// Number of playable piano pitches.
pub const PLAYABLE_PITCHES: usize = 88;
/// Pitch classes per stream: the playable pitches, SUSTAIN and REST.
pub const PITCH_CLASSES: usize = PLAYABLE_PITCHES + 2;
pub const SUSTAIN_CLASS: usize = PLAYABLE_PITCHES;
pub const REST_CLASS: usize = PLAYABLE_PITCHES + 1;
pub const DEFAULT_STREAMS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("duration vocabulary must be non-empty, positive and strictly increasing")]
    InvalidVocab,
    #[error("cannot derive a duration vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("at onset {onset}: {needed} new notes but only {free} free streams")]
    Polyphony { onset: f64, needed: usize, free: usize },
    #[error("note at onset {onset} has duration {duration} which is not in the vocabulary")]
    DurationNotInVocab { onset: f64, duration: f64 },
    #[error("gap of {gap} at onset {onset} cannot be filled with vocabulary durations")]
    Unrepresentable { onset: f64, gap: f64 },
    #[error("pitch {pitch} struck twice at onset {onset}")]
    DuplicateStrike { onset: f64, pitch: u8 },
    #[error("note-set {note_set}, stream {stream}: {reason}")]
    Integrity { note_set: usize, stream: usize, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{0} is not a multiple of the 1/16 grid")]
    OffGrid(f64),
}

/// Pitch symbol of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pitch {
    /// Playable pitch index, 0 = A0 (MIDI 21).
    Note(u8),
    Sustain,
    Rest,
}

impl Pitch {
    /// Maps a MIDI note number in the piano range to a playable pitch.
    pub fn from_midi(midi: u8) -> Pitch {
        debug_assert!((LOWEST_PITCH..=HIGHEST_PITCH).contains(&midi));
        Pitch::Note(midi - LOWEST_PITCH)
    }

    pub fn midi(self) -> Option<u8> {
        match self {
            Pitch::Note(i) => Some(i + LOWEST_PITCH),
            _ => None,
        }
    }

    /// Output class index: playable 0..88, SUSTAIN 88, REST 89.
    pub fn class_index(self) -> usize {
        match self {
            Pitch::Note(i) => i as usize,
            Pitch::Sustain => SUSTAIN_CLASS,
            Pitch::Rest => REST_CLASS,
        }
    }

    pub fn from_class_index(class: usize) -> Option<Pitch> {
        match class {
            c if c < PLAYABLE_PITCHES => Some(Pitch::Note(c as u8)),
            SUSTAIN_CLASS => Some(Pitch::Sustain),
            REST_CLASS => Some(Pitch::Rest),
            _ => None,
        }
    }

    pub fn is_strike(self) -> bool {
        matches!(self, Pitch::Note(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSymbol {
    pub pitch: Pitch,
    pub duration_index: usize,
}

impl StreamSymbol {
    pub fn new(pitch: Pitch, duration_index: usize) -> Self {
        StreamSymbol { pitch, duration_index }
    }
}

/// One symbol per stream, index 0 = lowest stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteSet {
    pub onset: f64,
    pub symbols: Vec<StreamSymbol>,
}

impl NoteSet {
    /// Every stream resting for `vocab[duration_index]`.
    pub fn all_rest(onset: f64, n_streams: usize, duration_index: usize) -> Self {
        NoteSet { onset, symbols: vec![StreamSymbol::new(Pitch::Rest, duration_index); n_streams] }
    }

    pub fn strikes(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.symbols.iter().enumerate().filter_map(|(s, sym)| sym.pitch.midi().map(|m| (s, m)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    pub n_streams: usize,
    pub vocab: DurationVocab,
}

impl RepresentationConfig {
    pub fn new(n_streams: usize, vocab: DurationVocab) -> Self {
        assert!(n_streams >= 1, "at least one stream is required");
        RepresentationConfig { n_streams, vocab }
    }

    pub fn n_durations(&self) -> usize {
        self.vocab.len()
    }

    /// `n_s * (90 + n_d)`.
    pub fn frame_len(&self) -> usize {
        self.n_streams * (PITCH_CLASSES + self.n_durations())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStreamSequence {
    pub config: RepresentationConfig,
    pub note_sets: Vec<NoteSet>,
}

impl MultiStreamSequence {
    pub fn new(config: RepresentationConfig) -> Self {
        MultiStreamSequence { config, note_sets: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.note_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.note_sets.is_empty()
    }

    /// Checks symbol ranges, the onset timeline and SUSTAIN determinism.
    pub fn validate(&self) -> Result<(), CodecError> {
        let n = self.config.n_streams;
        let Some(first) = self.note_sets.first() else { return Ok(()) };
        let mut timeline = Timeline::new(n, first.onset);
        for (k, set) in self.note_sets.iter().enumerate() {
            if set.symbols.len() != n {
                return Err(CodecError::Integrity {
                    note_set: k,
                    stream: 0,
                    reason: format!("{} symbols for {n} streams", set.symbols.len()),
                });
            }
            if set.onset != timeline.onset() {
                return Err(CodecError::Integrity {
                    note_set: k,
                    stream: 0,
                    reason: format!("onset {} but the timeline gives {}", set.onset, timeline.onset()),
                });
            }
            let held = timeline.held();
            for (s, sym) in set.symbols.iter().enumerate() {
                if held[s] != (sym.pitch == Pitch::Sustain) {
                    return Err(CodecError::Integrity {
                        note_set: k,
                        stream: s,
                        reason: if held[s] {
                            "stream is holding a note but does not show SUSTAIN".into()
                        } else {
                            "SUSTAIN without a sounding note".into()
                        },
                    });
                }
                if sym.pitch == Pitch::Sustain && sym.duration_index != timeline.sustain_duration_index(s, &self.config.vocab) {
                    return Err(CodecError::Integrity {
                        note_set: k,
                        stream: s,
                        reason: "SUSTAIN duration differs from the remaining time".into(),
                    });
                }
            }
            timeline.advance(k, set, &self.config.vocab)?;
        }
        Ok(())
    }

    /// Transcription-only properties on top of [`validate`](Self::validate):
    /// strikes fill the lowest free streams in strictly descending pitch, and
    /// every REST ends exactly at the next note-set.
    pub fn check_canonical(&self) -> Result<(), CodecError> {
        self.validate()?;
        let vocab = &self.config.vocab;
        for (k, set) in self.note_sets.iter().enumerate() {
            let mut last_strike: Option<u8> = None;
            let mut seen_rest = false;
            for (s, sym) in set.symbols.iter().enumerate() {
                let err = |reason: &str| CodecError::Integrity { note_set: k, stream: s, reason: reason.into() };
                match sym.pitch {
                    Pitch::Note(p) => {
                        if seen_rest {
                            return Err(err("strike placed above a resting stream"));
                        }
                        if last_strike.is_some_and(|q| p >= q) {
                            return Err(err("strikes not in descending pitch order"));
                        }
                        last_strike = Some(p);
                    }
                    Pitch::Rest => {
                        seen_rest = true;
                        if let Some(next) = self.note_sets.get(k + 1) {
                            if set.onset + vocab.get(sym.duration_index) != next.onset {
                                return Err(err("REST does not end at the next note-set"));
                            }
                        }
                    }
                    Pitch::Sustain => {}
                }
            }
        }
        Ok(())
    }
}

/// Limits instantaneous polyphony to `n_streams` by dropping the lowest new
/// strikes wherever too few streams are free. Returns the number dropped.
pub fn limit_polyphony(track: &QuantizedTrack, n_streams: usize) -> (QuantizedTrack, usize) {
    let mut kept: Vec<TimedNote> = Vec::with_capacity(track.notes.len());
    let mut sounding: Vec<f64> = Vec::new();
    let mut dropped = 0;
    let mut i = 0;
    let notes = &track.notes;
    while i < notes.len() {
        let t = notes[i].onset;
        let mut j = i;
        while j < notes.len() && notes[j].onset == t {
            j += 1;
        }
        sounding.retain(|&end| end > t);
        let free = n_streams.saturating_sub(sounding.len());
        // notes are sorted by descending pitch within an onset
        for (rank, n) in notes[i..j].iter().enumerate() {
            if rank < free {
                kept.push(*n);
                sounding.push(n.end());
            } else {
                dropped += 1;
            }
        }
        i = j;
    }
    let mut out = QuantizedTrack::new(track.source_id.clone(), kept);
    out.key_offset = track.key_offset;
    (out, dropped)
}

/// Splits a track into note-sets.
///
/// Every note duration must be a vocabulary member (see [`snap_durations`]).
/// Gaps that are not a single vocabulary duration are bridged with chained
/// pure-rest note-sets, greedily using the longest duration that fits.
pub fn transcribe(track: &QuantizedTrack, config: &RepresentationConfig) -> Result<MultiStreamSequence, CodecError> {
    let n = config.n_streams;
    let vocab = &config.vocab;
    let mut notes: Vec<(TimedNote, usize)> = Vec::with_capacity(track.notes.len());
    for note in &track.notes {
        let idx = vocab
            .index_of(note.duration)
            .ok_or(CodecError::DurationNotInVocab { onset: note.onset, duration: note.duration })?;
        notes.push((*note, idx));
    }
    notes.sort_by(|(a, _), (b, _)| a.onset.total_cmp(&b.onset).then(b.pitch.cmp(&a.pitch)));
    for w in notes.windows(2) {
        if w[0].0.onset == w[1].0.onset && w[0].0.pitch == w[1].0.pitch {
            return Err(CodecError::DuplicateStrike { onset: w[0].0.onset, pitch: w[0].0.pitch });
        }
    }

    let mut seq = MultiStreamSequence::new(config.clone());
    let Some(first) = notes.first() else { return Ok(seq) };
    let mut t = first.0.onset;
    let mut busy_until = vec![f64::NEG_INFINITY; n];
    let mut next = 0;
    loop {
        if next == notes.len() && busy_until.iter().all(|&b| b <= t) {
            break;
        }
        let start = next;
        while next < notes.len() && notes[next].0.onset == t {
            next += 1;
        }
        let strikes = &notes[start..next];
        let free: Vec<usize> = (0..n).filter(|&s| busy_until[s] <= t).collect();
        if strikes.len() > free.len() {
            return Err(CodecError::Polyphony { onset: t, needed: strikes.len(), free: free.len() });
        }

        let mut symbols = Vec::with_capacity(n);
        for s in 0..n {
            if busy_until[s] > t {
                symbols.push(StreamSymbol::new(Pitch::Sustain, vocab.nearest_index(busy_until[s] - t)));
            } else {
                symbols.push(StreamSymbol::new(Pitch::Rest, 0));
            }
        }
        for (&s, (note, idx)) in free.iter().zip(strikes) {
            symbols[s] = StreamSymbol::new(Pitch::from_midi(note.pitch), *idx);
            busy_until[s] = note.end();
        }

        let next_onset = notes.get(next).map(|(n, _)| n.onset).unwrap_or(f64::INFINITY);
        let next_event = busy_until.iter().copied().filter(|&b| b > t).fold(next_onset, f64::min);
        let resting = free.len() > strikes.len();
        let step_to = if resting {
            let gap = next_event - t;
            let idx = vocab.longest_at_most(gap).ok_or(CodecError::Unrepresentable { onset: t, gap })?;
            for sym in symbols.iter_mut().filter(|s| s.pitch == Pitch::Rest) {
                sym.duration_index = idx;
            }
            t + vocab.get(idx)
        } else {
            next_event
        };
        seq.note_sets.push(NoteSet { onset: t, symbols });
        t = step_to;
    }
    Ok(seq)
}

/// Recovers the struck notes of a sequence.
pub fn decode(seq: &MultiStreamSequence) -> Result<QuantizedTrack, CodecError> {
    let n = seq.config.n_streams;
    let vocab = &seq.config.vocab;
    let mut busy_until = vec![f64::NEG_INFINITY; n];
    let mut notes = Vec::new();
    for (k, set) in seq.note_sets.iter().enumerate() {
        if set.symbols.len() != n {
            return Err(CodecError::Integrity {
                note_set: k,
                stream: 0,
                reason: format!("{} symbols for {n} streams", set.symbols.len()),
            });
        }
        for (s, sym) in set.symbols.iter().enumerate() {
            if sym.duration_index >= vocab.len() {
                return Err(CodecError::Integrity { note_set: k, stream: s, reason: "duration index out of range".into() });
            }
            match sym.pitch {
                Pitch::Sustain if busy_until[s] <= set.onset => {
                    return Err(CodecError::Integrity {
                        note_set: k,
                        stream: s,
                        reason: "SUSTAIN without a sounding note".into(),
                    });
                }
                Pitch::Sustain => {}
                Pitch::Note(p) => {
                    if p as usize >= PLAYABLE_PITCHES {
                        return Err(CodecError::Integrity { note_set: k, stream: s, reason: format!("pitch index {p}") });
                    }
                    if busy_until[s] > set.onset {
                        return Err(CodecError::Integrity {
                            note_set: k,
                            stream: s,
                            reason: "strike while the stream is still sounding".into(),
                        });
                    }
                    let d = vocab.get(sym.duration_index);
                    busy_until[s] = set.onset + d;
                    notes.push(TimedNote::new(p + LOWEST_PITCH, set.onset, d));
                }
                Pitch::Rest => {
                    if busy_until[s] > set.onset {
                        return Err(CodecError::Integrity {
                            note_set: k,
                            stream: s,
                            reason: "REST while the stream is still sounding".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(QuantizedTrack::new("decoded", notes))
}

/// Hot positions of the one-hot frame of a note-set, ascending.
pub fn frame_hot_indices(set: &NoteSet, n_durations: usize) -> Vec<usize> {
    let block = PITCH_CLASSES + n_durations;
    let mut hot = Vec::with_capacity(set.symbols.len() * 2);
    for (s, sym) in set.symbols.iter().enumerate() {
        hot.push(s * block + sym.pitch.class_index());
        hot.push(s * block + PITCH_CLASSES + sym.duration_index);
    }
    hot
}

/// Dense one-hot frame: per stream a 90-wide pitch block then an
/// `n_d`-wide duration block.
pub fn encode_frame(set: &NoteSet, config: &RepresentationConfig) -> Vec<f64> {
    let mut frame = vec![0.0; config.frame_len()];
    for i in frame_hot_indices(set, config.n_durations()) {
        frame[i] = 1.0;
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(ds: &[f64]) -> DurationVocab {
        DurationVocab::new(ds.to_vec()).unwrap()
    }

    fn cfg(n: usize, ds: &[f64]) -> RepresentationConfig {
        RepresentationConfig::new(n, vocab(ds))
    }

    fn track(notes: &[(u8, f64, f64)]) -> QuantizedTrack {
        QuantizedTrack::new("t", notes.iter().map(|&(p, o, d)| TimedNote::new(p, o, d)).collect())
    }

    const V: &[f64] = &[0.0625, 0.125, 0.25, 0.5, 1.0];

    #[test]
    fn monophonic_melody_uses_stream_zero() {
        let t = track(&[(60, 0.0, 0.25), (62, 0.25, 0.25), (64, 0.5, 0.5)]);
        let seq = transcribe(&t, &cfg(5, V)).unwrap();
        assert_eq!(seq.len(), 3);
        for set in &seq.note_sets {
            assert!(set.symbols[0].pitch.is_strike());
            assert!(set.symbols[1..].iter().all(|s| s.pitch == Pitch::Rest));
        }
        seq.check_canonical().unwrap();
    }

    #[test]
    fn chord_is_sorted_descending() {
        let t = track(&[(60, 0.0, 0.25), (64, 0.0, 0.25), (67, 0.0, 0.25)]);
        let seq = transcribe(&t, &cfg(5, V)).unwrap();
        let p: Vec<_> = seq.note_sets[0].symbols.iter().map(|s| s.pitch).collect();
        assert_eq!(p[..3], [Pitch::from_midi(67), Pitch::from_midi(64), Pitch::from_midi(60)]);
        assert_eq!(p[3], Pitch::Rest);
    }

    #[test]
    fn held_whole_note_sustains() {
        let t = track(&[(72, 0.0, 1.0), (60, 0.0, 0.25)]);
        let seq = transcribe(&t, &cfg(2, V)).unwrap();
        assert_eq!(seq.note_sets[1].onset, 0.25);
        assert_eq!(seq.note_sets[1].symbols[0].pitch, Pitch::Sustain);
        assert_eq!(seq.note_sets[1].symbols[1].pitch, Pitch::Rest);
        // remaining 3/4 snaps to 1/2 (ties go shorter; 3/4 is equidistant from 1/2 and 1)
        assert_eq!(seq.config.vocab.get(seq.note_sets[1].symbols[0].duration_index), 0.5);
    }

    #[test]
    fn long_gaps_chain_rest_sets() {
        let t = track(&[(60, 0.0, 0.25), (62, 2.75, 0.25)]);
        let seq = transcribe(&t, &cfg(1, V)).unwrap();
        let onsets: Vec<f64> = seq.note_sets.iter().map(|s| s.onset).collect();
        assert_eq!(onsets, vec![0.0, 0.25, 1.25, 2.25, 2.75]);
        seq.check_canonical().unwrap();
        assert_eq!(decode(&seq).unwrap().notes, t.notes);
    }

    #[test]
    fn overflow_names_the_onset() {
        let t = track(&[(60, 0.0, 0.25), (64, 0.0, 0.25), (67, 0.0, 0.25)]);
        assert_eq!(
            transcribe(&t, &cfg(2, V)),
            Err(CodecError::Polyphony { onset: 0.0, needed: 3, free: 2 })
        );
        let (limited, dropped) = limit_polyphony(&t, 2);
        assert_eq!(dropped, 1);
        assert_eq!(limited.notes.iter().map(|n| n.pitch).collect::<Vec<_>>(), vec![67, 64]);
    }

    #[test]
    fn foreign_durations_are_rejected() {
        let t = track(&[(60, 0.0, 0.1875)]);
        assert!(matches!(transcribe(&t, &cfg(1, V)), Err(CodecError::DurationNotInVocab { .. })));
    }

    #[test]
    fn unbridgeable_gap_is_rejected() {
        let t = track(&[(60, 0.0, 0.125), (62, 0.1875, 0.125)]);
        assert!(matches!(transcribe(&t, &cfg(1, &[0.125])), Err(CodecError::Unrepresentable { .. })));
    }

    #[test]
    fn decode_rejects_orphan_sustain() {
        let c = cfg(2, V);
        let mut seq = MultiStreamSequence::new(c);
        seq.note_sets.push(NoteSet {
            onset: 0.0,
            symbols: vec![StreamSymbol::new(Pitch::Sustain, 0), StreamSymbol::new(Pitch::Rest, 0)],
        });
        assert!(matches!(decode(&seq), Err(CodecError::Integrity { note_set: 0, stream: 0, .. })));
    }

    #[test]
    fn all_rest_decodes_to_nothing() {
        let c = cfg(3, V);
        let mut seq = MultiStreamSequence::new(c);
        for k in 0..4 {
            seq.note_sets.push(NoteSet::all_rest(k as f64 * 0.25, 3, 2));
        }
        seq.validate().unwrap();
        assert!(decode(&seq).unwrap().notes.is_empty());
    }

    #[test]
    fn frame_shape() {
        let c = cfg(5, &[0.0625, 0.125, 0.1875, 0.25, 0.375, 0.5, 0.75, 1.0, 1.5, 2.0]);
        assert_eq!(c.frame_len(), 500);
        let rest = NoteSet::all_rest(0.0, 5, 0);
        let f = encode_frame(&rest, &c);
        assert_eq!(f.iter().filter(|&&x| x == 1.0).count(), 10);
        for s in 0..5 {
            assert_eq!(f[s * 100 + REST_CLASS], 1.0);
        }
    }

    #[test]
    fn pitch_class_indices() {
        assert_eq!(Pitch::from_midi(21).class_index(), 0);
        assert_eq!(Pitch::from_midi(108).class_index(), 87);
        assert_eq!(Pitch::from_class_index(88), Some(Pitch::Sustain));
        assert_eq!(Pitch::from_class_index(89), Some(Pitch::Rest));
        assert_eq!(Pitch::from_class_index(90), None);
    }

    #[test]
    fn validate_catches_wrong_onset() {
        let t = track(&[(60, 0.0, 0.25), (62, 0.25, 0.25)]);
        let mut seq = transcribe(&t, &cfg(1, V)).unwrap();
        seq.note_sets[1].onset = 0.5;
        assert!(seq.validate().is_err());
    }
}
