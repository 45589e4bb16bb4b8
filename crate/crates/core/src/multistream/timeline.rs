use super::{CodecError, DurationVocab, NoteSet, Pitch};

/// Running per-stream state while walking a sequence of note-sets.
///
/// Holds, for each stream, the end time of the note it last struck. A stream
/// is *held* at the current onset when that end lies strictly later; held
/// streams must show SUSTAIN.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    onset: f64,
    busy_until: Vec<f64>,
    pitch: Vec<Option<u8>>,
}

impl Timeline {
    pub fn new(n_streams: usize, onset: f64) -> Self {
        Timeline { onset, busy_until: vec![f64::NEG_INFINITY; n_streams], pitch: vec![None; n_streams] }
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn n_streams(&self) -> usize {
        self.busy_until.len()
    }

    pub fn is_held(&self, stream: usize) -> bool {
        self.busy_until[stream] > self.onset
    }

    pub fn held(&self) -> Vec<bool> {
        (0..self.n_streams()).map(|s| self.is_held(s)).collect()
    }

    /// MIDI pitch sounding in a held stream.
    pub fn held_pitch(&self, stream: usize) -> Option<u8> {
        if self.is_held(stream) {
            self.pitch[stream]
        } else {
            None
        }
    }

    /// Time left on the held note of `stream`, or 0.
    pub fn remaining(&self, stream: usize) -> f64 {
        (self.busy_until[stream] - self.onset).max(0.0)
    }

    /// Vocabulary index recorded for a SUSTAIN in `stream`.
    pub fn sustain_duration_index(&self, stream: usize, vocab: &DurationVocab) -> usize {
        vocab.nearest_index(self.remaining(stream))
    }

    /// Applies a note-set at the current onset and moves to the next onset:
    /// the earliest end, after the current onset, of any held note or of any
    /// REST in this set.
    pub fn advance(&mut self, index: usize, set: &NoteSet, vocab: &DurationVocab) -> Result<f64, CodecError> {
        let mut next = f64::INFINITY;
        for (s, sym) in set.symbols.iter().enumerate() {
            let err = |reason: &str| CodecError::Integrity { note_set: index, stream: s, reason: reason.into() };
            if sym.duration_index >= vocab.len() {
                return Err(err("duration index out of range"));
            }
            let d = vocab.get(sym.duration_index);
            match sym.pitch {
                Pitch::Sustain => {
                    if !self.is_held(s) {
                        return Err(err("SUSTAIN without a sounding note"));
                    }
                }
                Pitch::Note(_) | Pitch::Rest if self.is_held(s) => {
                    return Err(err("stream is holding a note but does not show SUSTAIN"));
                }
                Pitch::Note(_) => {
                    self.busy_until[s] = self.onset + d;
                    self.pitch[s] = sym.pitch.midi();
                }
                Pitch::Rest => {
                    next = next.min(self.onset + d);
                }
            }
        }
        for &b in &self.busy_until {
            if b > self.onset {
                next = next.min(b);
            }
        }
        self.onset = next;
        Ok(next)
    }
}
