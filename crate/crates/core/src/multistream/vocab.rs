use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CodecError;
use crate::midi_io::{QuantizedTrack, TimedNote};

const EPS: f64 = 1e-9;

/// Allowed note durations in whole notes, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DurationVocab {
    durations: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DurationVocab {
    type Error = CodecError;

    fn try_from(v: Vec<f64>) -> Result<Self, CodecError> {
        DurationVocab::new(v)
    }
}

impl From<DurationVocab> for Vec<f64> {
    fn from(v: DurationVocab) -> Self {
        v.durations
    }
}

impl DurationVocab {
    pub fn new(durations: Vec<f64>) -> Result<Self, CodecError> {
        if durations.is_empty()
            || durations.iter().any(|d| !d.is_finite() || *d <= 0.0)
            || durations.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CodecError::InvalidVocab);
        }
        Ok(DurationVocab { durations })
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.durations[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.durations
    }

    pub fn shortest(&self) -> f64 {
        self.durations[0]
    }

    pub fn longest(&self) -> f64 {
        self.durations[self.durations.len() - 1]
    }

    pub fn index_of(&self, duration: f64) -> Option<usize> {
        self.durations.iter().position(|&d| (d - duration).abs() < EPS)
    }

    /// Closest member; equidistant candidates resolve to the shorter one.
    pub fn nearest_index(&self, duration: f64) -> usize {
        let mut best = 0;
        for (i, &d) in self.durations.iter().enumerate() {
            if (d - duration).abs() < (self.durations[best] - duration).abs() - EPS {
                best = i;
            }
        }
        best
    }

    pub fn nearest(&self, duration: f64) -> f64 {
        self.durations[self.nearest_index(duration)]
    }

    /// Longest member not exceeding `gap`.
    pub fn longest_at_most(&self, gap: f64) -> Option<usize> {
        self.durations.iter().rposition(|&d| d <= gap + EPS)
    }
}

/// Smallest set of the most frequent corpus durations that covers at least
/// `coverage` of all notes. Frequency ties favour the shorter duration; the
/// grid step is always included.
pub fn derive_duration_vocab(corpus: &[QuantizedTrack], coverage: f64, grid: f64) -> Result<DurationVocab, CodecError> {
    if corpus.is_empty() {
        return Err(CodecError::EmptyCorpus);
    }
    // f64 bit patterns of positive numbers order like the numbers themselves
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    let mut total = 0usize;
    for n in corpus.iter().flat_map(|t| &t.notes) {
        *counts.entry(n.duration.to_bits()).or_default() += 1;
        total += 1;
    }
    let mut ranked: Vec<(f64, usize)> = counts.into_iter().map(|(bits, c)| (f64::from_bits(bits), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));

    let mut chosen = vec![grid];
    let mut covered = 0usize;
    for (d, c) in ranked {
        if total > 0 && covered as f64 / total as f64 >= coverage - EPS {
            break;
        }
        covered += c;
        if (d - grid).abs() > EPS {
            chosen.push(d);
        }
    }
    chosen.sort_by(f64::total_cmp);
    DurationVocab::new(chosen)
}

/// Replaces each note duration with its nearest vocabulary member.
pub fn snap_durations(track: &QuantizedTrack, vocab: &DurationVocab) -> QuantizedTrack {
    let notes = track.notes.iter().map(|n| TimedNote { duration: vocab.nearest(n.duration), ..*n }).collect();
    let mut out = QuantizedTrack::new(track.source_id.clone(), notes);
    out.key_offset = track.key_offset;
    out
}
