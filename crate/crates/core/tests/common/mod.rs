#![allow(dead_code)]

pub mod oracles;

use polystream::midi_io::{QuantizedTrack, TimedNote};
use polystream::multistream::{DurationVocab, MultiStreamSequence, NoteSet, Pitch, RepresentationConfig, StreamSymbol, Timeline};
use rand::seq::SliceRandom;
use rand::Rng;

pub const VOCAB: [f64; 5] = [0.0625, 0.125, 0.25, 0.5, 1.0];

pub fn config(n_streams: usize, durations: &[f64]) -> RepresentationConfig {
    RepresentationConfig::new(n_streams, DurationVocab::new(durations.to_vec()).unwrap())
}

/// Random track on the 1/16 grid, durations drawn from `durations`,
/// instantaneous polyphony not checked.
pub fn random_track<R: Rng>(rng: &mut R, n_notes: usize, durations: &[f64], pitches: std::ops::Range<u8>) -> QuantizedTrack {
    let notes = (0..n_notes)
        .map(|_| {
            let pitch = rng.gen_range(pitches.clone());
            let onset = rng.gen_range(0..64) as f64 / 16.0;
            TimedNote::new(pitch, onset, *durations.choose(rng).unwrap())
        })
        .collect();
    QuantizedTrack::new("random", notes)
}

/// Random sequence in the exact layout `transcribe` produces: strikes in the
/// lowest free streams in descending pitch order, rests ending at the next
/// note-set, long silences split greedily.
pub fn random_canonical<R: Rng>(rng: &mut R, cfg: &RepresentationConfig, steps: usize, pitches: &[u8]) -> MultiStreamSequence {
    let n = cfg.n_streams;
    let vocab = &cfg.vocab;
    let mut seq = MultiStreamSequence::new(cfg.clone());
    let mut tl = Timeline::new(n, 0.0);
    let mut must_strike = true;
    let mut k = 0;
    loop {
        let held = tl.held();
        let free: Vec<usize> = (0..n).filter(|&s| !held[s]).collect();
        let draining = k >= steps;
        if draining && !must_strike && free.len() == n {
            break;
        }
        let max_strikes = free.len().min(pitches.len());
        let strikes = if draining && !must_strike {
            0
        } else if must_strike {
            rng.gen_range(1..=max_strikes)
        } else {
            rng.gen_range(0..=max_strikes)
        };
        let t = tl.onset();
        let mut chosen: Vec<u8> = pitches.choose_multiple(rng, strikes).copied().collect();
        chosen.sort_unstable_by(|a, b| b.cmp(a));
        let mut symbols: Vec<StreamSymbol> = (0..n)
            .map(|s| {
                if held[s] {
                    StreamSymbol::new(Pitch::Sustain, tl.sustain_duration_index(s, vocab))
                } else {
                    StreamSymbol::new(Pitch::Rest, 0)
                }
            })
            .collect();
        let mut sounding_end = (0..n).filter(|&s| held[s]).map(|s| t + tl.remaining(s)).fold(f64::INFINITY, f64::min);
        for (&s, &p) in free.iter().zip(&chosen) {
            let d = rng.gen_range(0..vocab.len());
            symbols[s] = StreamSymbol::new(Pitch::from_midi(p), d);
            sounding_end = sounding_end.min(t + vocab.get(d));
        }
        must_strike = false;
        if free.len() > strikes {
            let greedy = vocab.longest_at_most(sounding_end - t).unwrap();
            let idx = if draining || rng.gen_bool(0.5) { greedy } else { rng.gen_range(0..=greedy) };
            if idx != greedy || (strikes == 0 && free.len() == n) {
                must_strike = true;
            }
            for sym in symbols.iter_mut().filter(|s| s.pitch == Pitch::Rest) {
                sym.duration_index = idx;
            }
        }
        let set = NoteSet { onset: t, symbols };
        tl.advance(seq.len(), &set, vocab).unwrap();
        seq.note_sets.push(set);
        k += 1;
    }
    seq
}
