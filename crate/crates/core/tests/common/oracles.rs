//! Independent reference implementations the library is checked against.

use std::collections::{BTreeSet, HashSet};

use polystream::multistream::{decode, MultiStreamSequence, Pitch};
use polystream::seqmodel::{loss, ModelDims, ModelParams, Target, TrainingExample};
use rand::Rng;

/// Pitch-class sets of every dyad, triad and seventh chord counted as a
/// chord, in all twelve transpositions.
pub fn chord_vocabulary() -> Vec<BTreeSet<u8>> {
    let shapes: &[&[u8]] = &[
        &[0, 3],
        &[0, 4],
        &[0, 5],
        &[0, 7],
        &[0, 8],
        &[0, 9],
        &[0, 4, 7],
        &[0, 3, 7],
        &[0, 3, 6],
        &[0, 4, 8],
        &[0, 4, 7, 10],
        &[0, 4, 7, 11],
        &[0, 3, 7, 10],
        &[0, 3, 6, 10],
        &[0, 3, 6, 9],
    ];
    let mut out = Vec::new();
    for shape in shapes {
        for root in 0..12 {
            out.push(shape.iter().map(|i| (root + i) % 12).collect());
        }
    }
    out
}

/// MIDI pitches sounding at each note-set onset, from the decoded notes.
pub fn sounding(seq: &MultiStreamSequence) -> Vec<Vec<u8>> {
    let notes = decode(seq).unwrap().notes;
    seq.note_sets
        .iter()
        .map(|set| notes.iter().filter(|n| n.onset <= set.onset && set.onset < n.end()).map(|n| n.pitch).collect())
        .collect()
}

pub fn chord_oracle(seq: &MultiStreamSequence) -> f64 {
    let chords = chord_vocabulary();
    let hits = sounding(seq)
        .iter()
        .filter(|pitches| {
            let pcs: Vec<u8> = pitches.iter().map(|p| p % 12).collect::<BTreeSet<_>>().into_iter().collect();
            // every subset of the sounding pitch classes
            (1u32..1 << pcs.len()).any(|bits| {
                let subset: BTreeSet<u8> = (0..pcs.len()).filter(|i| bits >> i & 1 == 1).map(|i| pcs[i]).collect();
                chords.contains(&subset)
            })
        })
        .count();
    hits as f64 / seq.len() as f64
}

/// Per stream, the struck symbol a SUSTAIN continues, found by scanning back.
pub fn expanded(seq: &MultiStreamSequence, k: usize) -> Vec<(Pitch, usize)> {
    (0..seq.config.n_streams)
        .map(|s| {
            let sym = seq.note_sets[k].symbols[s];
            if sym.pitch != Pitch::Sustain {
                return (sym.pitch, sym.duration_index);
            }
            let origin = (0..k).rev().map(|j| seq.note_sets[j].symbols[s]).find(|x| x.pitch.is_strike()).unwrap();
            (origin.pitch, origin.duration_index)
        })
        .collect()
}

pub fn repetition_oracle(seq: &MultiStreamSequence) -> f64 {
    let repeats = (1..seq.len()).filter(|&k| expanded(seq, k) == expanded(seq, k - 1)).count();
    repeats as f64 / seq.len() as f64
}

pub fn struck_sets(seq: &MultiStreamSequence) -> Vec<BTreeSet<u8>> {
    seq.note_sets.iter().map(|s| s.strikes().map(|(_, p)| p).collect()).collect()
}

pub fn crosscorr_oracle(seq: &MultiStreamSequence, corpus: &[MultiStreamSequence], w: usize) -> f64 {
    let a = struck_sets(seq);
    let mut peak = 0.0f64;
    for song in corpus {
        let b = struck_sets(song);
        if b.len() < w {
            continue;
        }
        for i in 0..=a.len() - w {
            for j in 0..=b.len() - w {
                let mut inter = 0usize;
                let mut na = 0usize;
                let mut nb = 0usize;
                for k in 0..w {
                    inter += a[i + k].intersection(&b[j + k]).count();
                    na += a[i + k].len();
                    nb += b[j + k].len();
                }
                if inter > 0 {
                    peak = peak.max(inter as f64 / ((na * nb) as f64).sqrt());
                }
            }
        }
    }
    peak
}

/// Every multi-stream composition of `steps` grid steps, enumerated one
/// stream at a time and collected as distinct tuples.
pub fn brute_force_count(steps: usize, durations: &[usize], n_streams: usize, n_pitches: usize) -> usize {
    fn streams(left: usize, durations: &[usize], n_pitches: usize, prefix: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for &d in durations.iter().filter(|&&d| d <= left) {
            for p in 0..n_pitches {
                prefix.push((p, d));
                streams(left - d, durations, n_pitches, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut single = Vec::new();
    streams(steps, durations, n_pitches, &mut Vec::new(), &mut single);
    let mut all: HashSet<Vec<Vec<(usize, usize)>>> = single.iter().map(|s| vec![s.clone()]).collect();
    for _ in 1..n_streams {
        all = all
            .iter()
            .flat_map(|c| single.iter().map(move |s| {
                let mut c = c.clone();
                c.push(s.clone());
                c
            }))
            .collect();
    }
    all.len()
}

pub fn small_dims() -> ModelDims {
    ModelDims { n_streams: 3, n_durations: 4, plan_width: 3, layers: 2, units: 16 }
}

pub fn random_example<R: Rng>(rng: &mut R, dims: &ModelDims, context_len: usize) -> TrainingExample {
    let block = 90 + dims.n_durations;
    let context = (0..context_len)
        .map(|_| {
            (0..dims.n_streams)
                .flat_map(|s| {
                    let p = rng.gen_range(0..90);
                    let d = rng.gen_range(0..dims.n_durations);
                    [(s * block + p) as u32, (s * block + 90 + d) as u32]
                })
                .collect()
        })
        .collect();
    let mut plan = vec![0.0; dims.plan_width];
    plan[rng.gen_range(0..dims.plan_width)] = 1.0;
    let target = Target {
        pitch: (0..dims.n_streams).map(|_| rng.gen_range(0..90)).collect(),
        duration: (0..dims.n_streams).map(|_| rng.gen_range(0..dims.n_durations)).collect(),
        masked: vec![false; dims.n_streams],
    };
    TrainingExample { context, plan, target, song: 0 }
}

pub fn example_loss(params: &ModelParams, ex: &TrainingExample) -> f64 {
    loss(&params.forward_sparse(&ex.inputs(params)), &ex.target)
}


/// Fourth-order central difference of the loss in parameter `i`.
pub fn numeric_derivative(params: &ModelParams, ex: &TrainingExample, i: usize, h: f64) -> f64 {
    let at = |offset: f64| {
        let mut p = params.clone();
        p.data_mut()[i] += offset;
        example_loss(&p, ex)
    };
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}
