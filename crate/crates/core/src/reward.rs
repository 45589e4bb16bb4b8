//! Seven-attribute scoring of compositions.
//!
//! Every attribute yields a raw measurement and a score in `[0, 1]`; the
//! total is their sum. A composition is *good* when the total strictly
//! exceeds the configured threshold (5.0 by default).

use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multistream::{CodecError, MultiStreamSequence, Pitch, Timeline, PLAYABLE_PITCHES};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid sequence: {0}")]
    Invalid(#[from] CodecError),
    #[error("invalid reward configuration: {0}")]
    Config(String),
    #[error("calibration needs at least one composition")]
    EmptyCalibrationSet,
}

/// Interval sets (semitones above a root) counted as chords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChordTemplates {
    /// Consonant dyads by interval.
    pub dyads: Vec<u8>,
    pub triads: Vec<Vec<u8>>,
    pub sevenths: Vec<Vec<u8>>,
}

impl Default for ChordTemplates {
    fn default() -> Self {
        ChordTemplates {
            dyads: vec![3, 4, 5, 7, 8, 9],
            triads: vec![vec![0, 4, 7], vec![0, 3, 7], vec![0, 3, 6], vec![0, 4, 8]],
            sevenths: vec![vec![0, 4, 7, 10], vec![0, 4, 7, 11], vec![0, 3, 7, 10], vec![0, 3, 6, 10], vec![0, 3, 6, 9]],
        }
    }
}

impl ChordTemplates {
    /// Every template as a 12-bit pitch-class mask rooted at C.
    pub fn masks(&self) -> Vec<u16> {
        let mut out: Vec<u16> = self.dyads.iter().map(|&i| 1 | 1 << (i % 12)).collect();
        for t in self.triads.iter().chain(&self.sevenths) {
            out.push(t.iter().fold(0u16, |m, &i| m | 1 << (i % 12)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub chords: ChordTemplates,
    pub theta_extreme: f64,
    pub theta_repetition: f64,
    pub theta_rest_duration: f64,
    pub theta_rest_count: f64,
    /// Cross-correlation peak at or below which the score is 1.
    pub crosscorr_baseline: f64,
    /// Window length in note-sets.
    pub window: usize,
    pub good_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            chords: ChordTemplates::default(),
            theta_extreme: 0.25,
            theta_repetition: 0.30,
            theta_rest_duration: 0.40,
            theta_rest_count: 0.40,
            crosscorr_baseline: 0.5,
            window: 16,
            good_threshold: 5.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let thetas = [self.theta_extreme, self.theta_repetition, self.theta_rest_duration, self.theta_rest_count];
        if thetas.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(RewardError::Config("thresholds must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.crosscorr_baseline) {
            return Err(RewardError::Config("cross-correlation baseline must lie in [0, 1)".into()));
        }
        if self.window < 4 {
            return Err(RewardError::Config("window must be at least 4 note-sets".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub raw: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub chords: Attribute,
    pub entropy: Attribute,
    pub extreme_durations: Attribute,
    pub repetition: Attribute,
    pub rest_duration: Attribute,
    pub rest_count: Attribute,
    pub crosscorr: Attribute,
    pub total: f64,
    pub is_good: bool,
}

impl RewardBreakdown {
    pub fn attributes(&self) -> [(&'static str, Attribute); 7] {
        [
            ("chords", self.chords),
            ("entropy", self.entropy),
            ("extreme_durations", self.extreme_durations),
            ("repetition", self.repetition),
            ("rest_duration", self.rest_duration),
            ("rest_count", self.rest_count),
            ("crosscorr", self.crosscorr),
        ]
    }
}

/// Flat `key=value` lines.
impl fmt::Display for RewardBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, a) in self.attributes() {
            writeln!(f, "{name}.raw={}", a.raw)?;
            writeln!(f, "{name}.score={}", a.score)?;
        }
        writeln!(f, "total={}", self.total)?;
        writeln!(f, "is_good={}", self.is_good)
    }
}

pub fn is_good(total: f64, threshold: f64) -> bool {
    total > threshold
}

fn penalty(raw: f64, theta: f64) -> f64 {
    1.0 - (raw / theta).clamp(0.0, 1.0)
}

/// Per note-set facts gathered in one walk over a valid sequence.
struct Walk {
    /// Pitch classes sounding at each onset, struck or held.
    sounding_pc: Vec<u16>,
    /// MIDI pitches struck at each onset.
    struck: Vec<Vec<u8>>,
    /// Per stream `(pitch class index, duration index)` with SUSTAIN
    /// replaced by the held note.
    expanded: Vec<Vec<(usize, usize)>>,
    spans: Vec<f64>,
}

fn walk(seq: &MultiStreamSequence) -> Result<Walk, RewardError> {
    let n = seq.config.n_streams;
    let vocab = &seq.config.vocab;
    let mut tl = Timeline::new(n, seq.note_sets.first().map_or(0.0, |s| s.onset));
    let mut held_symbol = vec![(0usize, 0usize); n];
    let mut w = Walk { sounding_pc: Vec::new(), struck: Vec::new(), expanded: Vec::new(), spans: Vec::new() };
    for (k, set) in seq.note_sets.iter().enumerate() {
        let mut pcs = 0u16;
        let mut struck = Vec::new();
        let mut expanded = Vec::with_capacity(n);
        for (s, sym) in set.symbols.iter().enumerate() {
            match sym.pitch {
                Pitch::Note(_) => {
                    let midi = sym.pitch.midi().expect("note has a pitch");
                    pcs |= 1 << (midi % 12);
                    struck.push(midi);
                    held_symbol[s] = (sym.pitch.class_index(), sym.duration_index);
                    expanded.push(held_symbol[s]);
                }
                Pitch::Sustain => {
                    if let Some(midi) = tl.held_pitch(s) {
                        pcs |= 1 << (midi % 12);
                    }
                    expanded.push(held_symbol[s]);
                }
                Pitch::Rest => expanded.push((sym.pitch.class_index(), sym.duration_index)),
            }
        }
        let onset = tl.onset();
        let next = tl.advance(k, set, vocab)?;
        w.spans.push(next - onset);
        w.sounding_pc.push(pcs);
        w.struck.push(struck);
        w.expanded.push(expanded);
    }
    Ok(w)
}

fn contains_template(pcs: u16, templates: &[u16]) -> bool {
    templates.iter().any(|&t| {
        (0..12).any(|r| {
            let rot = ((t << r) | (t >> (12 - r))) & 0x0fff;
            rot & pcs == rot
        })
    })
}

/// Fraction of note-sets whose sounding pitch classes contain a chord template.
pub fn chord_incidence(seq: &MultiStreamSequence, templates: &ChordTemplates) -> Result<Attribute, RewardError> {
    let w = walk(seq)?;
    Ok(chords_of(&w, &templates.masks()))
}

fn chords_of(w: &Walk, masks: &[u16]) -> Attribute {
    if w.sounding_pc.is_empty() {
        return Attribute { raw: 0.0, score: 0.0 };
    }
    let hits = w.sounding_pc.iter().filter(|&&p| contains_template(p, masks)).count();
    let raw = hits as f64 / w.sounding_pc.len() as f64;
    Attribute { raw, score: raw }
}

/// Normalized Shannon entropy of struck pitches.
pub fn pitch_entropy(seq: &MultiStreamSequence) -> Result<Attribute, RewardError> {
    Ok(entropy_of(&walk(seq)?))
}

fn entropy_of(w: &Walk) -> Attribute {
    let mut counts = [0usize; 128];
    let mut total = 0usize;
    for &p in w.struck.iter().flatten() {
        counts[p as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return Attribute { raw: 0.0, score: 0.0 };
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    let raw = h / (PLAYABLE_PITCHES as f64).ln();
    Attribute { raw, score: raw.clamp(0.0, 1.0) }
}

/// Fraction of struck notes at the shortest or longest vocabulary duration.
pub fn extreme_duration_incidence(seq: &MultiStreamSequence, theta: f64) -> Attribute {
    let last = seq.config.vocab.len().saturating_sub(1);
    let mut strikes = 0usize;
    let mut extreme = 0usize;
    for sym in seq.note_sets.iter().flat_map(|s| &s.symbols) {
        if sym.pitch.is_strike() {
            strikes += 1;
            if sym.duration_index == 0 || sym.duration_index == last {
                extreme += 1;
            }
        }
    }
    let raw = if strikes == 0 { 0.0 } else { extreme as f64 / strikes as f64 };
    Attribute { raw, score: penalty(raw, theta) }
}

/// Fraction of note-sets whose sounding content equals the previous one's.
pub fn repetition_penalty(seq: &MultiStreamSequence, theta: f64) -> Result<Attribute, RewardError> {
    Ok(repetition_of(&walk(seq)?, theta))
}

fn repetition_of(w: &Walk, theta: f64) -> Attribute {
    let n = w.expanded.len();
    if n < 2 {
        return Attribute { raw: 0.0, score: 1.0 };
    }
    let repeats = w.expanded.windows(2).filter(|p| p[0] == p[1]).count();
    let raw = repeats as f64 / n as f64;
    Attribute { raw, score: penalty(raw, theta) }
}

/// Share of stream-time spent resting and share of REST symbols.
pub fn rest_fractions(seq: &MultiStreamSequence, theta_duration: f64, theta_count: f64) -> Result<(Attribute, Attribute), RewardError> {
    Ok(rests_of(seq, &walk(seq)?, theta_duration, theta_count))
}

fn rests_of(seq: &MultiStreamSequence, w: &Walk, theta_duration: f64, theta_count: f64) -> (Attribute, Attribute) {
    let n = seq.config.n_streams as f64;
    let mut rest_time = 0.0;
    let mut total_time = 0.0;
    let mut rests = 0usize;
    let mut symbols = 0usize;
    for (set, &span) in seq.note_sets.iter().zip(&w.spans) {
        let r = set.symbols.iter().filter(|s| s.pitch == Pitch::Rest).count();
        rests += r;
        symbols += set.symbols.len();
        rest_time += span * r as f64;
        total_time += span;
    }
    let raw_d = if total_time > 0.0 { rest_time / (total_time * n) } else { 0.0 };
    let raw_c = if symbols > 0 { rests as f64 / symbols as f64 } else { 0.0 };
    (Attribute { raw: raw_d, score: penalty(raw_d, theta_duration) }, Attribute { raw: raw_c, score: penalty(raw_c, theta_count) })
}

/// Struck-pitch indicator of a note-set, bit `i` = playable pitch `i`.
pub fn struck_mask(seq: &MultiStreamSequence, k: usize) -> u128 {
    seq.note_sets[k].symbols.iter().fold(0u128, |m, s| match s.pitch {
        Pitch::Note(p) => m | 1u128 << p,
        _ => m,
    })
}

/// Struck-pitch masks of the training songs, precomputed once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceCorpus {
    pub songs: Vec<Vec<u128>>,
}

impl ReferenceCorpus {
    pub fn new(corpus: &[MultiStreamSequence]) -> Self {
        ReferenceCorpus { songs: corpus.iter().map(masks_of).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.songs.is_empty()
    }
}

pub fn masks_of(seq: &MultiStreamSequence) -> Vec<u128> {
    (0..seq.len()).map(|k| struck_mask(seq, k)).collect()
}

/// Normalized overlap of two equally long mask runs; 0 without any overlap.
pub fn window_similarity(a: &[u128], b: &[u128]) -> f64 {
    let mut inter = 0u32;
    let mut na = 0u32;
    let mut nb = 0u32;
    for (x, y) in a.iter().zip(b) {
        inter += (x & y).count_ones();
        na += x.count_ones();
        nb += y.count_ones();
    }
    if inter == 0 {
        0.0
    } else {
        inter as f64 / ((na as f64) * (nb as f64)).sqrt()
    }
}

/// Highest similarity between any `w`-window of `masks` and any aligned
/// `w`-window of a corpus song, or `None` when the composition is shorter
/// than `w`.
pub fn crosscorr_peak(masks: &[u128], corpus: &ReferenceCorpus, w: usize) -> Option<f64> {
    if masks.len() < w || w == 0 {
        return None;
    }
    let peak = corpus
        .songs
        .par_iter()
        .map(|song| {
            let mut best = 0.0f64;
            if song.len() >= w {
                for a in masks.windows(w) {
                    for b in song.windows(w) {
                        best = best.max(window_similarity(a, b));
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Some(peak)
}

fn crosscorr_attribute(masks: &[u128], corpus: &ReferenceCorpus, cfg: &RewardConfig) -> Attribute {
    match crosscorr_peak(masks, corpus, cfg.window) {
        Some(peak) => {
            let b = cfg.crosscorr_baseline;
            Attribute { raw: peak, score: 1.0 - ((peak - b) / (1.0 - b)).clamp(0.0, 1.0) }
        }
        None => {
            warn!("composition has {} note-sets, shorter than the {}-set window", masks.len(), cfg.window);
            Attribute { raw: 0.0, score: 1.0 }
        }
    }
}

pub fn evaluate(seq: &MultiStreamSequence, corpus: &ReferenceCorpus, cfg: &RewardConfig) -> Result<RewardBreakdown, RewardError> {
    cfg.validate()?;
    seq.validate()?;
    let w = walk(seq)?;
    let chords = chords_of(&w, &cfg.chords.masks());
    let entropy = entropy_of(&w);
    let extreme_durations = extreme_duration_incidence(seq, cfg.theta_extreme);
    let repetition = repetition_of(&w, cfg.theta_repetition);
    let (rest_duration, rest_count) = rests_of(seq, &w, cfg.theta_rest_duration, cfg.theta_rest_count);
    let crosscorr = crosscorr_attribute(&masks_of(seq), corpus, cfg);
    let total = [chords, entropy, extreme_durations, repetition, rest_duration, rest_count, crosscorr].iter().map(|a| a.score).sum();
    Ok(RewardBreakdown {
        chords,
        entropy,
        extreme_durations,
        repetition,
        rest_duration,
        rest_count,
        crosscorr,
        total,
        is_good: is_good(total, cfg.good_threshold),
    })
}

/// Threshold values tried by [`calibrate`].
pub fn threshold_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

pub fn baseline_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.05).collect()
}

/// Fits thresholds and the cross-correlation baseline by maximizing the
/// aggregate reward of `pleasant` over a grid. Each parameter affects only
/// its own attribute, so they are searched one at a time; among equally
/// good values the smallest wins.
pub fn calibrate(pleasant: &[MultiStreamSequence], corpus: &ReferenceCorpus, base: &RewardConfig) -> Result<RewardConfig, RewardError> {
    if pleasant.is_empty() {
        return Err(RewardError::EmptyCalibrationSet);
    }
    base.validate()?;
    let mut walks = Vec::with_capacity(pleasant.len());
    for seq in pleasant {
        seq.validate()?;
        walks.push(walk(seq)?);
    }
    let best = |grid: Vec<f64>, score: &dyn Fn(f64) -> f64| {
        let mut best = (grid[0], f64::NEG_INFINITY);
        for v in grid {
            let s = score(v);
            if s > best.1 + 1e-12 {
                best = (v, s);
            }
        }
        best.0
    };
    let mut cfg = base.clone();
    cfg.theta_extreme = best(threshold_grid(), &|t| pleasant.iter().map(|s| extreme_duration_incidence(s, t).score).sum());
    cfg.theta_repetition = best(threshold_grid(), &|t| walks.iter().map(|w| repetition_of(w, t).score).sum());
    cfg.theta_rest_duration = best(threshold_grid(), &|t| pleasant.iter().zip(&walks).map(|(s, w)| rests_of(s, w, t, 1.0).0.score).sum());
    cfg.theta_rest_count = best(threshold_grid(), &|t| pleasant.iter().zip(&walks).map(|(s, w)| rests_of(s, w, 1.0, t).1.score).sum());
    let masks: Vec<Vec<u128>> = pleasant.iter().map(masks_of).collect();
    cfg.crosscorr_baseline = best(baseline_grid(), &|b| {
        let c = RewardConfig { crosscorr_baseline: b, ..base.clone() };
        masks.iter().map(|m| crosscorr_attribute(m, corpus, &c).score).sum()
    });
    Ok(cfg)
}
