//! Size of the composition space under the piano-roll and multi-stream
//! representations, and polyphony statistics.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::{CodecError, DurationVocab};
use crate::midi_io::QuantizedTrack;

const STEPS_PER_WHOLE: f64 = 16.0;

/// log10 of `2^((T/S)·n_p)`: binary piano rolls of length `T` sampled every `S`.
pub fn log_count_piano_roll(length: f64, sample_step: f64, n_pitches: usize) -> f64 {
    (length / sample_step) * n_pitches as f64 * std::f64::consts::LOG10_2
}

/// log10 of `n_p^(n_s·T/d0)`: multi-stream compositions using only the
/// shortest duration.
pub fn log_count_multistream_approx(length: f64, shortest: f64, n_streams: usize, n_pitches: usize) -> f64 {
    n_streams as f64 * (length / shortest) * (n_pitches as f64).log10()
}

/// Piano-roll minus multi-stream log10 counts.
pub fn sparsity_log_ratio(length: f64, sample_step: f64, vocab: &DurationVocab, n_streams: usize, n_pitches: usize) -> f64 {
    log_count_piano_roll(length, sample_step, n_pitches)
        - log_count_multistream_approx(length, vocab.shortest(), n_streams, n_pitches)
}

fn to_steps(x: f64) -> Result<usize, CodecError> {
    let steps = x * STEPS_PER_WHOLE;
    if steps < 0.0 || (steps - steps.round()).abs() > 1e-9 {
        return Err(CodecError::OffGrid(x));
    }
    Ok(steps.round() as usize)
}

/// Exact number of multi-stream compositions of length `T` with every
/// stream tiled by vocabulary durations, each note one of `n_p` pitches.
///
/// Per stream `f(0) = 1`, `f(t) = Σ_{d ≤ t} n_p·f(t − d)`; the total is
/// `f(T)^n_s`.
pub fn count_multistream_exact(
    length: f64,
    vocab: &DurationVocab,
    n_streams: usize,
    n_pitches: usize,
) -> Result<BigUint, CodecError> {
    let total = to_steps(length)?;
    let steps = vocab.as_slice().iter().map(|&d| to_steps(d)).collect::<Result<Vec<_>, _>>()?;
    if steps.contains(&0) {
        return Err(CodecError::InvalidVocab);
    }
    let np = BigUint::from(n_pitches);
    let mut f: Vec<BigUint> = Vec::with_capacity(total + 1);
    f.push(BigUint::one());
    for t in 1..=total {
        let mut acc = BigUint::zero();
        for &d in steps.iter().filter(|&&d| d <= t) {
            acc += &f[t - d];
        }
        f.push(acc * &np);
    }
    Ok(f[total].pow(n_streams as u32))
}

/// log10 of an arbitrarily large integer; `-inf` for zero.
pub fn log10_big(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let shift = n.bits().saturating_sub(64);
    let top = (n >> shift).to_u64().expect("top 64 bits fit") as f64;
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Instantaneous polyphony sampled at every distinct onset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyphonyProfile {
    pub onsets: usize,
    pub max: usize,
    pub mean: f64,
}

pub fn polyphony_profile(track: &QuantizedTrack) -> PolyphonyProfile {
    let mut active: Vec<f64> = Vec::new();
    let (mut onsets, mut max, mut sum) = (0usize, 0usize, 0usize);
    let notes = &track.notes;
    let mut i = 0;
    while i < notes.len() {
        let t = notes[i].onset;
        active.retain(|&end| end > t);
        while i < notes.len() && notes[i].onset == t {
            active.push(notes[i].end());
            i += 1;
        }
        onsets += 1;
        max = max.max(active.len());
        sum += active.len();
    }
    PolyphonyProfile { onsets, max, mean: if onsets == 0 { 0.0 } else { sum as f64 / onsets as f64 } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi_io::TimedNote;

    #[test]
    fn piano_roll_count() {
        // oracle: 1408 * log10(2) = 423.8519...
        assert!((log_count_piano_roll(1.0, 1.0 / 16.0, 88) - 423.8519).abs() < 0.01);
        assert_eq!(log_count_piano_roll(0.0, 1.0 / 16.0, 88), 0.0);
        let one = log_count_piano_roll(1.5, 0.0625, 88);
        assert!((log_count_piano_roll(3.0, 0.0625, 88) - 2.0 * one).abs() < 1e-9);
    }

    #[test]
    fn multistream_approx_count() {
        // oracle: 80 * log10(88) = 155.5637...
        assert!((log_count_multistream_approx(1.0, 1.0 / 16.0, 5, 88) - 155.5637).abs() < 0.01);
        assert_eq!(log_count_multistream_approx(1.0, 0.0625, 0, 88), 0.0);
        assert!((log_count_multistream_approx(1.0, 1.0, 1, 10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_matches_reported_value() {
        let v = DurationVocab::new(vec![0.0625]).unwrap();
        assert!((sparsity_log_ratio(1.0, 0.0625, &v, 5, 88) - 268.29).abs() < 0.01);
        assert!((sparsity_log_ratio(2.0, 0.0625, &v, 5, 88) - 536.58).abs() < 0.02);
    }

    #[test]
    fn ratio_vanishes_at_balance() {
        // n_s log10(n_p)/d0 = n_p log10(2)/S with n_p = 2, S = d0, n_s = 2 log10(2)/log10(2) = 2
        let v = DurationVocab::new(vec![0.25]).unwrap();
        assert!(sparsity_log_ratio(1.0, 0.25, &v, 2, 2).abs() < 1e-12);
    }

    #[test]
    fn exact_counts() {
        let v16 = DurationVocab::new(vec![0.0625]).unwrap();
        assert_eq!(count_multistream_exact(0.0625, &v16, 1, 88).unwrap(), BigUint::from(88u32));
        let v = DurationVocab::new(vec![0.0625, 0.125]).unwrap();
        assert_eq!(count_multistream_exact(0.125, &v, 1, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(count_multistream_exact(1.0, &v16, 3, 88).unwrap(), BigUint::from(88u32).pow(48));
        assert!(count_multistream_exact(0.1, &v16, 1, 88).is_err());
    }

    #[test]
    fn big_log10() {
        let n = BigUint::from(88u32).pow(400);
        assert!((log10_big(&n) - 400.0 * 88f64.log10()).abs() < 1e-9);
        assert!((log10_big(&BigUint::from(1000u32)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn polyphony_of_melody_and_chords() {
        let mono = QuantizedTrack::new("m", (0..8).map(|i| TimedNote::new(60 + i, i as f64 * 0.25, 0.25)).collect());
        let p = polyphony_profile(&mono);
        assert_eq!((p.max, p.mean, p.onsets), (1, 1.0, 8));
        let chords = QuantizedTrack::new(
            "c",
            vec![
                TimedNote::new(48, 0.0, 1.0),
                TimedNote::new(60, 0.0, 0.5),
                TimedNote::new(64, 0.0, 0.5),
                TimedNote::new(67, 0.5, 0.5),
            ],
        );
        let p = polyphony_profile(&chords);
        assert_eq!((p.max, p.onsets), (3, 2));
        assert!((p.mean - 2.5).abs() < 1e-12);
    }
}
