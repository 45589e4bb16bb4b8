//! Key estimation by profile correlation.
//!
//! The duration-weighted pitch-class histogram of a track is correlated
//! (Pearson) against all 24 rotations of the Krumhansl-Kessler major and
//! minor profiles; the best-correlated key wins.

use serde::{Deserialize, Serialize};

use super::{MidiError, QuantizedTrack};

/// Krumhansl-Kessler C major profile, C..B.
pub const MAJOR_PROFILE: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
/// Krumhansl-Kessler C minor profile, C..B.
pub const MINOR_PROFILE: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

/// Ties between modes resolve toward the lower discriminant (major).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Major = 0,
    Minor = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimate {
    /// Pitch class of the tonic, 0 = C.
    pub tonic: u8,
    pub mode: Mode,
    pub correlation: f64,
}

/// Total sounding duration per pitch class.
pub fn pitch_class_histogram(track: &QuantizedTrack) -> [f64; 12] {
    let mut hist = [0.0; 12];
    for n in &track.notes {
        hist[(n.pitch % 12) as usize] += n.duration;
    }
    hist
}

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = y.iter().sum::<f64>() / 12.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Best-matching key. Ties go to the lowest mode index, then the lowest tonic.
pub fn estimate_key(track: &QuantizedTrack) -> Result<KeyEstimate, MidiError> {
    if track.notes.is_empty() {
        return Err(MidiError::EmptyTrack);
    }
    let hist = pitch_class_histogram(track);
    let mut best = KeyEstimate { tonic: 0, mode: Mode::Major, correlation: f64::NEG_INFINITY };
    for (mode, profile) in [(Mode::Major, &MAJOR_PROFILE), (Mode::Minor, &MINOR_PROFILE)] {
        for tonic in 0..12u8 {
            let mut rotated = [0.0; 12];
            for (pc, slot) in rotated.iter_mut().enumerate() {
                *slot = profile[(pc + 12 - tonic as usize) % 12];
            }
            let r = pearson(&hist, &rotated);
            if r > best.correlation {
                best = KeyEstimate { tonic, mode, correlation: r };
            }
        }
    }
    Ok(best)
}
