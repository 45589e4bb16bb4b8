//! Small synthetic etudes: scales, chord progressions, an Alberti bass and
//! a minor-key piece. Every note lies on the 1/16 grid with durations of an
//! eighth, quarter, half or whole note.

use crate::midi_io::{QuantizedTrack, TimedNote};

const EIGHTH: f64 = 0.125;
const QUARTER: f64 = 0.25;
const HALF: f64 = 0.5;
const WHOLE: f64 = 1.0;

const C_MAJOR: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
const A_MINOR: [i32; 7] = [0, 2, 3, 5, 7, 8, 10];

/// MIDI pitch of scale degree `deg` (may exceed 6 or be negative) above `root`.
fn degree(root: i32, scale: &[i32; 7], deg: i32) -> u8 {
    let oct = deg.div_euclid(7);
    (root + 12 * oct + scale[deg.rem_euclid(7) as usize]) as u8
}

fn n(pitch: u8, onset: f64, duration: f64) -> TimedNote {
    TimedNote::new(pitch, onset, duration)
}

/// C-major scale in quarters over a whole-note bass, twice, the second
/// time an octave higher.
fn scale_etude() -> QuantizedTrack {
    let mut notes = Vec::new();
    let basses = [48, 53, 55, 48];
    for pass in 0..2 {
        let base = 4.0 * pass as f64;
        let degs = (0..8).chain((0..8).rev());
        for (k, d) in degs.enumerate() {
            notes.push(n(degree(60 + 12 * pass, &C_MAJOR, d), base + k as f64 * QUARTER, QUARTER));
        }
        for (bar, &b) in basses.iter().enumerate() {
            notes.push(n(b, base + bar as f64, WHOLE));
        }
    }
    QuantizedTrack::new("toy_scales", notes)
}

/// I-IV-V-I-vi-ii-V-I in half-note triads with an arpeggiated eighth-note
/// melody.
fn chord_etude() -> QuantizedTrack {
    let roots = [0, 3, 4, 0, 5, 1, 4, 0];
    let mut notes = Vec::new();
    for (bar, &r) in roots.iter().enumerate() {
        let t = bar as f64;
        let triad = [degree(48, &C_MAJOR, r), degree(48, &C_MAJOR, r + 2), degree(48, &C_MAJOR, r + 4)];
        for half in 0..2 {
            for &p in &triad {
                notes.push(n(p, t + half as f64 * HALF, HALF));
            }
        }
        let pattern = [0, 2, 4, 7, 4, 2, 0, 2];
        for (k, &d) in pattern.iter().enumerate() {
            notes.push(n(degree(72, &C_MAJOR, r + d), t + k as f64 * EIGHTH, EIGHTH));
        }
    }
    QuantizedTrack::new("toy_chords", notes)
}

/// G major: eighth-note Alberti bass under a stepwise quarter-note melody.
fn alberti_etude() -> QuantizedTrack {
    let g = 55;
    // root, fifth, third, fifth over G, C, D, G
    let chords: [[i32; 3]; 4] = [[0, 4, 7], [5, 9, 12], [7, 11, 14], [0, 4, 7]];
    let melody = [12, 16, 14, 12, 9, 12, 16, 19, 14, 11, 9, 7, 11, 14, 12, 12];
    let mut notes = Vec::new();
    for (bar, c) in chords.iter().enumerate() {
        let t = bar as f64;
        let fig = [c[0], c[2], c[1], c[2]];
        for k in 0..8 {
            notes.push(n((g - 12 + fig[k % 4]) as u8, t + k as f64 * EIGHTH, EIGHTH));
        }
    }
    for (k, &m) in melody.iter().enumerate() {
        notes.push(n((g + 12 + m) as u8, k as f64 * QUARTER, QUARTER));
    }
    QuantizedTrack::new("toy_alberti", notes)
}

/// A minor melody in quarters and halves with a quarter rest, over
/// half-note dyads in the bass.
fn minor_etude() -> QuantizedTrack {
    let mut notes = Vec::new();
    // (degree above A4, onset in quarters, length in quarters); degree 0 = A
    let melody: [(i32, usize, usize); 13] = [
        (0, 0, 1),
        (2, 1, 1),
        (4, 2, 2),
        (3, 4, 1),
        (2, 5, 1),
        (1, 6, 2),
        (0, 8, 1),
        (1, 9, 1),
        (2, 10, 1),
        // quarter rest at 11
        (4, 12, 1),
        (3, 13, 1),
        (1, 14, 1),
        (0, 15, 1),
    ];
    for &(d, at, len) in &melody {
        notes.push(n(degree(69, &A_MINOR, d), at as f64 * QUARTER, len as f64 * QUARTER));
    }
    let bass = [(45, 52), (45, 60), (50, 53), (50, 57), (52, 59), (52, 55), (45, 52), (45, 60)];
    for (k, &(lo, hi)) in bass.iter().enumerate() {
        notes.push(n(lo, k as f64 * HALF, HALF));
        notes.push(n(hi, k as f64 * HALF, HALF));
    }
    QuantizedTrack::new("toy_minor", notes)
}

/// The four etudes in a fixed order.
pub fn toy_corpus() -> Vec<QuantizedTrack> {
    vec![scale_etude(), chord_etude(), alberti_etude(), minor_etude()]
}

/// Largest number of notes sounding together in the etude at `index`, as
/// built into the generator.
pub fn designed_max_polyphony(index: usize) -> usize {
    [2, 4, 2, 3][index]
}
