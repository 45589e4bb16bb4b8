//! Line-oriented text form of a [`MultiStreamSequence`].
//!
//! ```text
//! ns=2 vocab=0.0625,0.25
//! 0;43,1|R,1
//! 0.25;S,0|R,0
//! ```
//!
//! Pitch tokens are playable indices `0..=87`, `S` (sustain) or `R` (rest);
//! the number after the comma indexes the vocabulary. Numbers are written in
//! shortest round-trip decimal form.

use std::fmt::Write as _;

use super::{CodecError, DurationVocab, MultiStreamSequence, NoteSet, Pitch, RepresentationConfig, StreamSymbol, PLAYABLE_PITCHES};

pub fn write_sequence(seq: &MultiStreamSequence) -> String {
    let mut out = String::new();
    let vocab: Vec<String> = seq.config.vocab.as_slice().iter().map(|d| d.to_string()).collect();
    writeln!(out, "ns={} vocab={}", seq.config.n_streams, vocab.join(",")).unwrap();
    for set in &seq.note_sets {
        write!(out, "{};", set.onset).unwrap();
        for (s, sym) in set.symbols.iter().enumerate() {
            if s > 0 {
                out.push('|');
            }
            match sym.pitch {
                Pitch::Note(p) => write!(out, "{p}").unwrap(),
                Pitch::Sustain => out.push('S'),
                Pitch::Rest => out.push('R'),
            }
            write!(out, ",{}", sym.duration_index).unwrap();
        }
        out.push('\n');
    }
    out
}

fn syntax(line: usize, reason: impl Into<String>) -> CodecError {
    CodecError::Syntax { line, reason: reason.into() }
}

pub fn parse_sequence(text: &str) -> Result<MultiStreamSequence, CodecError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| syntax(1, "missing header"))?;
    let mut n_streams = None;
    let mut vocab = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("ns", v)) => n_streams = Some(v.parse::<usize>().map_err(|e| syntax(1, format!("ns: {e}")))?),
            Some(("vocab", v)) => {
                let ds = v
                    .split(',')
                    .map(|d| d.parse::<f64>().map_err(|e| syntax(1, format!("vocab: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                vocab = Some(DurationVocab::new(ds)?);
            }
            _ => return Err(syntax(1, format!("unknown header field {field:?}"))),
        }
    }
    let n_streams = n_streams.filter(|&n| n >= 1).ok_or_else(|| syntax(1, "missing or zero ns"))?;
    let vocab = vocab.ok_or_else(|| syntax(1, "missing vocab"))?;
    let n_d = vocab.len();
    let mut seq = MultiStreamSequence::new(RepresentationConfig::new(n_streams, vocab));

    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (onset, body) = line.split_once(';').ok_or_else(|| syntax(no, "missing ';'"))?;
        let onset: f64 = onset.parse().map_err(|e| syntax(no, format!("onset: {e}")))?;
        let mut symbols = Vec::with_capacity(n_streams);
        for cell in body.split('|') {
            let (p, d) = cell.split_once(',').ok_or_else(|| syntax(no, format!("bad symbol {cell:?}")))?;
            let pitch = match p {
                "S" => Pitch::Sustain,
                "R" => Pitch::Rest,
                _ => {
                    let i: u8 = p.parse().map_err(|e| syntax(no, format!("pitch {p:?}: {e}")))?;
                    if i as usize >= PLAYABLE_PITCHES {
                        return Err(syntax(no, format!("pitch index {i} out of range")));
                    }
                    Pitch::Note(i)
                }
            };
            let duration_index: usize = d.parse().map_err(|e| syntax(no, format!("duration {d:?}: {e}")))?;
            if duration_index >= n_d {
                return Err(syntax(no, format!("duration index {duration_index} out of range")));
            }
            symbols.push(StreamSymbol::new(pitch, duration_index));
        }
        if symbols.len() != n_streams {
            return Err(syntax(no, format!("{} symbols, expected {n_streams}", symbols.len())));
        }
        seq.note_sets.push(NoteSet { onset, symbols });
    }
    Ok(seq)
}
