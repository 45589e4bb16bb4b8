//! Standard MIDI File (format 0/1) reader and format-0 writer.

use std::collections::{HashMap, VecDeque};

use log::{debug, warn};

use super::{sort_notes, MidiError, QuantizedTrack, TimedNote, HIGHEST_PITCH, LOWEST_PITCH};

/// Ticks per quarter note in exported files.
pub const EXPORT_DIVISION: u16 = 480;
/// 120 bpm.
pub const EXPORT_TEMPO_USEC: u32 = 500_000;
const EXPORT_VELOCITY: u8 = 80;
const PERCUSSION_CHANNEL: u8 = 9;

#[derive(Debug, Clone, Copy)]
enum Division {
    /// Ticks per quarter note.
    Metrical(u16),
    /// Ticks per second.
    Timecode(f64),
}

impl Division {
    /// Ticks to whole notes. Metrical files are read in score time, which
    /// discards tempo changes; timecode files are read at 120 bpm.
    fn to_whole_notes(self, ticks: u64) -> f64 {
        match self {
            Division::Metrical(tpq) => ticks as f64 / (4.0 * tpq as f64),
            Division::Timecode(tps) => ticks as f64 / tps / 2.0,
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], pos: usize, end: usize) -> Self {
        Reader { data, pos, end }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.end
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        if self.pos >= self.end {
            return Err(MidiError::parse(self.pos, "unexpected end of data"));
        }
        let b = self.data[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Result<u8, MidiError> {
        if self.pos >= self.end {
            return Err(MidiError::parse(self.pos, "unexpected end of data"));
        }
        Ok(self.data[self.pos])
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.end - self.pos < n {
            return Err(MidiError::parse(self.pos, format!("need {n} bytes, {} left", self.end - self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.bytes(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.bytes(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::parse(start, "variable-length quantity longer than 4 bytes"))
    }
}

/// A note interval in ticks.
struct RawNote {
    pitch: u8,
    start: u64,
    end: u64,
}

fn parse_track(data: &[u8], start: usize, end: usize, out: &mut Vec<RawNote>) -> Result<(), MidiError> {
    let mut r = Reader::new(data, start, end);
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    // (channel, pitch) -> start ticks of sounding notes, oldest first
    let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();
    let mut saw_end = false;

    while !r.at_end() {
        tick += r.vlq()? as u64;
        let status_pos = r.pos;
        let first = r.peek()?;
        let status = if first & 0x80 != 0 {
            r.u8()?
        } else {
            running.ok_or_else(|| MidiError::parse(status_pos, "data byte without running status"))?
        };
        match status {
            0xff => {
                running = None;
                let kind = r.u8()?;
                let len = r.vlq()? as usize;
                let body = r.bytes(len)?;
                match kind {
                    0x2f => {
                        saw_end = true;
                        break;
                    }
                    0x51 if len == 3 => {
                        let usec = u32::from_be_bytes([0, body[0], body[1], body[2]]);
                        debug!("tempo {usec} us/quarter at tick {tick}");
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq()? as usize;
                r.bytes(len)?;
            }
            0xf1..=0xfe => {
                return Err(MidiError::parse(status_pos, format!("unexpected system status byte {status:#04x}")));
            }
            _ => {
                running = Some(status);
                let channel = status & 0x0f;
                match status & 0xf0 {
                    0x80 | 0x90 => {
                        let pitch = r.u8()?;
                        let velocity = r.u8()?;
                        if pitch > 0x7f || velocity > 0x7f {
                            return Err(MidiError::parse(status_pos, "data byte with high bit set"));
                        }
                        let queue = open.entry((channel, pitch)).or_default();
                        if status & 0xf0 == 0x90 && velocity > 0 {
                            queue.push_back(tick);
                        } else if let Some(s) = queue.pop_front() {
                            out.push(RawNote { pitch, start: s, end: tick });
                        }
                    }
                    0xa0 | 0xb0 | 0xe0 => {
                        r.bytes(2)?;
                    }
                    0xc0 | 0xd0 => {
                        r.u8()?;
                    }
                    _ => unreachable!("status byte has its high bit set"),
                }
            }
        }
    }
    if !saw_end {
        warn!("track at byte {start} has no end-of-track event");
    }
    let mut dangling: Vec<_> = open.into_iter().flat_map(|((_, p), q)| q.into_iter().map(move |s| (p, s))).collect();
    dangling.sort_unstable();
    for (pitch, s) in dangling {
        warn!("note {pitch} struck at tick {s} never released; closing at end of track (tick {tick})");
        out.push(RawNote { pitch, start: s, end: tick });
    }
    Ok(())
}

/// Parses an SMF into a single merged note list in whole-note units.
///
/// Pitches outside the piano range are dropped, as are zero-length notes.
/// The result is not yet quantized.
pub fn parse_midi(bytes: &[u8], source_id: &str) -> Result<QuantizedTrack, MidiError> {
    let mut r = Reader::new(bytes, 0, bytes.len());
    let magic = r.bytes(4)?;
    if magic != b"MThd" {
        return Err(MidiError::parse(0, "missing MThd header"));
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return Err(MidiError::parse(4, format!("header length {header_len} < 6")));
    }
    let header_start = r.pos;
    let format = r.u16()?;
    let declared_tracks = r.u16()?;
    let division_pos = r.pos;
    let raw_division = r.u16()?;
    r.pos = header_start + header_len;
    if format > 1 {
        return Err(MidiError::parse(header_start, format!("unsupported SMF format {format}")));
    }
    let division = if raw_division & 0x8000 != 0 {
        let fps = -((raw_division >> 8) as u8 as i8) as f64;
        let per_frame = (raw_division & 0xff) as f64;
        let fps = if fps == 29.0 { 29.97 } else { fps };
        if fps <= 0.0 || per_frame <= 0.0 {
            return Err(MidiError::parse(division_pos, "invalid timecode division"));
        }
        Division::Timecode(fps * per_frame)
    } else {
        if raw_division == 0 {
            return Err(MidiError::parse(division_pos, "division of zero ticks"));
        }
        Division::Metrical(raw_division)
    };

    let mut raw = Vec::new();
    let mut tracks = 0;
    while !r.at_end() {
        let chunk_pos = r.pos;
        let id = r.bytes(4)?;
        let len = r.u32()? as usize;
        if bytes.len() - r.pos < len {
            return Err(MidiError::parse(chunk_pos, format!("chunk length {len} exceeds file size")));
        }
        if id == b"MTrk" {
            parse_track(bytes, r.pos, r.pos + len, &mut raw)?;
            tracks += 1;
        } else {
            debug!("skipping unknown chunk {:?} at byte {chunk_pos}", String::from_utf8_lossy(id));
        }
        r.pos += len;
    }
    if tracks != declared_tracks as usize {
        warn!("header declares {declared_tracks} tracks, found {tracks}");
    }

    let notes = raw
        .into_iter()
        .filter(|n| (LOWEST_PITCH..=HIGHEST_PITCH).contains(&n.pitch) && n.end > n.start)
        .map(|n| {
            let onset = division.to_whole_notes(n.start);
            let end = division.to_whole_notes(n.end);
            TimedNote { pitch: n.pitch, onset, duration: end - onset }
        })
        .collect();
    Ok(QuantizedTrack::new(source_id, notes))
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut i = 3;
    buf[i] = (value & 0x7f) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = (value & 0x7f) as u8 | 0x80;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

/// Writes a format-0 SMF at 480 ticks per quarter, 120 bpm.
///
/// Overlapping notes of the same pitch are spread over separate channels so
/// that reading the file back recovers every note exactly.
pub fn write_midi(track: &QuantizedTrack) -> Vec<u8> {
    let ticks_per_whole = 4.0 * EXPORT_DIVISION as f64;
    let to_ticks = |t: f64| (t * ticks_per_whole).round().max(0.0) as u64;

    let mut notes = track.notes.clone();
    sort_notes(&mut notes);
    // (tick, is_on, channel, pitch)
    let mut events: Vec<(u64, bool, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    let mut free_at: HashMap<(u8, u8), u64> = HashMap::new();
    for n in &notes {
        let on = to_ticks(n.onset);
        let off = to_ticks(n.end()).max(on + 1);
        let channel = (0..16u8)
            .filter(|&c| c != PERCUSSION_CHANNEL)
            .find(|&c| free_at.get(&(c, n.pitch)).is_none_or(|&t| t <= on))
            .unwrap_or_else(|| {
                warn!("more than 15 overlapping strikes of pitch {}; stacking on channel 0", n.pitch);
                0
            });
        free_at.insert((channel, n.pitch), off);
        events.push((on, true, channel, n.pitch));
        events.push((off, false, channel, n.pitch));
    }
    events.sort_by_key(|&(tick, is_on, channel, pitch)| (tick, is_on, channel, pitch));

    let mut body = Vec::new();
    body.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    body.extend_from_slice(&EXPORT_TEMPO_USEC.to_be_bytes()[1..]);
    let mut last = 0u64;
    for (tick, is_on, channel, pitch) in events {
        push_vlq(&mut body, (tick - last) as u32);
        last = tick;
        if is_on {
            body.extend_from_slice(&[0x90 | channel, pitch, EXPORT_VELOCITY]);
        } else {
            body.extend_from_slice(&[0x80 | channel, pitch, 0x40]);
        }
    }
    body.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(body.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&EXPORT_DIVISION.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}
