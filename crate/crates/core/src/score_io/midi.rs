//! Standard MIDI File subset: formats 0 and 1, note-on/off, tempo and track
//! names. Every other message is parsed only to be skipped.

use ndarray::Array2;
use thiserror::Error;

use super::PianoRoll;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed MIDI at byte {offset}: {reason}")]
pub struct MidiError {
    pub offset: usize,
    pub reason: String,
}

fn err<T>(offset: usize, reason: impl Into<String>) -> Result<T, MidiError> {
    Err(MidiError {
        offset,
        reason: reason.into(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, MidiError> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => err(self.pos, "unexpected end of data"),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.bytes.len() {
            return err(self.pos, format!("need {n} bytes, {} left", self.bytes.len() - self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        err(start, "variable-length quantity longer than 4 bytes")
    }
}

#[derive(Debug)]
struct Note {
    pitch: u8,
    velocity: u8,
    on: u64,
    off: u64,
}

#[derive(Debug, Default)]
struct Track {
    name: Option<String>,
    notes: Vec<Note>,
}

fn parse_track(data: &[u8], base: usize, index: usize) -> Result<Track, MidiError> {
    let mut cur = Cursor { bytes: data, pos: 0 };
    let mut track = Track::default();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut active: [Option<(u64, u8)>; 128] = [None; 128];
    let at = |cur: &Cursor| base + cur.pos;

    let close = |track: &mut Track, pitch: u8, start: (u64, u8), tick: u64| {
        track.notes.push(Note {
            pitch,
            velocity: start.1,
            on: start.0,
            off: tick,
        });
    };

    while cur.pos < data.len() {
        tick += u64::from(cur.vlq().map_err(|e| MidiError { offset: base + e.offset, ..e })?);
        let status_pos = at(&cur);
        let first = cur.u8().map_err(|e| MidiError { offset: base + e.offset, ..e })?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            match running {
                Some(s) => (s, Some(first)),
                None => return err(status_pos, "data byte without running status"),
            }
        };
        let data_byte = |cur: &mut Cursor, pre: &mut Option<u8>| -> Result<u8, MidiError> {
            if let Some(b) = pre.take() {
                return Ok(b);
            }
            let pos = at(cur);
            let b = cur.u8().map_err(|e| MidiError { offset: base + e.offset, ..e })?;
            if b & 0x80 != 0 {
                return err(pos, format!("status byte {b:#04x} where data was expected"));
            }
            Ok(b)
        };
        let mut pre = first_data;
        match status {
            0x80..=0xef => {
                running = Some(status);
                let kind = status & 0xf0;
                let a = data_byte(&mut cur, &mut pre)?;
                if kind == 0xc0 || kind == 0xd0 {
                    continue;
                }
                let b = data_byte(&mut cur, &mut pre)?;
                match (kind, b) {
                    (0x90, v) if v > 0 => {
                        if let Some(prev) = active[a as usize].take() {
                            log::warn!(
                                "track {index}: pitch {a} re-struck at tick {tick} while sounding; later note wins"
                            );
                            close(&mut track, a, prev, tick);
                        }
                        active[a as usize] = Some((tick, v));
                    }
                    (0x80, _) | (0x90, _) => {
                        if let Some(prev) = active[a as usize].take() {
                            close(&mut track, a, prev, tick);
                        }
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur.vlq().map_err(|e| MidiError { offset: base + e.offset, ..e })?;
                cur.take(len as usize).map_err(|e| MidiError { offset: base + e.offset, ..e })?;
            }
            0xff => {
                running = None;
                let kind = cur.u8().map_err(|e| MidiError { offset: base + e.offset, ..e })?;
                let len = cur.vlq().map_err(|e| MidiError { offset: base + e.offset, ..e })?;
                let payload = cur
                    .take(len as usize)
                    .map_err(|e| MidiError { offset: base + e.offset, ..e })?;
                match kind {
                    0x03 => track.name = Some(String::from_utf8_lossy(payload).into_owned()),
                    0x51 if len != 3 => return err(status_pos, "tempo event must carry 3 bytes"),
                    0x2f => break,
                    _ => {}
                }
            }
            _ => return err(status_pos, format!("unsupported status byte {status:#04x}")),
        }
    }
    for (pitch, slot) in active.iter_mut().enumerate() {
        if let Some(start) = slot.take() {
            close(&mut track, pitch as u8, start, tick);
        }
    }
    track.notes.sort_by_key(|n| (n.on, n.off));
    Ok(track)
}

/// Parses a format 0/1 Standard MIDI File into one roll per part.
///
/// A note sounding from tick `on` to tick `off` occupies frames
/// `round(on·Q/tpq) .. round(off·Q/tpq)` with its onset velocity. All rolls
/// cover the full MIDI pitch range and are padded to the longest track.
/// In format 1 a leading track without notes is the conductor track and is
/// skipped; tracks with neither notes nor a name are skipped as well.
pub fn parse_midi(bytes: &[u8], quantization: u32) -> Result<Vec<PianoRoll>, MidiError> {
    if quantization == 0 {
        return err(0, "quantization must be at least 1");
    }
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4).ok() != Some(b"MThd".as_slice()) {
        return err(0, "missing MThd header");
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return err(4, format!("header length {header_len} is shorter than 6"));
    }
    let format = cur.u16()?;
    let n_tracks = cur.u16()?;
    let division_pos = cur.pos;
    let division = cur.u16()?;
    cur.take(header_len - 6)?;
    if format > 1 {
        return err(8, format!("MIDI format {format} is not supported"));
    }
    if division & 0x8000 != 0 {
        return err(division_pos, "SMPTE time division is not supported");
    }
    if division == 0 {
        return err(division_pos, "zero ticks per quarter note");
    }
    let tpq = u64::from(division);

    let mut tracks = Vec::new();
    while tracks.len() < n_tracks as usize {
        let chunk_pos = cur.pos;
        let id = cur.take(4)?;
        let len = cur.u32()? as usize;
        let body_pos = cur.pos;
        let body = cur.take(len).map_err(|_| MidiError {
            offset: chunk_pos,
            reason: format!(
                "truncated chunk: declares {len} bytes, {} present",
                bytes.len() - body_pos
            ),
        })?;
        if id == b"MTrk" {
            tracks.push(parse_track(body, body_pos, tracks.len())?);
        }
    }

    let frame = |tick: u64| -> usize {
        let q = u64::from(quantization);
        ((2 * tick * q + tpq) / (2 * tpq)) as usize
    };
    let n_frames = tracks
        .iter()
        .flat_map(|t| t.notes.iter().map(|n| frame(n.off)))
        .max()
        .unwrap_or(0);

    let n_total = tracks.len();
    let rolls = tracks
        .into_iter()
        .enumerate()
        .filter(|(i, t)| {
            let conductor = format == 1 && *i == 0 && n_total > 1 && t.notes.is_empty();
            !conductor && (t.name.is_some() || !t.notes.is_empty())
        })
        .map(|(i, track)| {
            let label = track.name.unwrap_or_else(|| format!("track{i}"));
            let mut roll = PianoRoll::new(
                label,
                (0..=127).collect(),
                Array2::zeros((128, n_frames)),
                quantization,
            )
            .expect("full-range roll is valid");
            for note in &track.notes {
                roll.fill(note.pitch, frame(note.on), frame(note.off), note.velocity);
            }
            roll
        })
        .collect();
    Ok(rolls)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

fn push_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

/// Writes rolls as a format 1 file: a conductor track (120 bpm) followed by
/// one named track per roll. Frame `t` starts at tick `t·tpq/Q`; a change of
/// intensity between adjacent frames re-strikes the note.
pub fn write_midi(rolls: &[PianoRoll], ticks_per_quarter: u16) -> Vec<u8> {
    let mut out = Vec::new();
    let mut header = Vec::new();
    header.extend_from_slice(&1u16.to_be_bytes());
    header.extend_from_slice(&((rolls.len() + 1) as u16).to_be_bytes());
    header.extend_from_slice(&ticks_per_quarter.to_be_bytes());
    push_chunk(&mut out, b"MThd", &header);

    let mut conductor = Vec::new();
    conductor.extend_from_slice(&[0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20]);
    conductor.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);
    push_chunk(&mut out, b"MTrk", &conductor);

    for roll in rolls {
        let tpq = u64::from(ticks_per_quarter);
        let q = u64::from(roll.quantization());
        let tick_of = |t: usize| (t as u64 * tpq / q) as u32;
        // (tick, is_on, pitch, velocity); offs sort before ons at equal ticks
        let mut events: Vec<(u32, bool, u8, u8)> = Vec::new();
        for (row, &pitch) in roll.pitches().iter().enumerate() {
            let mut current = 0u8;
            for t in 0..=roll.n_frames() {
                let v = if t < roll.n_frames() { roll.intensity_at(row, t) } else { 0 };
                if v != current {
                    if current > 0 {
                        events.push((tick_of(t), false, pitch, 0));
                    }
                    if v > 0 {
                        events.push((tick_of(t), true, pitch, v));
                    }
                    current = v;
                }
            }
        }
        events.sort_by_key(|&(tick, on, pitch, _)| (tick, on, pitch));

        let mut body = Vec::new();
        body.extend_from_slice(&[0x00, 0xff, 0x03]);
        push_vlq(&mut body, roll.label().len() as u32);
        body.extend_from_slice(roll.label().as_bytes());
        let mut last = 0u32;
        for (tick, on, pitch, vel) in events {
            push_vlq(&mut body, tick - last);
            last = tick;
            if on {
                body.extend_from_slice(&[0x90, pitch, vel]);
            } else {
                body.extend_from_slice(&[0x80, pitch, 0x40]);
            }
        }
        body.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);
        push_chunk(&mut out, b"MTrk", &body);
    }
    out
}
