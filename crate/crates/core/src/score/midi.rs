//! Standard MIDI File (format 0 and 1) reader.
//!
//! Only the messages that matter for the goal roll are interpreted: note-on,
//! note-off, the tempo meta event, control change 64 (sustain pedal) and the
//! track name of the first track. Everything else is skipped.

use std::collections::HashMap;

use super::{NoteEvent, Parsed, Score};
use crate::error::{Diagnostic, Error, Result};

const DEFAULT_US_PER_QUARTER: u32 = 500_000;
const SUSTAIN_CONTROLLER: u8 = 64;

/// Time base of a file, from the `division` header word.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Division {
    /// Ticks per quarter note; tempo events apply.
    Metrical(u16),
    /// Absolute time: seconds per tick, tempo events ignored.
    Timecode(f64),
}

/// Piecewise-constant tempo map converting ticks to seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TempoMap {
    division: Division,
    /// `(start tick, start seconds, microseconds per quarter)`, sorted by tick.
    segments: Vec<(u64, f64, u32)>,
}

impl TempoMap {
    /// Builds a map from `(tick, microseconds per quarter note)` changes.
    /// When several changes share a tick, the last one wins.
    pub fn new(ticks_per_quarter: u16, changes: &[(u64, u32)]) -> Result<TempoMap> {
        if ticks_per_quarter == 0 {
            return Err(Error::invalid("ticks per quarter note must be positive"));
        }
        Ok(Self::build(Division::Metrical(ticks_per_quarter), changes))
    }

    fn build(division: Division, changes: &[(u64, u32)]) -> TempoMap {
        let mut sorted: Vec<(u64, u32)> = changes.iter().copied().filter(|(_, t)| *t > 0).collect();
        sorted.sort_by_key(|(tick, _)| *tick);
        let mut segments: Vec<(u64, f64, u32)> = vec![(0, 0.0, DEFAULT_US_PER_QUARTER)];
        for (tick, tempo) in sorted {
            let last = *segments.last().expect("non-empty");
            if tick == last.0 {
                segments.last_mut().expect("non-empty").2 = tempo;
            } else {
                let start = last.1 + Self::span_seconds(division, tick - last.0, last.2);
                segments.push((tick, start, tempo));
            }
        }
        TempoMap { division, segments }
    }

    fn span_seconds(division: Division, ticks: u64, us_per_quarter: u32) -> f64 {
        match division {
            Division::Metrical(ppq) => ticks as f64 * f64::from(us_per_quarter) / (1e6 * f64::from(ppq)),
            Division::Timecode(seconds_per_tick) => ticks as f64 * seconds_per_tick,
        }
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        let idx = self.segments.partition_point(|s| s.0 <= tick) - 1;
        let (start_tick, start_sec, tempo) = self.segments[idx];
        start_sec + Self::span_seconds(self.division, tick - start_tick, tempo)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Reader { bytes, pos }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| Error::midi(self.pos, "unexpected end of data"))?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::midi(
                self.pos,
                format!("need {n} bytes, only {} remain", self.remaining()),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn vlq(&mut self) -> Result<u32> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::midi(start, "variable-length quantity longer than 4 bytes"))
    }
}

#[derive(Debug)]
enum Event {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8 },
    Sustain { channel: u8, down: bool },
    Tempo(u32),
    TrackName(String),
    EndOfTrack,
}

struct TrackEvents {
    events: Vec<(u64, Event)>,
    end_tick: u64,
}

fn read_track(data: &[u8], base: usize) -> Result<TrackEvents> {
    let mut r = Reader::new(data, 0);
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut events = Vec::new();
    let at = |r: &Reader| base + r.pos;

    while r.remaining() > 0 {
        tick += u64::from(r.vlq().map_err(|e| rebase(e, base))?);
        let status_pos = at(&r);
        let first = r.u8().map_err(|e| rebase(e, base))?;
        let (status, first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            let status = running.ok_or_else(|| Error::midi(status_pos, "data byte without running status"))?;
            (status, Some(first))
        };

        match status {
            0xff => {
                running = None;
                let kind = r.u8().map_err(|e| rebase(e, base))?;
                let len = r.vlq().map_err(|e| rebase(e, base))? as usize;
                let payload = r.take(len).map_err(|e| rebase(e, base))?;
                match kind {
                    0x51 => {
                        if len != 3 {
                            return Err(Error::midi(status_pos, format!("tempo event with length {len}")));
                        }
                        let tempo = u32::from_be_bytes([0, payload[0], payload[1], payload[2]]);
                        events.push((tick, Event::Tempo(tempo)));
                    }
                    0x03 => {
                        events.push((tick, Event::TrackName(String::from_utf8_lossy(payload).into_owned())));
                    }
                    0x2f => {
                        events.push((tick, Event::EndOfTrack));
                        break;
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq().map_err(|e| rebase(e, base))? as usize;
                r.take(len).map_err(|e| rebase(e, base))?;
            }
            0xf1..=0xfe => {
                return Err(Error::midi(
                    status_pos,
                    format!("system message 0x{status:02x} inside a track"),
                ));
            }
            _ => {
                running = Some(status);
                let channel = status & 0x0f;
                let data_len = match status & 0xf0 {
                    0xc0 | 0xd0 => 1,
                    _ => 2,
                };
                let d0 = match first_data {
                    Some(b) => b,
                    None => r.u8().map_err(|e| rebase(e, base))?,
                };
                let d1 = if data_len == 2 {
                    r.u8().map_err(|e| rebase(e, base))?
                } else {
                    0
                };
                match status & 0xf0 {
                    0x90 if d1 > 0 => events.push((
                        tick,
                        Event::NoteOn {
                            channel,
                            pitch: d0,
                            velocity: d1,
                        },
                    )),
                    0x90 | 0x80 => events.push((tick, Event::NoteOff { channel, pitch: d0 })),
                    0xb0 if d0 == SUSTAIN_CONTROLLER => events.push((
                        tick,
                        Event::Sustain {
                            channel,
                            down: d1 >= 64,
                        },
                    )),
                    _ => {}
                }
            }
        }
    }
    Ok(TrackEvents { events, end_tick: tick })
}

fn rebase(err: Error, base: usize) -> Error {
    match err {
        Error::Midi { offset, message } => Error::Midi {
            offset: offset + base,
            message,
        },
        other => other,
    }
}

/// Parses a Standard MIDI File into a [`Score`].
///
/// Notes left open at the end of their track are closed there with a
/// warning. Notes off the 88-key range are dropped with a warning. Sustain
/// pedal (CC 64) values of 64 and above hold the pedal down.
pub fn parse_midi(bytes: &[u8]) -> Result<Parsed<Score>> {
    let mut r = Reader::new(bytes, 0);
    if r.take(4).map_err(|_| Error::midi(0, "missing MThd header"))? != b"MThd" {
        return Err(Error::midi(0, "missing MThd header"));
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return Err(Error::midi(4, format!("header length {header_len} < 6")));
    }
    let header = r.take(header_len)?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let ntracks = u16::from_be_bytes([header[2], header[3]]);
    let division_word = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(Error::midi(8, format!("unsupported MIDI format {format}")));
    }
    let division = if division_word & 0x8000 != 0 {
        let fps = -((division_word >> 8) as u8 as i8) as i32;
        let ticks_per_frame = i32::from(division_word & 0xff);
        let fps = match fps {
            24 | 25 | 30 => f64::from(fps),
            29 => 30_000.0 / 1001.0,
            other => return Err(Error::midi(12, format!("invalid SMPTE frame rate {other}"))),
        };
        if ticks_per_frame == 0 {
            return Err(Error::midi(12, "zero ticks per SMPTE frame"));
        }
        Division::Timecode(1.0 / (fps * f64::from(ticks_per_frame)))
    } else {
        if division_word == 0 {
            return Err(Error::midi(12, "zero ticks per quarter note"));
        }
        Division::Metrical(division_word)
    };

    let mut diagnostics = Vec::new();
    let mut tracks = Vec::new();
    while r.remaining() > 0 {
        let chunk_start = r.pos;
        if r.remaining() < 8 {
            return Err(Error::midi(chunk_start, "truncated chunk header"));
        }
        let kind = r.take(4)?;
        let len = r.u32()? as usize;
        if r.remaining() < len {
            return Err(Error::midi(
                chunk_start + 4,
                format!("chunk length {len} exceeds the {} remaining bytes", r.remaining()),
            ));
        }
        let data_start = r.pos;
        let data = r.take(len)?;
        if kind == b"MTrk" {
            tracks.push(read_track(data, data_start)?);
        } else {
            diagnostics.push(Diagnostic::info(format!(
                "skipped unknown chunk {:?} at byte {chunk_start}",
                String::from_utf8_lossy(kind)
            )));
        }
    }
    if tracks.len() != usize::from(ntracks) {
        diagnostics.push(Diagnostic::warning(format!(
            "header declares {ntracks} tracks, found {}",
            tracks.len()
        )));
    }
    if format == 0 && tracks.len() > 1 {
        diagnostics.push(Diagnostic::warning("format 0 file with more than one track"));
    }

    let tempo_changes: Vec<(u64, u32)> = tracks
        .iter()
        .flat_map(|t| t.events.iter())
        .filter_map(|(tick, e)| match e {
            Event::Tempo(t) => Some((*tick, *t)),
            _ => None,
        })
        .collect();
    let tempo = match division {
        Division::Metrical(_) => TempoMap::build(division, &tempo_changes),
        Division::Timecode(_) => TempoMap::build(division, &[]),
    };

    let mut title = String::new();
    let mut notes = Vec::new();
    let mut sustain = Vec::new();
    for (track_idx, track) in tracks.iter().enumerate() {
        let mut open: HashMap<(u8, u8), (u64, u8)> = HashMap::new();
        let mut pedal: HashMap<u8, u64> = HashMap::new();
        for (tick, event) in &track.events {
            match *event {
                Event::NoteOn {
                    channel,
                    pitch,
                    velocity,
                } => {
                    if let Some((start, vel)) = open.insert((channel, pitch), (*tick, velocity)) {
                        // Retrigger of a sounding note closes the previous one.
                        notes.push(make_note(&tempo, pitch, start, *tick, vel));
                    }
                }
                Event::NoteOff { channel, pitch } => {
                    if let Some((start, vel)) = open.remove(&(channel, pitch)) {
                        notes.push(make_note(&tempo, pitch, start, *tick, vel));
                    }
                }
                Event::Sustain { channel, down: true } => {
                    pedal.entry(channel).or_insert(*tick);
                }
                Event::Sustain { channel, down: false } => {
                    if let Some(start) = pedal.remove(&channel) {
                        sustain.push((tempo.seconds(start), tempo.seconds(*tick)));
                    }
                }
                Event::TrackName(ref name) if track_idx == 0 && title.is_empty() => {
                    title = name.clone();
                }
                _ => {}
            }
        }
        let mut dangling: Vec<_> = open.into_iter().collect();
        dangling.sort_by_key(|((ch, p), (start, _))| (*start, *ch, *p));
        for ((channel, pitch), (start, vel)) in dangling {
            diagnostics.push(Diagnostic::warning(format!(
                "track {track_idx}: note {pitch} on channel {channel} from tick {start} never released; closed at end of track (tick {})",
                track.end_tick
            )));
            notes.push(make_note(&tempo, pitch, start, track.end_tick, vel));
        }
        let mut pedals: Vec<_> = pedal.into_iter().collect();
        pedals.sort();
        for (_, start) in pedals {
            sustain.push((tempo.seconds(start), tempo.seconds(track.end_tick)));
        }
    }

    let parsed = Score::normalized(title, notes, sustain);
    diagnostics.extend(parsed.diagnostics);
    Ok(Parsed {
        value: parsed.value,
        diagnostics,
    })
}

fn make_note(tempo: &TempoMap, pitch: u8, start: u64, end: u64, velocity: u8) -> NoteEvent {
    NoteEvent {
        velocity,
        ..NoteEvent::new(pitch, tempo.seconds(start), tempo.seconds(end))
    }
}
