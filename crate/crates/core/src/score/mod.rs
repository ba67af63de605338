//! Musical scores: parsed note events, fingering annotations and the
//! frame-discretized piano roll used as the goal signal.

mod fingering;
mod midi;
mod roll;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use fingering::{attach_fingering, parse_fingering, parse_pitch_name, FingeringEntry, FingeringTable};
pub use midi::{parse_midi, TempoMap};
pub use roll::{to_piano_roll, FingerTarget, PianoRoll};

use crate::error::{Diagnostic, Error, Result};
use crate::keys::{key_of_pitch, Finger, HIGHEST_PITCH, LOWEST_PITCH};

/// Default control timestep, 20 Hz.
pub const DEFAULT_DT: f64 = 0.05;

/// Default onset tolerance when matching fingering annotations to notes.
pub const DEFAULT_FINGERING_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset: f64,
    pub offset: f64,
    pub finger: Option<Finger>,
    /// Recorded from note-on; nothing downstream reads it.
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset: f64, offset: f64) -> Self {
        NoteEvent {
            pitch,
            onset,
            offset,
            finger: None,
            velocity: 64,
        }
    }

    pub fn with_finger(mut self, finger: Finger) -> Self {
        self.finger = Some(finger);
        self
    }

    pub fn key(&self) -> usize {
        key_of_pitch(self.pitch).expect("score notes are always on the keyboard")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Score {
    pub title: String,
    pub notes: Vec<NoteEvent>,
    pub sustain_intervals: Vec<(f64, f64)>,
    pub duration: f64,
}

/// A parse result together with the non-fatal diagnostics gathered on the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub diagnostics: Vec<Diagnostic>,
}

impl Score {
    /// Builds a score from raw parts, enforcing the note and sustain invariants.
    ///
    /// Notes off the keyboard or with non-positive duration are dropped. Two
    /// notes of the same pitch never overlap in the result: an earlier note is
    /// cut at the onset of the next one. Sustain intervals are merged.
    pub fn normalized(title: impl Into<String>, notes: Vec<NoteEvent>, sustain: Vec<(f64, f64)>) -> Parsed<Score> {
        let mut diagnostics = Vec::new();
        let mut kept: Vec<NoteEvent> = Vec::with_capacity(notes.len());
        for note in notes {
            if !(LOWEST_PITCH..=HIGHEST_PITCH).contains(&note.pitch) {
                diagnostics.push(Diagnostic::warning(format!(
                    "dropped note with pitch {} at {:.6} s: outside the 88-key range",
                    note.pitch, note.onset
                )));
                continue;
            }
            if !(note.onset.is_finite() && note.offset.is_finite()) || note.onset < 0.0 {
                diagnostics.push(Diagnostic::warning(format!(
                    "dropped note with pitch {}: invalid times [{}, {})",
                    note.pitch, note.onset, note.offset
                )));
                continue;
            }
            if note.offset <= note.onset {
                diagnostics.push(Diagnostic::warning(format!(
                    "dropped zero-length note with pitch {} at {:.6} s",
                    note.pitch, note.onset
                )));
                continue;
            }
            kept.push(note);
        }

        // Resolve same-pitch overlaps.
        kept.sort_by(|a, b| {
            a.pitch
                .cmp(&b.pitch)
                .then(a.onset.total_cmp(&b.onset))
                .then(b.offset.total_cmp(&a.offset))
        });
        let mut resolved: Vec<NoteEvent> = Vec::with_capacity(kept.len());
        for note in kept {
            if let Some(prev) = resolved.last_mut() {
                if prev.pitch == note.pitch && note.onset < prev.offset {
                    if note.onset <= prev.onset {
                        diagnostics.push(Diagnostic::warning(format!(
                            "dropped duplicate note with pitch {} at {:.6} s",
                            note.pitch, note.onset
                        )));
                        continue;
                    }
                    diagnostics.push(Diagnostic::info(format!(
                        "truncated note with pitch {} at {:.6} s to the next onset {:.6} s",
                        prev.pitch, prev.onset, note.onset
                    )));
                    prev.offset = note.onset;
                }
            }
            resolved.push(note);
        }
        resolved.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.pitch.cmp(&b.pitch)));

        let sustain_intervals = merge_intervals(sustain);
        let duration = resolved
            .iter()
            .map(|n| n.offset)
            .chain(sustain_intervals.iter().map(|s| s.1))
            .fold(0.0, f64::max);

        Parsed {
            value: Score {
                title: title.into(),
                notes: resolved,
                sustain_intervals,
                duration,
            },
            diagnostics,
        }
    }

    pub fn labeled_fraction(&self) -> f64 {
        if self.notes.is_empty() {
            return 0.0;
        }
        let labeled = self.notes.iter().filter(|n| n.finger.is_some()).count();
        labeled as f64 / self.notes.len() as f64
    }

    pub fn without_fingering(&self) -> Score {
        let mut out = self.clone();
        for note in &mut out.notes {
            note.finger = None;
        }
        out
    }

    /// Canonical text dump: header comments, then one tab-separated note per
    /// line (`pitch onset offset finger`, `-` for an unlabeled note).
    pub fn to_canonical(&self) -> String {
        let mut out = String::from("# keybench score v1\n");
        let _ = writeln!(out, "# title: {}", self.title);
        let _ = writeln!(out, "# duration: {}", self.duration);
        for (start, end) in &self.sustain_intervals {
            let _ = writeln!(out, "# sustain: {start} {end}");
        }
        for note in &self.notes {
            let finger = note.finger.map_or_else(|| "-".to_string(), |f| f.index().to_string());
            let _ = writeln!(out, "{}\t{}\t{}\t{}", note.pitch, note.onset, note.offset, finger);
        }
        out
    }

    pub fn from_canonical(text: &str) -> Result<Score> {
        let mut title = String::new();
        let mut notes = Vec::new();
        let mut sustain = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::invalid(format!("canonical score line {}: {what}", lineno + 1));
            if let Some(rest) = line.strip_prefix("# title: ") {
                title = rest.to_string();
            } else if let Some(rest) = line.strip_prefix("# sustain: ") {
                let mut parts = rest.split(' ');
                let start = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("sustain start"))?;
                let end = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("sustain end"))?;
                sustain.push((start, end));
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 4 {
                    return Err(bad("expected 4 tab-separated fields"));
                }
                let pitch: u8 = fields[0].parse().map_err(|_| bad("pitch"))?;
                let onset: f64 = fields[1].parse().map_err(|_| bad("onset"))?;
                let offset: f64 = fields[2].parse().map_err(|_| bad("offset"))?;
                let finger = match fields[3] {
                    "-" => None,
                    f => Some(
                        f.parse::<u8>()
                            .ok()
                            .and_then(Finger::new)
                            .ok_or_else(|| bad("finger"))?,
                    ),
                };
                notes.push(NoteEvent {
                    finger,
                    ..NoteEvent::new(pitch, onset, offset)
                });
            }
        }
        Ok(Score::normalized(title, notes, sustain).value)
    }
}

fn merge_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.retain(|(s, e)| s.is_finite() && e.is_finite() && e > s);
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (start, end) in intervals {
        match merged.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => merged.push((start, end)),
        }
    }
    merged
}
