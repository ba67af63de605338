//! PIG-style fingering annotations.
//!
//! Each data line is tab separated: note id, onset, offset, spelled pitch,
//! onset velocity, offset velocity, channel, finger. Fingers are 1..5 for the
//! right hand (thumb..little) and -1..-5 for the left hand. A substitution
//! such as `2_1` keeps the first finger.

use super::{Parsed, Score};
use crate::error::Diagnostic;
use crate::keys::{Finger, HIGHEST_PITCH, LOWEST_PITCH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingeringEntry {
    pub pitch: u8,
    pub onset: f64,
    pub finger: Finger,
}

/// Fingering labels keyed by `(pitch, onset)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FingeringTable {
    pub entries: Vec<FingeringEntry>,
}

impl FingeringTable {
    pub fn get(&self, pitch: u8, onset: f64) -> Option<Finger> {
        self.entries
            .iter()
            .find(|e| e.pitch == pitch && e.onset == onset)
            .map(|e| e.finger)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Converts a spelled pitch such as `C4`, `F#3`, `Bb-1` into a MIDI number
/// (C4 = 60). Any number of `#` or `b` accidentals is accepted.
pub fn parse_pitch_name(name: &str) -> Option<u8> {
    let mut chars = name.chars();
    let pitch_class: i32 = match chars.next()?.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str();
    let octave_start = rest.find(|c: char| c == '-' || c.is_ascii_digit())?;
    let (accidentals, octave) = rest.split_at(octave_start);
    let mut shift = 0;
    for c in accidentals.chars() {
        match c {
            '#' => shift += 1,
            'b' => shift -= 1,
            _ => return None,
        }
    }
    let octave: i32 = octave.parse().ok()?;
    let midi = (octave + 1) * 12 + pitch_class + shift;
    u8::try_from(midi).ok().filter(|m| *m <= 127)
}

fn parse_finger_field(field: &str) -> Option<Finger> {
    let first = field.split('_').next()?.trim();
    let value: i32 = first.parse().ok()?;
    match value {
        1..=5 => Finger::new((value - 1) as u8),
        -5..=-1 => Finger::new((4 - value) as u8),
        _ => None,
    }
}

/// Parses a PIG-style fingering file. Rejected lines are reported as
/// diagnostics and skipped.
pub fn parse_fingering(text: &str) -> Parsed<FingeringTable> {
    let mut entries = Vec::new();
    let mut diagnostics = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with("//") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let reject = |why: &str| Diagnostic::warning(format!("fingering line {}: {why}", lineno + 1));
        if fields.len() < 8 {
            diagnostics.push(reject(&format!("expected 8 fields, found {}", fields.len())));
            continue;
        }
        let Ok(onset) = fields[1].parse::<f64>() else {
            diagnostics.push(reject(&format!("bad onset {:?}", fields[1])));
            continue;
        };
        let Some(pitch) = parse_pitch_name(fields[3]) else {
            diagnostics.push(reject(&format!("unparseable pitch {:?}", fields[3])));
            continue;
        };
        if !(LOWEST_PITCH..=HIGHEST_PITCH).contains(&pitch) {
            diagnostics.push(reject(&format!("pitch {} off the keyboard", fields[3])));
            continue;
        }
        let Some(finger) = parse_finger_field(fields[7]) else {
            diagnostics.push(reject(&format!("bad finger {:?}", fields[7])));
            continue;
        };
        entries.push(FingeringEntry { pitch, onset, finger });
    }
    Parsed {
        value: FingeringTable { entries },
        diagnostics,
    }
}

/// Labels each note with the unused table entry of equal pitch whose onset
/// is nearest and within `tol` seconds. Closest pairs are matched first; each
/// entry labels at most one note.
pub fn attach_fingering(score: &Score, table: &FingeringTable, tol: f64) -> Parsed<Score> {
    // Absorbs decimal round-off in annotation onsets.
    const SLACK: f64 = 1e-9;
    let tol = tol.max(0.0);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ni, note) in score.notes.iter().enumerate() {
        for (ei, entry) in table.entries.iter().enumerate() {
            let gap = (note.onset - entry.onset).abs();
            if entry.pitch == note.pitch && gap <= tol + SLACK {
                pairs.push((gap, ni, ei));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out = score.clone();
    let mut note_done = vec![false; score.notes.len()];
    let mut entry_used = vec![false; table.entries.len()];
    for (_, ni, ei) in pairs {
        if note_done[ni] || entry_used[ei] {
            continue;
        }
        note_done[ni] = true;
        entry_used[ei] = true;
        out.notes[ni].finger = Some(table.entries[ei].finger);
    }

    let diagnostics = table
        .entries
        .iter()
        .zip(&entry_used)
        .filter(|(_, used)| !**used)
        .map(|(e, _)| {
            Diagnostic::info(format!(
                "fingering entry for pitch {} at {:.6} s matched no note",
                e.pitch, e.onset
            ))
        })
        .collect();
    Parsed {
        value: out,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::NoteEvent;

    #[test]
    fn spelled_pitches() {
        assert_eq!(parse_pitch_name("C4"), Some(60));
        assert_eq!(parse_pitch_name("A0"), Some(21));
        assert_eq!(parse_pitch_name("C8"), Some(108));
        assert_eq!(parse_pitch_name("F#3"), Some(54));
        assert_eq!(parse_pitch_name("Bb3"), Some(58));
        assert_eq!(parse_pitch_name("B#3"), Some(60));
        assert_eq!(parse_pitch_name("Cb4"), Some(59));
        assert_eq!(parse_pitch_name("C-1"), Some(0));
        assert_eq!(parse_pitch_name("H4"), None);
        assert_eq!(parse_pitch_name("C"), None);
        assert_eq!(parse_pitch_name("Cx4"), None);
    }

    #[test]
    fn parses_example_line() {
        let table = parse_fingering("0\t0.0\t0.5\tC4\t64\t64\t0\t1").value;
        assert_eq!(table.get(60, 0.0), Some(Finger::new(0).unwrap()));
    }

    #[test]
    fn finger_field_mapping() {
        let finger = |f: &str| parse_finger_field(f).map(Finger::index);
        assert_eq!(finger("1"), Some(0));
        assert_eq!(finger("5"), Some(4));
        assert_eq!(finger("-1"), Some(5));
        assert_eq!(finger("-5"), Some(9));
        assert_eq!(finger("2_1"), Some(1));
        assert_eq!(finger("-3_-1"), Some(7));
        assert_eq!(finger("0"), None);
        assert_eq!(finger("6"), None);
        assert_eq!(finger("-6"), None);
    }

    #[test]
    fn rejects_bad_lines_with_diagnostics() {
        let text = "//Version: PianoFingeringDataset v1.2\n\
                    0\t0.0\t0.5\tC4\t64\t64\t0\t1\n\
                    1\t0.5\t1.0\tQ4\t64\t64\t0\t2\n\
                    2\t1.0\t1.5\tD4\t64\t64\t0\t0\n\
                    3\t1.5\t2.0\tE4\t64\t64\t0\t-6\n\
                    4\t2.0\t2.5\tF4\t64\t64\t1\t-2\n";
        let parsed = parse_fingering(text);
        assert_eq!(parsed.value.len(), 2);
        assert_eq!(parsed.diagnostics.len(), 3);
        assert_eq!(parsed.value.get(65, 2.0).map(Finger::index), Some(6));
    }

    #[test]
    fn nearest_within_tolerance_first_note_only() {
        let score = Score::normalized(
            "",
            vec![NoteEvent::new(60, 0.0, 0.05), NoteEvent::new(60, 0.06, 0.1)],
            vec![],
        )
        .value;
        let table = FingeringTable {
            entries: vec![FingeringEntry {
                pitch: 60,
                onset: 0.01,
                finger: Finger::new(2).unwrap(),
            }],
        };
        let out = attach_fingering(&score, &table, 0.01).value;
        assert_eq!(out.notes[0].finger, Finger::new(2));
        assert_eq!(out.notes[1].finger, None);
    }

    #[test]
    fn empty_table_is_identity() {
        let score = Score::normalized("x", vec![NoteEvent::new(60, 0.0, 1.0)], vec![]).value;
        let out = attach_fingering(&score, &FingeringTable::default(), 0.01);
        assert_eq!(out.value, score);
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn entry_used_once_and_pitch_must_match() {
        let score = Score::normalized(
            "",
            vec![
                NoteEvent::new(60, 0.0, 0.5),
                NoteEvent::new(62, 0.0, 0.5),
                NoteEvent::new(60, 0.5, 1.0),
            ],
            vec![],
        )
        .value;
        let table = parse_fingering("0\t0.005\t0.5\tC4\t64\t64\t0\t3\n1\t0.5\t1.0\tC4\t64\t64\t0\t-1").value;
        let out = attach_fingering(&score, &table, 0.01).value;
        let labels: Vec<_> = out
            .notes
            .iter()
            .map(|n| (n.pitch, n.finger.map(Finger::index)))
            .collect();
        assert_eq!(labels, vec![(60, Some(2)), (62, None), (60, Some(5))]);
    }
}
