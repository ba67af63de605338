//! Named scores: a few built-in fixtures plus MIDI files loaded from disk.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Diagnostic, Error, Result};
use crate::keys::Finger;
use crate::score::{attach_fingering, parse_fingering, parse_midi, NoteEvent, Score, DEFAULT_FINGERING_TOLERANCE};

pub const SINGLE_NOTE: &str = "single-note";
pub const C_MAJOR_SCALE: &str = "c-major-scale";
pub const TWO_HANDS: &str = "two-hands";

/// Middle C held from 0.5 s to 1.0 s by the right thumb.
pub fn single_note() -> Score {
    let note = NoteEvent::new(60, 0.5, 1.0).with_finger(finger(0));
    Score::normalized(SINGLE_NOTE, vec![note], vec![]).value
}

/// C4 to C5 in quarter notes at 60 bpm, right hand fingered 1 2 3 1 2 3 4 5.
pub fn c_major_scale() -> Score {
    const PITCHES: [u8; 8] = [60, 62, 64, 65, 67, 69, 71, 72];
    const FINGERS: [u8; 8] = [0, 1, 2, 0, 1, 2, 3, 4];
    let notes = PITCHES
        .iter()
        .zip(FINGERS)
        .enumerate()
        .map(|(i, (&p, f))| NoteEvent::new(p, i as f64, i as f64 + 1.0).with_finger(finger(f)))
        .collect();
    Score::normalized(C_MAJOR_SCALE, notes, vec![]).value
}

/// Right-hand E4-G4 half notes over a left-hand C3 pedal tone, with sustain
/// through the second bar.
pub fn two_hands() -> Score {
    let notes = vec![
        NoteEvent::new(64, 0.0, 1.0).with_finger(finger(2)),
        NoteEvent::new(67, 1.0, 2.0).with_finger(finger(4)),
        NoteEvent::new(48, 0.0, 2.0).with_finger(finger(9)),
        NoteEvent::new(52, 1.0, 1.5).with_finger(finger(7)),
    ];
    Score::normalized(TWO_HANDS, notes, vec![(1.0, 2.0)]).value
}

fn finger(i: u8) -> Finger {
    Finger::new(i).expect("finger index below 10")
}

/// Songs addressable by name.
#[derive(Debug, Clone, Default)]
pub struct SongLibrary {
    songs: BTreeMap<String, Score>,
}

impl SongLibrary {
    pub fn builtin() -> Self {
        let mut lib = SongLibrary::default();
        lib.insert(SINGLE_NOTE, single_note());
        lib.insert(C_MAJOR_SCALE, c_major_scale());
        lib.insert(TWO_HANDS, two_hands());
        lib
    }

    pub fn insert(&mut self, name: impl Into<String>, score: Score) {
        self.songs.insert(name.into(), score);
    }

    pub fn names(&self) -> Vec<String> {
        self.songs.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<&Score> {
        self.songs.get(name).ok_or_else(|| Error::UnknownSong {
            name: name.to_string(),
            available: self.names(),
        })
    }

    pub fn len(&self) -> usize {
        self.songs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.songs.is_empty()
    }

    /// Adds every `*.mid`/`*.midi` file in `dir`, named by file stem. A
    /// sibling `<stem>.fingering.txt` supplies fingering when present.
    pub fn load_dir(&mut self, dir: &Path) -> Result<Vec<Diagnostic>> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
            })
            .collect();
        entries.sort();
        let mut diagnostics = Vec::new();
        for path in entries {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::invalid(format!("non-UTF-8 file name {}", path.display())))?
                .to_string();
            let fingering = path.with_file_name(format!("{stem}.fingering.txt"));
            let loaded = load_score(&path, fingering.exists().then_some(fingering.as_path()))?;
            diagnostics.extend(loaded.diagnostics.into_iter().map(|d| Diagnostic {
                message: format!("{stem}: {}", d.message),
                ..d
            }));
            self.insert(stem, loaded.value);
        }
        Ok(diagnostics)
    }
}

/// Reads a MIDI file and, optionally, a fingering file to attach.
pub fn load_score(midi: &Path, fingering: Option<&Path>) -> Result<crate::score::Parsed<Score>> {
    let bytes = std::fs::read(midi)?;
    let mut parsed = parse_midi(&bytes)?;
    if let Some(path) = fingering {
        let text = std::fs::read_to_string(path)?;
        let table = parse_fingering(&text);
        parsed.diagnostics.extend(table.diagnostics);
        let attached = attach_fingering(&parsed.value, &table.value, DEFAULT_FINGERING_TOLERANCE);
        parsed.diagnostics.extend(attached.diagnostics);
        parsed.value = attached.value;
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::to_piano_roll;

    #[test]
    fn builtins_are_fully_labeled() {
        let lib = SongLibrary::builtin();
        assert_eq!(lib.names(), vec![C_MAJOR_SCALE, SINGLE_NOTE, TWO_HANDS]);
        for name in lib.names() {
            assert_eq!(lib.get(&name).unwrap().labeled_fraction(), 1.0, "{name}");
        }
    }

    #[test]
    fn scale_fixture_shape() {
        let score = c_major_scale();
        assert_eq!(score.notes.len(), 8);
        assert_eq!(score.duration, 8.0);
        let roll = to_piano_roll(&score, 0.05).unwrap();
        assert_eq!(roll.len(), 160);
        assert!(roll.frames.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn unknown_song_lists_available() {
        match SongLibrary::builtin().get("nope") {
            Err(Error::UnknownSong { name, available }) => {
                assert_eq!(name, "nope");
                assert_eq!(available.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
