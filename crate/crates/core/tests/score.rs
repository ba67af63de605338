mod support;

use keybench::score::{parse_midi, to_piano_roll, Score, TempoMap};
use keybench::songs::load_score;
use keybench::{Error, Severity};
use proptest::prelude::*;
use support::{quarter_note, smf, TrackBuilder};

/// Seconds at `tick` by walking every tick under the tempo in force.
fn brute_force_seconds(ppq: u16, changes: &[(u64, u32)], tick: u64) -> f64 {
    let mut sorted = changes.to_vec();
    sorted.sort_by_key(|c| c.0);
    let mut seconds = 0.0;
    for t in 0..tick {
        let tempo = sorted.iter().rev().find(|c| c.0 <= t).map_or(500_000, |c| c.1);
        seconds += f64::from(tempo) / 1e6 / f64::from(ppq);
    }
    seconds
}

#[test]
fn quarter_note_at_120_bpm() {
    let parsed = parse_midi(&quarter_note(60, None)).unwrap();
    let score = parsed.value;
    assert_eq!(score.notes.len(), 1);
    assert_eq!(score.notes[0].onset, 0.0);
    assert!((score.notes[0].offset - 0.5).abs() < 1e-12);
    let roll = to_piano_roll(&score, 0.05).unwrap();
    assert_eq!(roll.len(), 10);
    assert!((0..10).all(|f| roll.is_active(f, 39)));
}

#[test]
fn tempo_change_mid_note() {
    let score = parse_midi(&quarter_note(60, Some((240, 1_000_000)))).unwrap().value;
    let offset = score.notes[0].offset;
    assert!((offset - 0.75).abs() < 1e-9);
    let reference = brute_force_seconds(480, &[(0, 500_000), (240, 1_000_000)], 480);
    assert!((offset - reference).abs() < 1e-9);
}

proptest! {
    #[test]
    fn tempo_map_matches_tick_walk(
        ppq in 24u16..960,
        changes in prop::collection::vec((0u64..4000, 200_000u32..2_000_000), 0..6),
        tick in 0u64..5000,
    ) {
        let map = TempoMap::new(ppq, &changes).unwrap();
        // Equal ticks: the last listed change wins in both.
        let mut dedup: Vec<(u64, u32)> = Vec::new();
        let mut sorted = changes.clone();
        sorted.sort_by_key(|c| c.0);
        for c in sorted {
            match dedup.last_mut() {
                Some(last) if last.0 == c.0 => *last = c,
                _ => dedup.push(c),
            }
        }
        let expected = brute_force_seconds(ppq, &dedup, tick);
        prop_assert!((map.seconds(tick) - expected).abs() < 1e-9 * expected.max(1.0));
    }
}

#[test]
fn format_one_tempo_track_and_note_track() {
    let conductor = TrackBuilder::new().name(0, "etude").tempo(0, 1_000_000).end(0);
    let notes = TrackBuilder::new()
        .on(0, 0, 60, 90)
        .off(96, 0, 60)
        .on(0, 1, 64, 70)
        .off(96, 1, 64)
        .end(0);
    let parsed = parse_midi(&smf(1, 96, &[conductor, notes])).unwrap();
    let score = parsed.value;
    assert_eq!(score.title, "etude");
    let times: Vec<(u8, f64, f64)> = score.notes.iter().map(|n| (n.pitch, n.onset, n.offset)).collect();
    assert_eq!(times, vec![(60, 0.0, 1.0), (64, 1.0, 2.0)]);
    assert_eq!(score.notes[0].velocity, 90);
    assert!((score.duration - 2.0).abs() < 1e-12);
}

#[test]
fn running_status_and_zero_velocity_note_off() {
    // 0x90 status once, then data bytes only; velocity 0 ends the note.
    let track = TrackBuilder::new()
        .on(0, 0, 60, 80)
        .raw(240, &[60, 0])
        .raw(0, &[62, 80])
        .raw(240, &[62, 0])
        .end(0);
    let score = parse_midi(&smf(0, 480, &[track])).unwrap().value;
    let pitches: Vec<u8> = score.notes.iter().map(|n| n.pitch).collect();
    assert_eq!(pitches, vec![60, 62]);
    assert!((score.notes[1].offset - 0.5).abs() < 1e-12);
}

#[test]
fn dangling_note_closed_at_track_end() {
    let track = TrackBuilder::new().on(0, 0, 60, 80).end(960);
    let parsed = parse_midi(&smf(0, 480, &[track])).unwrap();
    assert_eq!(parsed.value.notes.len(), 1);
    assert!((parsed.value.notes[0].offset - 1.0).abs() < 1e-12);
    assert!(parsed
        .diagnostics
        .iter()
        .any(|d| d.severity == Severity::Warning && d.message.contains("never released")));
}

#[test]
fn off_keyboard_notes_dropped() {
    let track = TrackBuilder::new()
        .on(0, 0, 10, 80)
        .on(0, 0, 60, 80)
        .off(480, 0, 10)
        .off(0, 0, 60)
        .end(0);
    let parsed = parse_midi(&smf(0, 480, &[track])).unwrap();
    assert_eq!(parsed.value.notes.len(), 1);
    assert_eq!(parsed.value.notes[0].pitch, 60);
    assert!(parsed.diagnostics.iter().any(|d| d.message.contains("88-key")));
}

#[test]
fn sustain_pedal_interval() {
    let track = TrackBuilder::new()
        .on(0, 0, 60, 80)
        .pedal(240, 0, 127)
        .off(240, 0, 60)
        .pedal(480, 0, 0)
        .end(0);
    let score = parse_midi(&smf(0, 480, &[track])).unwrap().value;
    assert_eq!(score.sustain_intervals.len(), 1);
    let (a, b) = score.sustain_intervals[0];
    assert!((a - 0.25).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    let roll = to_piano_roll(&score, 0.05).unwrap();
    assert!(!roll.sustain_at(4) && roll.sustain_at(5) && roll.sustain_at(19));
}

#[test]
fn empty_file_gives_empty_roll() {
    let score = parse_midi(&smf(0, 480, &[TrackBuilder::new().end(0)])).unwrap().value;
    assert!(score.notes.is_empty());
    let roll = to_piano_roll(&score, 0.05).unwrap();
    assert_eq!(roll.len(), 0);
}

#[test]
fn malformed_files_report_byte_offsets() {
    match parse_midi(b"RIFF0000") {
        Err(Error::Midi { offset, .. }) => assert_eq!(offset, 0),
        other => panic!("expected MIDI error, got {other:?}"),
    }
    let mut bytes = quarter_note(60, None);
    let declared = bytes.len();
    bytes.truncate(declared - 3);
    match parse_midi(&bytes) {
        Err(Error::Midi { offset, message }) => {
            assert_eq!(offset, 18, "{message}");
        }
        other => panic!("expected MIDI error, got {other:?}"),
    }
}

#[test]
fn canonical_dump_round_trips() {
    let track = TrackBuilder::new()
        .on(0, 0, 60, 80)
        .pedal(0, 0, 100)
        .on(120, 0, 67, 80)
        .off(360, 0, 60)
        .off(77, 0, 67)
        .pedal(3, 0, 0)
        .end(0);
    let score = parse_midi(&smf(0, 480, &[track])).unwrap().value;
    let text = score.to_canonical();
    // Velocity is not part of the dump.
    let back = Score::from_canonical(&text).unwrap();
    assert_eq!(back.notes.len(), score.notes.len());
    assert_eq!(back.sustain_intervals, score.sustain_intervals);
    assert_eq!(back.to_canonical(), text);
}

#[test]
fn fingering_file_attaches_labels() {
    let dir = tempfile::tempdir().unwrap();
    let midi = dir.path().join("two.mid");
    let track = TrackBuilder::new()
        .on(0, 0, 60, 80)
        .off(480, 0, 60)
        .on(0, 0, 48, 80)
        .off(480, 0, 48)
        .end(0);
    std::fs::write(&midi, smf(0, 480, &[track])).unwrap();
    let fingering = dir.path().join("two.fingering.txt");
    std::fs::write(
        &fingering,
        "//Version: PianoFingering_v170101\n0\t0.0\t0.5\tC4\t80\t80\t0\t1\n1\t0.5\t1.0\tC3\t80\t80\t1\t-2\n",
    )
    .unwrap();
    let parsed = load_score(&midi, Some(&fingering)).unwrap();
    let fingers: Vec<Option<usize>> = parsed.value.notes.iter().map(|n| n.finger.map(|f| f.index())).collect();
    assert_eq!(fingers, vec![Some(0), Some(6)]);
    assert_eq!(parsed.value.labeled_fraction(), 1.0);
}
