use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn keybench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keybench"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Format-0 SMF at PPQ 480, 120 bpm, holding each `(pitch, ticks)` in turn.
fn midi(notes: &[(u8, u32)]) -> Vec<u8> {
    let mut track = vec![0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20];
    for &(pitch, ticks) in notes {
        track.extend([0x00, 0x90, pitch, 80]);
        let mut delta = vec![(ticks & 0x7f) as u8];
        let mut v = ticks >> 7;
        while v > 0 {
            delta.insert(0, (v & 0x7f) as u8 | 0x80);
            v >>= 7;
        }
        track.extend(delta);
        track.extend([0x80, pitch, 0]);
    }
    track.extend([0x00, 0xff, 0x2f, 0x00]);
    let mut out = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xe0MTrk".to_vec();
    out.extend((track.len() as u32).to_be_bytes());
    out.extend(track);
    out
}

#[test]
fn roll_of_a_quarter_note_matches_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("quarter.mid");
    fs::write(&file, midi(&[(60, 480)])).unwrap();
    let out = keybench(&["roll", "--midi", path(&file)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut golden = String::from("# keybench roll v1\nframe,keys,fingers,sustain\n");
    for f in 0..10 {
        golden.push_str(&format!("{f},39,,0\n"));
    }
    assert_eq!(stdout(&out), golden);
    assert!(stderr(&out).contains("frames=10"));
}

#[test]
fn roll_writes_files_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("roll");
    let out = keybench(&[
        "roll",
        "--song",
        "c-major-scale",
        "--dt",
        "0.1",
        "--out-dir",
        path(&out_dir),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(out_dir.join("roll.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 80);
    assert!(csv.contains("\n0,39,0,0\n"));
    let summary = fs::read_to_string(out_dir.join("roll_summary.txt")).unwrap();
    assert!(summary.contains("frames=80\n") && summary.contains("labeled_fraction=1\n"));
}

#[test]
fn roll_of_an_empty_file_has_no_frames() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("empty.mid");
    fs::write(&file, midi(&[])).unwrap();
    let out = keybench(&["roll", "--midi", path(&file)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "# keybench roll v1\nframe,keys,fingers,sustain\n");
    assert!(stderr(&out).contains("frames=0"));
}

#[test]
fn invalid_arguments_are_usage_errors() {
    let out = keybench(&["roll", "--song", "single-note", "--dt", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("positive"));
    let out = keybench(&["roll", "--song", "a", "--midi", "b.mid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_song_lists_available_songs() {
    let dir = tempfile::tempdir().unwrap();
    let out = keybench(&["play", "--song", "missing", "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("missing") && err.contains("c-major-scale") && err.contains("single-note"));
}

#[test]
fn malformed_midi_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.mid");
    fs::write(
        &file,
        b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xe0MTrk\x00\x00\x00\xff",
    )
    .unwrap();
    let out = keybench(&["roll", "--midi", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("byte 18"), "{}", stderr(&out));
}

#[test]
fn play_is_deterministic_and_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = keybench(&[
            "play",
            "--song",
            "single-note",
            "--iters",
            "3",
            "--seed",
            "5",
            "--out-dir",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    for file in ["report.txt", "frames.csv", "trajectory.jsonl"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.starts_with("song=single-note\nseed=5\n"));
    assert!(report.contains("frames=20\n"));
    let frames = fs::read_to_string(a.join("frames.csv")).unwrap();
    assert!(frames.starts_with("# keybench frames v1\nframe,evaluated,precision,recall,f1\n"));
    let trajectory = fs::read_to_string(a.join("trajectory.jsonl")).unwrap();
    assert_eq!(trajectory.lines().count(), 21);
}

#[test]
fn zero_iterations_play_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = keybench(&[
        "play",
        "--song",
        "single-note",
        "--iters",
        "0",
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\nf1=0\n"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(&config, "[env]\ndt_control = 0.1\n\n[planner]\niterations = 0\n").unwrap();
    let play = |extra: &[&str], name: &str| {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "play",
            "--song",
            "single-note",
            "--config",
            path(&config),
            "--out-dir",
            path(&out_dir),
        ];
        args.extend_from_slice(extra);
        let out = keybench(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    assert!(play(&[], "file").contains("frames=10\n"));
    assert!(play(&["--dt", "0.05"], "flag").contains("frames=20\n"));

    fs::write(&config, "[env]\nunknown_key = 1\n").unwrap();
    let out = keybench(&[
        "play",
        "--song",
        "single-note",
        "--config",
        path(&config),
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown_key"));
}

#[test]
fn sweep_over_dt_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = keybench(&[
        "sweep",
        "--song",
        "single-note",
        "--axis",
        "dt",
        "--values",
        "0.05,0.1,0.05",
        "--seeds",
        "0,1",
        "--iters",
        "1",
        "--out-dir",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("duplicate sweep value 0.05"));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# keybench sweep v1");
    assert_eq!(lines[1], "axis,value,seed,f1,precision,recall,steps,wall_time_s");
    assert_eq!(lines.len(), 2 + 4);
    assert!(lines[2].starts_with("dt,0.05,0,") && lines[5].starts_with("dt,0.1,1,"));
    let steps: Vec<&str> = lines[2..].iter().map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(steps, vec!["20", "20", "10", "10"]);
}

#[test]
fn sweep_rejects_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = keybench(&[
        "sweep",
        "--song",
        "single-note",
        "--axis",
        "dt",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_ne!(out.status.code(), Some(0));
    let out = keybench(&[
        "sweep",
        "--song",
        "single-note",
        "--axis",
        "lookahead",
        "--values",
        "1.5",
        "--out-dir",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn logged_episodes_evaluate_to_the_same_f1() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("data").join("zero.jsonl");
    let out = keybench(&[
        "log",
        "--song",
        "c-major-scale",
        "--policy",
        "zero",
        "--episodes",
        "2",
        "--out",
        path(&file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "episodes=2\ntotal_steps=320\nmean_f1=0\n");
    let out = keybench(&["eval", path(&file)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("episode,song,seed,steps,f1\n0,c-major-scale,0,160,0\n1,c-major-scale,1,160,0\n"));
    assert!(text.ends_with("mean_f1=0\n"));

    let scripted = dir.path().join("scripted.jsonl");
    let out = keybench(&[
        "log",
        "--song",
        "single-note",
        "--policy",
        "scripted",
        "--out",
        path(&scripted),
    ]);
    assert!(stdout(&out).contains("mean_f1=1\n"));
    let out = keybench(&["eval", path(&scripted)]);
    assert!(stdout(&out).ends_with("mean_f1=1\n"));

    let out = keybench(&[
        "log",
        "--song",
        "single-note",
        "--episodes",
        "0",
        "--out",
        path(&scripted),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_over_stdio() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_keybench"))
        .args(["serve", "--stdio"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"{\"kind\":\"handshake\",\"version\":1}\n{\"kind\":\"step\",\"action\":[]}\n{\"kind\":\"close\"}\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("\"action_dim\":23") && lines[0].contains("\"obs_dim\":1227"));
    assert!(lines[1].contains("\"code\":\"not_reset\""));
    assert_eq!(lines[2], "{\"kind\":\"close\"}");
}
