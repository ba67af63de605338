use std::fmt::Write as _;

use keybench::score::{PianoRoll, Score};

/// First line of every roll CSV; bump the version when columns change.
pub const ROLL_CSV_HEADER: &str = "# keybench roll v1\nframe,keys,fingers,sustain";

/// First lines of every sweep CSV.
pub const SWEEP_CSV_HEADER: &str = "# keybench sweep v1\naxis,value,seed,f1,precision,recall,steps,wall_time_s";

/// Version line placed above the per-frame score CSV.
pub const FRAMES_CSV_VERSION: &str = "# keybench frames v1";

/// One row per frame: key indices and finger indices space-separated,
/// sustain as 0/1.
pub fn roll_csv(roll: &PianoRoll) -> String {
    let mut out = String::from(ROLL_CSV_HEADER);
    out.push('\n');
    for f in 0..roll.len() {
        let keys: Vec<String> = roll.goal(f).iter().map(|k| k.to_string()).collect();
        let fingers: Vec<String> = roll.fingers_at(f).iter().map(|x| x.index().to_string()).collect();
        let _ = writeln!(
            out,
            "{f},{},{},{}",
            keys.join(" "),
            fingers.join(" "),
            u8::from(roll.sustain_at(f))
        );
    }
    out
}

pub fn roll_summary(score: &Score, roll: &PianoRoll) -> String {
    format!(
        "title={}\nnotes={}\nduration={}\ndt={}\nframes={}\nactive_cells={}\nlabeled_fraction={}\n",
        score.title,
        score.notes.len(),
        score.duration,
        roll.dt,
        roll.len(),
        roll.active_cells(),
        score.labeled_fraction()
    )
}

pub fn sweep_csv_header() -> &'static str {
    SWEEP_CSV_HEADER
}
