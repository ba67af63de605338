use serde::{Deserialize, Serialize};

use super::Score;
use crate::error::{Error, Result};
use crate::keys::{Finger, FingerSet, KeySet};

/// A labeled goal note within a frame: the key that `finger` should press.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerTarget {
    pub key: usize,
    pub finger: Finger,
}

/// Frame-discretized goal trajectory. Frame `f` covers `[f*dt, (f+1)*dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PianoRoll {
    pub dt: f64,
    pub frames: Vec<KeySet>,
    pub fingers: Vec<FingerSet>,
    pub sustain: Vec<bool>,
    /// Per frame, the labeled notes as (key, finger) pairs, in score order.
    pub targets: Vec<Vec<FingerTarget>>,
}

impl PianoRoll {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_active(&self, frame: usize, key: usize) -> bool {
        self.frames.get(frame).is_some_and(|f| f.contains(key))
    }

    /// Goal keys at `frame`, empty past the end.
    pub fn goal(&self, frame: usize) -> KeySet {
        self.frames.get(frame).copied().unwrap_or_default()
    }

    pub fn fingers_at(&self, frame: usize) -> FingerSet {
        self.fingers.get(frame).copied().unwrap_or_default()
    }

    pub fn sustain_at(&self, frame: usize) -> bool {
        self.sustain.get(frame).copied().unwrap_or(false)
    }

    pub fn targets_at(&self, frame: usize) -> &[FingerTarget] {
        self.targets.get(frame).map_or(&[], Vec::as_slice)
    }

    pub fn active_cells(&self) -> usize {
        self.frames.iter().map(|f| f.len()).sum()
    }
}

fn midpoint(frame: usize, dt: f64) -> f64 {
    (frame as f64 + 0.5) * dt
}

/// Frames whose midpoint lies in `[start, end)`.
fn frames_covering(start: f64, end: f64, dt: f64, num_frames: usize) -> std::ops::Range<usize> {
    let guess = ((start / dt) - 0.5).ceil().max(0.0) as usize;
    let mut first = guess.saturating_sub(1);
    while first < num_frames && midpoint(first, dt) < start {
        first += 1;
    }
    let mut last = first;
    while last < num_frames && midpoint(last, dt) < end {
        last += 1;
    }
    first..last
}

/// Number of frames needed to cover `duration` at step `dt`.
pub(crate) fn frame_count(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        return 0;
    }
    // Ratios like 0.5 / 0.05 may land a hair above the integer.
    (duration / dt - 1e-9).ceil().max(0.0) as usize
}

/// Discretizes a score: a note is active at frame `f` iff the frame midpoint
/// `(f + 0.5) * dt` lies in `[onset, offset)`. Sustain uses the same rule.
pub fn to_piano_roll(score: &Score, dt: f64) -> Result<PianoRoll> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let num_frames = frame_count(score.duration, dt);
    let mut frames = vec![KeySet::empty(); num_frames];
    let mut fingers = vec![FingerSet::default(); num_frames];
    let mut targets: Vec<Vec<FingerTarget>> = vec![Vec::new(); num_frames];
    let mut sustain = vec![false; num_frames];

    for note in &score.notes {
        let key = note.key();
        for f in frames_covering(note.onset, note.offset, dt, num_frames) {
            frames[f].insert(key);
            if let Some(finger) = note.finger {
                fingers[f].insert(finger);
                targets[f].push(FingerTarget { key, finger });
            }
        }
    }
    for &(start, end) in &score.sustain_intervals {
        for f in frames_covering(start, end, dt, num_frames) {
            sustain[f] = true;
        }
    }

    Ok(PianoRoll {
        dt,
        frames,
        fingers,
        sustain,
        targets,
    })
}
