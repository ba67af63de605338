use serde::{Deserialize, Serialize};

use super::PlantState;
use crate::hands::NUM_DOFS;
use crate::keys::{Finger, NUM_FINGERS, NUM_KEYS};
use crate::score::PianoRoll;

/// Offsets of each block in the flat observation vector.
///
/// Blocks, in order: joint positions, joint velocities, forearm positions
/// (x, y, z per hand), key depressions, then `lookahead + 1` goal rows of
/// keys, fingers and sustain starting at the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLayout {
    pub lookahead: usize,
    pub joint_pos: usize,
    pub joint_vel: usize,
    pub forearm: usize,
    pub keys: usize,
    pub goal_keys: usize,
    pub goal_fingers: usize,
    pub goal_sustain: usize,
    pub total: usize,
}

impl ObsLayout {
    pub fn new(lookahead: usize) -> Self {
        let rows = lookahead + 1;
        let joint_pos = 0;
        let joint_vel = joint_pos + NUM_DOFS;
        let forearm = joint_vel + NUM_DOFS;
        let keys = forearm + 6;
        let goal_keys = keys + NUM_KEYS;
        let goal_fingers = goal_keys + rows * NUM_KEYS;
        let goal_sustain = goal_fingers + rows * NUM_FINGERS;
        ObsLayout {
            lookahead,
            joint_pos,
            joint_vel,
            forearm,
            keys,
            goal_keys,
            goal_fingers,
            goal_sustain,
            total: goal_sustain + rows,
        }
    }

    pub fn build(&self, state: &PlantState, roll: &PianoRoll, frame: usize) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.total);
        obs.extend_from_slice(&state.hands.pos);
        obs.extend_from_slice(&state.hands.vel);
        obs.extend_from_slice(&state.hands.forearm_positions());
        obs.extend_from_slice(&state.keys.depression);
        let rows = frame..frame + self.lookahead + 1;
        for f in rows.clone() {
            obs.extend(roll.goal(f).to_bools().iter().map(|b| f64::from(u8::from(*b))));
        }
        for f in rows.clone() {
            let fingers = roll.fingers_at(f);
            obs.extend(
                (0..NUM_FINGERS as u8).map(|i| f64::from(u8::from(fingers.contains(Finger::new(i).expect("i < 10"))))),
            );
        }
        for f in rows {
            obs.push(f64::from(u8::from(roll.sustain_at(f))));
        }
        debug_assert_eq!(obs.len(), self.total);
        obs
    }
}
