//! Simplified two-hand plant.
//!
//! Each hand has a base that slides along the keyboard and five fingers, each
//! with a lateral offset from the base and a press depth in `[0, 1]`. That is
//! 11 degrees of freedom per hand, 22 in total. Every DOF tracks its target
//! with a PD law integrated at the physics rate (semi-implicit Euler), then
//! gets clamped to its limits. Adjacent fingers of a hand may not cross.
//!
//! DOF layout per hand: `[base, offset 0..5, press 0..5]`, right hand first.
//! The action adds a sustain pedal scalar at the end, for 23 dimensions.
//!
//! Actions are relative to the home pose: the all-zero action holds both
//! hands at home with every finger lifted and the pedal up. A DOF's target
//! is `home + a * scale`, clamped to its limits, so presses and the pedal
//! respond only to positive action values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyboard::KeyLayout;
use crate::keys::{key_of_pitch, Finger, Hand, NUM_KEYS};

pub const DOFS_PER_HAND: usize = 11;
pub const NUM_DOFS: usize = 2 * DOFS_PER_HAND;
pub const ACTION_DIM: usize = NUM_DOFS + 1;
pub const SUSTAIN_DIM: usize = NUM_DOFS;
pub const FINGERS_PER_HAND: usize = 5;

/// Fixed height and depth of each forearm, reported in observations.
const FOREARM_Y: f64 = 0.4;
const FOREARM_Z: f64 = 0.15;

pub fn base_dof(hand: Hand) -> usize {
    hand.index() * DOFS_PER_HAND
}

pub fn offset_dof(hand: Hand, digit: usize) -> usize {
    hand.index() * DOFS_PER_HAND + 1 + digit
}

pub fn press_dof(hand: Hand, digit: usize) -> usize {
    hand.index() * DOFS_PER_HAND + 1 + FINGERS_PER_HAND + digit
}

fn finger_of(hand: Hand, digit: usize) -> Finger {
    Finger::new((hand.index() * FINGERS_PER_HAND + digit) as u8).expect("digit < 5")
}

/// Named action-mask presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskPreset {
    /// Every dimension controllable.
    #[default]
    Full,
    /// Lateral finger offsets frozen at the home spread; base, presses and
    /// pedal remain.
    Reduced,
}

impl std::str::FromStr for MaskPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MaskPreset::Full),
            "reduced" => Ok(MaskPreset::Reduced),
            other => Err(Error::Config(format!("unknown mask preset {other:?} (full, reduced)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandsConfig {
    /// Proportional gain, 1/s^2.
    pub kp: f64,
    /// Derivative gain, 1/s; critical damping `2 sqrt(kp)` when unset.
    pub kd: Option<f64>,
    /// Home spacing between adjacent fingertips, meters.
    pub finger_spacing: f64,
    /// How far each finger may move either side of its home offset, meters.
    pub reach: f64,
    /// Allowed crossing of adjacent fingers, meters.
    pub overlap_tol: f64,
    pub max_speed_base: f64,
    pub max_speed_offset: f64,
    pub max_speed_press: f64,
    /// Home key under each hand's middle finger (MIDI pitch), right then left.
    pub home_pitch: [u8; 2],
    pub mask: MaskPreset,
    /// Additional frozen action dimensions on top of the preset.
    pub frozen_dims: Vec<usize>,
}

impl Default for HandsConfig {
    fn default() -> Self {
        HandsConfig {
            kp: 400.0,
            kd: None,
            finger_spacing: 0.0235,
            reach: 0.06,
            overlap_tol: 0.0,
            max_speed_base: 5.0,
            max_speed_offset: 2.0,
            max_speed_press: 10.0,
            home_pitch: [64, 52],
            mask: MaskPreset::Full,
            frozen_dims: Vec::new(),
        }
    }
}

impl HandsConfig {
    pub fn damping(&self) -> f64 {
        self.kd.unwrap_or_else(|| 2.0 * self.kp.sqrt())
    }
}

/// Positions and velocities of all 22 DOFs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub pos: [f64; NUM_DOFS],
    pub vel: [f64; NUM_DOFS],
}

impl HandState {
    pub fn base_x(&self, hand: Hand) -> f64 {
        self.pos[base_dof(hand)]
    }

    pub fn offset_x(&self, hand: Hand, digit: usize) -> f64 {
        self.pos[offset_dof(hand, digit)]
    }

    pub fn press(&self, hand: Hand, digit: usize) -> f64 {
        self.pos[press_dof(hand, digit)]
    }

    /// World x of a fingertip.
    pub fn fingertip_x(&self, finger: Finger) -> f64 {
        let hand = finger.hand();
        self.base_x(hand) + self.offset_x(hand, finger.digit())
    }

    /// Forearm Cartesian positions `(x, y, z)` for the right then left hand.
    pub fn forearm_positions(&self) -> [f64; 6] {
        [
            self.base_x(Hand::Right),
            FOREARM_Y,
            FOREARM_Z,
            self.base_x(Hand::Left),
            FOREARM_Y,
            FOREARM_Z,
        ]
    }
}

/// Which action dimensions are frozen, and the action value each is pinned to.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMask {
    frozen: [Option<f64>; ACTION_DIM],
}

impl ActionMask {
    pub fn is_frozen(&self, dim: usize) -> bool {
        self.frozen[dim].is_some()
    }

    pub fn frozen_value(&self, dim: usize) -> Option<f64> {
        self.frozen[dim]
    }

    pub fn free_dims(&self) -> usize {
        self.frozen.iter().filter(|f| f.is_none()).count()
    }

    /// Replaces frozen dimensions with their pinned values and clamps the rest to `[-1, 1]`.
    pub fn apply(&self, action: &[f64]) -> [f64; ACTION_DIM] {
        let mut out = [0.0; ACTION_DIM];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = match self.frozen[i] {
                Some(v) => v,
                None => clamp_action(action[i]),
            };
        }
        out
    }
}

fn clamp_action(a: f64) -> f64 {
    if a.is_nan() {
        0.0
    } else {
        a.clamp(-1.0, 1.0)
    }
}

/// Per-step record of one PD substep.
#[derive(Debug, Clone, PartialEq)]
pub struct Substep {
    pub state: HandState,
    /// PD output for every DOF (zero for frozen DOFs).
    pub force: [f64; NUM_DOFS],
    /// Key loads produced by the fingertips after this substep.
    pub loads: Vec<f64>,
}

/// Result of tracking one action for a control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub substeps: Vec<Substep>,
    pub sustain_cmd: f64,
    pub dt_physics: f64,
}

impl ActionOutcome {
    pub fn final_state(&self) -> Option<&HandState> {
        self.substeps.last().map(|s| &s.state)
    }

    pub fn energy(&self) -> f64 {
        energy(&self.substeps, self.dt_physics)
    }
}

/// Sum over substeps and DOFs of `|force| * |velocity| * dt`.
pub fn energy(substeps: &[Substep], dt_physics: f64) -> f64 {
    substeps
        .iter()
        .map(|s| substep_energy(&s.force, &s.state.vel, dt_physics))
        .sum()
}

fn substep_energy(force: &[f64; NUM_DOFS], vel: &[f64; NUM_DOFS], dt: f64) -> f64 {
    force.iter().zip(vel).map(|(f, v)| f.abs() * v.abs()).sum::<f64>() * dt
}

/// Number of physics substeps in a control step; errors unless `dt_control`
/// is a positive integer multiple of `dt_physics`.
pub fn substep_count(dt_control: f64, dt_physics: f64) -> Result<usize> {
    if !(dt_control > 0.0 && dt_physics > 0.0) {
        return Err(Error::invalid("timesteps must be positive"));
    }
    let ratio = dt_control / dt_physics;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "control step {dt_control} is not an integer multiple of physics step {dt_physics}"
        )));
    }
    Ok(n as usize)
}

/// Plant parameters resolved from a [`HandsConfig`] and the key layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    kp: f64,
    kd: f64,
    overlap_tol: f64,
    lo: [f64; NUM_DOFS],
    hi: [f64; NUM_DOFS],
    max_speed: [f64; NUM_DOFS],
    home: [f64; NUM_DOFS],
    scale: [f64; NUM_DOFS],
    mask: ActionMask,
    fixed: [bool; NUM_DOFS],
    layout: KeyLayout,
}

impl HandModel {
    pub fn new(config: &HandsConfig, layout: KeyLayout) -> Result<Self> {
        if !(config.kp > 0.0) || !(config.damping() >= 0.0) {
            return Err(Error::Config("PD gains must be positive".into()));
        }
        if !(config.reach > 0.0 && config.finger_spacing >= 0.0 && config.overlap_tol >= 0.0) {
            return Err(Error::Config(
                "finger reach must be positive, spacing and tolerance non-negative".into(),
            ));
        }
        let mut lo = [0.0; NUM_DOFS];
        let mut hi = [0.0; NUM_DOFS];
        let mut max_speed = [0.0; NUM_DOFS];
        let mut home = [0.0; NUM_DOFS];
        let mut scale = [0.0; NUM_DOFS];
        for hand in Hand::BOTH {
            let home_key = key_of_pitch(config.home_pitch[hand.index()]).ok_or_else(|| {
                Error::Config(format!(
                    "home pitch {} is off the keyboard",
                    config.home_pitch[hand.index()]
                ))
            })?;
            let b = base_dof(hand);
            lo[b] = 0.0;
            hi[b] = layout.width();
            max_speed[b] = config.max_speed_base;
            home[b] = layout.center(home_key);
            scale[b] = home[b].max(layout.width() - home[b]);
            // Right-hand fingers spread to the right (thumb leftmost), left-hand to the left.
            let sign = if hand == Hand::Right { 1.0 } else { -1.0 };
            for digit in 0..FINGERS_PER_HAND {
                let natural = sign * (digit as f64 - 2.0) * config.finger_spacing;
                let o = offset_dof(hand, digit);
                lo[o] = natural - config.reach;
                hi[o] = natural + config.reach;
                max_speed[o] = config.max_speed_offset;
                home[o] = natural;
                scale[o] = config.reach;
                let p = press_dof(hand, digit);
                lo[p] = 0.0;
                hi[p] = 1.0;
                max_speed[p] = config.max_speed_press;
                home[p] = 0.0;
                scale[p] = 1.0;
            }
        }

        // Frozen dimensions are pinned to the home pose, which is action 0.
        let mut frozen = [None; ACTION_DIM];
        if config.mask == MaskPreset::Reduced {
            for hand in Hand::BOTH {
                for digit in 0..FINGERS_PER_HAND {
                    frozen[offset_dof(hand, digit)] = Some(0.0);
                }
            }
        }
        for &dim in &config.frozen_dims {
            if dim >= ACTION_DIM {
                return Err(Error::Config(format!("frozen dimension {dim} >= {ACTION_DIM}")));
            }
            frozen[dim] = Some(0.0);
        }
        let mut fixed = [false; NUM_DOFS];
        for (dof, f) in fixed.iter_mut().enumerate() {
            *f = frozen[dof].is_some();
        }

        Ok(HandModel {
            kp: config.kp,
            kd: config.damping(),
            overlap_tol: config.overlap_tol,
            lo,
            hi,
            max_speed,
            home,
            scale,
            mask: ActionMask { frozen },
            fixed,
            layout,
        })
    }

    pub fn layout(&self) -> &KeyLayout {
        &self.layout
    }

    pub fn mask(&self) -> &ActionMask {
        &self.mask
    }

    pub fn limits(&self, dof: usize) -> (f64, f64) {
        (self.lo[dof], self.hi[dof])
    }

    pub fn home_state(&self) -> HandState {
        HandState {
            pos: self.home,
            vel: [0.0; NUM_DOFS],
        }
    }

    /// Physical targets for an action in `[-1, 1]^23` (sustain excluded).
    pub fn targets(&self, action: &[f64; ACTION_DIM]) -> [f64; NUM_DOFS] {
        std::array::from_fn(|dof| (self.home[dof] + action[dof] * self.scale[dof]).clamp(self.lo[dof], self.hi[dof]))
    }

    /// Pedal command in `[0, 1]` for an action; the latch engages at 0.5.
    pub fn sustain_command(action: &[f64; ACTION_DIM]) -> f64 {
        action[SUSTAIN_DIM].clamp(0.0, 1.0)
    }

    /// The action whose targets reproduce `state`'s positions, pedal up.
    pub fn encode(&self, state: &HandState) -> Vec<f64> {
        let mut a: Vec<f64> = (0..NUM_DOFS)
            .map(|d| ((state.pos[d] - self.home[d]) / self.scale[d]).clamp(-1.0, 1.0))
            .collect();
        a.push(0.0);
        a
    }

    /// Upper bound on [`energy`] over `duration` seconds given the clamps.
    pub fn max_energy(&self, duration: f64) -> f64 {
        (0..NUM_DOFS)
            .filter(|d| !self.fixed[*d])
            .map(|d| {
                let force = self.kp * (self.hi[d] - self.lo[d]) + self.kd * self.max_speed[d];
                force * self.max_speed[d]
            })
            .sum::<f64>()
            * duration
    }

    pub fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != ACTION_DIM {
            return Err(Error::invalid(format!(
                "action has {} dimensions, expected {ACTION_DIM}",
                action.len()
            )));
        }
        if let Some(i) = action.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid(format!("action[{i}] is not finite")));
        }
        Ok(())
    }

    /// One PD substep in place. Writes the PD output into `force` and
    /// returns the substep energy.
    pub(crate) fn substep(
        &self,
        state: &mut HandState,
        targets: &[f64; NUM_DOFS],
        dt: f64,
        force: &mut [f64; NUM_DOFS],
    ) -> f64 {
        for dof in 0..NUM_DOFS {
            if self.fixed[dof] {
                force[dof] = 0.0;
                state.vel[dof] = 0.0;
                continue;
            }
            let x = state.pos[dof];
            let v = state.vel[dof];
            let f = self.kp * (targets[dof] - x) - self.kd * v;
            force[dof] = f;
            let vmax = self.max_speed[dof];
            let mut v = (v + f * dt).clamp(-vmax, vmax);
            let mut x = x + v * dt;
            if x < self.lo[dof] {
                x = self.lo[dof];
                v = v.max(0.0);
            } else if x > self.hi[dof] {
                x = self.hi[dof];
                v = v.min(0.0);
            }
            state.pos[dof] = x;
            state.vel[dof] = v;
        }
        for hand in Hand::BOTH {
            self.enforce_order(state, hand);
        }
        substep_energy(force, &state.vel, dt)
    }

    /// Projects a hand's finger offsets back onto the no-crossing set
    /// (pool-adjacent-violators; frozen fingers never move).
    fn enforce_order(&self, state: &mut HandState, hand: Hand) {
        let sign = if hand == Hand::Right { 1.0 } else { -1.0 };
        let tol = self.overlap_tol;
        let dofs: [usize; FINGERS_PER_HAND] = std::array::from_fn(|d| offset_dof(hand, d));
        let z: [f64; FINGERS_PER_HAND] = std::array::from_fn(|i| sign * state.pos[dofs[i]] + i as f64 * tol);
        if z.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }

        struct Block {
            start: usize,
            end: usize,
            sum: f64,
            fixed: Option<f64>,
        }
        impl Block {
            fn value(&self) -> f64 {
                self.fixed.unwrap_or(self.sum / (self.end - self.start) as f64)
            }
        }
        let mut blocks: Vec<Block> = Vec::with_capacity(FINGERS_PER_HAND);
        for (i, &zi) in z.iter().enumerate() {
            blocks.push(Block {
                start: i,
                end: i + 1,
                sum: zi,
                fixed: self.fixed[dofs[i]].then_some(zi),
            });
            while blocks.len() >= 2 && blocks[blocks.len() - 2].value() > blocks[blocks.len() - 1].value() {
                let right = blocks.pop().expect("len >= 2");
                let left = blocks.last_mut().expect("len >= 1");
                left.end = right.end;
                left.sum += right.sum;
                left.fixed = left.fixed.or(right.fixed);
            }
        }
        for block in blocks.iter().filter(|b| b.end - b.start > 1) {
            let value = block.value();
            let moved: Vec<usize> = (block.start..block.end).filter(|i| !self.fixed[dofs[*i]]).collect();
            let mean_vel = if block.fixed.is_some() {
                0.0
            } else {
                moved.iter().map(|i| state.vel[dofs[*i]]).sum::<f64>() / moved.len() as f64
            };
            for i in moved {
                let dof = dofs[i];
                state.pos[dof] = (sign * (value - i as f64 * tol)).clamp(self.lo[dof], self.hi[dof]);
                state.vel[dof] = mean_vel;
            }
        }
    }

    /// Key loads from the fingertips: each finger presses the key under it
    /// with its press depth; a key under several fingers takes the deepest.
    pub fn key_loads(&self, state: &HandState, loads: &mut [f64]) {
        debug_assert_eq!(loads.len(), NUM_KEYS);
        loads.iter_mut().for_each(|l| *l = 0.0);
        for hand in Hand::BOTH {
            for digit in 0..FINGERS_PER_HAND {
                let x = state.base_x(hand) + state.offset_x(hand, digit);
                if let Some(key) = self.layout.key_at(x) {
                    let press = state.press(hand, digit);
                    if press > loads[key] {
                        loads[key] = press;
                    }
                }
            }
        }
    }

    /// Key target point for `finger` pressing `key`, and the fingertip
    /// distance to it.
    pub fn finger_distance(&self, state: &HandState, finger: Finger, key: usize) -> f64 {
        (state.fingertip_x(finger) - self.layout.center(key)).abs()
    }

    /// Tracks `action` for one control step and records every substep.
    pub fn apply_action(
        &self,
        state: &HandState,
        action: &[f64],
        dt_control: f64,
        dt_physics: f64,
    ) -> Result<ActionOutcome> {
        self.check_action(action)?;
        let n = substep_count(dt_control, dt_physics)?;
        let action = self.mask.apply(action);
        let targets = self.targets(&action);
        let mut current = *state;
        let mut substeps = Vec::with_capacity(n);
        for _ in 0..n {
            let mut force = [0.0; NUM_DOFS];
            self.substep(&mut current, &targets, dt_physics, &mut force);
            let mut loads = vec![0.0; NUM_KEYS];
            self.key_loads(&current, &mut loads);
            substeps.push(Substep {
                state: current,
                force,
                loads,
            });
        }
        Ok(ActionOutcome {
            substeps,
            sustain_cmd: Self::sustain_command(&action),
            dt_physics,
        })
    }

    /// Ordered-finger check used by tests and debug assertions.
    pub fn fingers_ordered(&self, state: &HandState) -> bool {
        Hand::BOTH.iter().all(|&hand| {
            let sign = if hand == Hand::Right { 1.0 } else { -1.0 };
            (1..FINGERS_PER_HAND)
                .all(|d| sign * (state.offset_x(hand, d) - state.offset_x(hand, d - 1)) >= -self.overlap_tol - 1e-12)
        })
    }

    pub fn finger_of(hand: Hand, digit: usize) -> Finger {
        finger_of(hand, digit)
    }
}
