//! The piano-playing episode: goal-conditioned observations, shaped rewards
//! and fixed-horizon stepping over a discretized score.

mod observation;
mod reward;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use observation::ObsLayout;
pub use reward::{
    reward_finger, reward_key, tolerance, RewardBreakdown, RewardTotals, RewardWeights, Tolerance, ToleranceParams,
    VALUE_AT_MARGIN,
};
pub use trace::{observation_hash, TraceRecord};

use crate::error::{Error, Result};
use crate::hands::{substep_count, HandModel, HandState, HandsConfig, ACTION_DIM, NUM_DOFS};
use crate::keyboard::{self, synth_events, KeyLayout, KeyboardConfig, KeyboardState, SynthEvent};
use crate::keys::{Hand, KeySet, NUM_FINGERS, NUM_KEYS};
use crate::metrics::{frame_prf, report_from_frames, EpisodeReport, FramePrf, PrfAccumulator};
use crate::score::{to_piano_roll, PianoRoll, Score};

/// Which key set counts as "pressed" for false positives and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeySource {
    /// Keys producing sound, including keys held by the sustain latch.
    Sounding,
    /// Keys at or past the activation threshold.
    Active,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub dt_control: f64,
    pub dt_physics: f64,
    /// Number of future goal frames in the observation, beyond the current one.
    pub lookahead: usize,
    pub weights: RewardWeights,
    pub key_tolerance: Tolerance,
    pub finger_tolerance: Tolerance,
    /// Overrides the threshold derived from key travel when set.
    pub activation_threshold: Option<f64>,
    /// Carried for agents; the environment never discounts.
    pub discount: f64,
    pub false_positive: KeySource,
    /// Key set compared against the goal for precision/recall/F1.
    pub played: KeySource,
    pub keyboard: KeyboardConfig,
    pub hands: HandsConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            dt_control: 0.05,
            dt_physics: 0.005,
            lookahead: 10,
            weights: RewardWeights::default(),
            key_tolerance: Tolerance::key_default(),
            finger_tolerance: Tolerance::finger_default(),
            activation_threshold: None,
            discount: 0.99,
            false_positive: KeySource::Sounding,
            played: KeySource::Active,
            keyboard: KeyboardConfig::default(),
            hands: HandsConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        substep_count(self.dt_control, self.dt_physics).map_err(|e| Error::Config(e.to_string()))?;
        let w = &self.weights;
        if !(w.key >= 0.0 && w.finger >= 0.0 && w.energy >= 0.0) {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if let Some(t) = self.activation_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!(
                    "activation threshold must lie in (0, 1), got {t}"
                )));
            }
        }
        self.keyboard.validate()
    }

    pub fn threshold(&self) -> f64 {
        self.activation_threshold
            .unwrap_or_else(|| self.keyboard.activation_threshold())
    }

    pub fn obs_layout(&self) -> ObsLayout {
        ObsLayout::new(self.lookahead)
    }
}

/// Hands plus keyboard, stepped together at the physics rate.
#[derive(Debug, Clone)]
pub struct Plant {
    pub model: HandModel,
    pub keyboard: KeyboardConfig,
    threshold: f64,
}

/// Mutable physical state of the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub hands: HandState,
    pub keys: KeyboardState,
}

impl Plant {
    pub fn new(config: &EnvConfig) -> Result<Self> {
        let layout = KeyLayout::new(&config.keyboard.layout);
        Ok(Plant {
            model: HandModel::new(&config.hands, layout)?,
            keyboard: config.keyboard,
            threshold: config.threshold(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn layout(&self) -> &KeyLayout {
        self.model.layout()
    }

    pub fn initial_state(&self) -> PlantState {
        PlantState {
            hands: self.model.home_state(),
            keys: KeyboardState::default(),
        }
    }

    /// Holds `action` for `substeps` physics steps of `dt_physics`; returns
    /// the energy spent. Frozen dimensions are replaced before tracking.
    /// `on_substep` sees the state after each substep.
    pub fn advance(
        &self,
        state: &mut PlantState,
        action: &[f64],
        substeps: usize,
        dt_physics: f64,
        mut on_substep: impl FnMut(&PlantState),
    ) -> f64 {
        let action = self.model.mask().apply(action);
        let targets = self.model.targets(&action);
        let sustain = HandModel::sustain_command(&action);
        let decay = (-dt_physics / self.keyboard.tau_key).exp();
        let mut force = [0.0; NUM_DOFS];
        let mut loads = [0.0; NUM_KEYS];
        let mut energy = 0.0;
        for _ in 0..substeps {
            energy += self.model.substep(&mut state.hands, &targets, dt_physics, &mut force);
            self.model.key_loads(&state.hands, &mut loads);
            keyboard::step_keys_in_place(&mut state.keys, &loads, sustain, decay, self.threshold);
            on_substep(state);
        }
        energy
    }

    pub fn fingertips(&self, hands: &HandState) -> [f64; NUM_FINGERS] {
        std::array::from_fn(|i| hands.fingertip_x(crate::keys::Finger::new(i as u8).expect("i < 10")))
    }

    pub fn pressed(&self, keys: &KeyboardState, source: KeySource) -> KeySet {
        match source {
            KeySource::Sounding => keys.sounding,
            KeySource::Active => keys.active(self.threshold),
        }
    }
}

/// Diagnostic data returned with every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Frame just attempted.
    pub frame: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub totals: RewardTotals,
    pub false_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

/// One episode over one song. Cloning copies the full state; the song and
/// plant parameters are shared.
#[derive(Debug, Clone)]
pub struct PianoEnv {
    config: Arc<EnvConfig>,
    plant: Arc<Plant>,
    roll: Arc<PianoRoll>,
    song: Arc<str>,
    substeps: usize,
    layout: ObsLayout,
    state: PlantState,
    frame: usize,
    started: bool,
    done: bool,
    totals: RewardTotals,
    prf: PrfAccumulator,
    per_frame: Vec<Option<FramePrf>>,
    played: Vec<KeySet>,
    synth: Option<Vec<SynthEvent>>,
}

impl PianoEnv {
    pub fn new(config: EnvConfig, song: &str, score: &Score) -> Result<Self> {
        config.validate()?;
        let roll = to_piano_roll(score, config.dt_control)?;
        Self::from_roll(config, song, roll)
    }

    pub fn from_roll(config: EnvConfig, song: &str, roll: PianoRoll) -> Result<Self> {
        config.validate()?;
        if (roll.dt - config.dt_control).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "roll frame step {} differs from control step {}",
                roll.dt, config.dt_control
            )));
        }
        let plant = Plant::new(&config)?;
        let substeps = substep_count(config.dt_control, config.dt_physics)?;
        let state = plant.initial_state();
        Ok(PianoEnv {
            layout: config.obs_layout(),
            config: Arc::new(config),
            plant: Arc::new(plant),
            roll: Arc::new(roll),
            song: song.into(),
            substeps,
            state,
            frame: 0,
            started: false,
            done: false,
            totals: RewardTotals::default(),
            prf: PrfAccumulator::default(),
            per_frame: Vec::new(),
            played: Vec::new(),
            synth: None,
        })
    }

    /// Records note-on/note-off events for every change of the sounding set.
    pub fn with_synth_log(mut self) -> Self {
        self.synth = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn roll(&self) -> &PianoRoll {
        &self.roll
    }

    pub fn song(&self) -> &str {
        &self.song
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn obs_layout(&self) -> &ObsLayout {
        &self.layout
    }

    pub fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    pub fn obs_dim(&self) -> usize {
        self.layout.total
    }

    /// Index of the next frame to attempt.
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn num_frames(&self) -> usize {
        self.roll.len()
    }

    /// Current simulated time, seconds.
    pub fn time(&self) -> f64 {
        self.frame as f64 * self.config.dt_control
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn totals(&self) -> RewardTotals {
        self.totals
    }

    pub fn synth_events(&self) -> &[SynthEvent] {
        self.synth.as_deref().unwrap_or(&[])
    }

    /// Keys played at each attempted frame so far.
    pub fn played(&self) -> &[KeySet] {
        &self.played
    }

    /// Restarts the episode from the home pose. The seed is accepted for
    /// interface symmetry; the initial state is deterministic.
    pub fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.state = self.plant.initial_state();
        self.frame = 0;
        self.started = true;
        self.done = self.roll.is_empty();
        self.totals = RewardTotals::default();
        self.prf = PrfAccumulator::default();
        self.per_frame.clear();
        self.played.clear();
        if let Some(events) = self.synth.as_mut() {
            events.clear();
        }
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if !self.started {
            return Err(Error::State("step called before reset".into()));
        }
        if self.done {
            return Err(Error::State("episode is done; reset before stepping".into()));
        }
        self.plant.model.check_action(action)?;

        let t = self.frame;
        let dt_physics = self.config.dt_physics;
        let start_time = self.time();
        let plant = Arc::clone(&self.plant);
        let mut substep = 0usize;
        let mut prev_sounding = self.state.keys.sounding;
        let synth = &mut self.synth;
        let energy = plant.advance(&mut self.state, action, self.substeps, dt_physics, |s| {
            substep += 1;
            if let Some(events) = synth.as_mut() {
                let now = start_time + substep as f64 * dt_physics;
                events.extend(synth_events(prev_sounding, s.keys.sounding, now));
                prev_sounding = s.keys.sounding;
            }
        });

        let reward = self.reward(t, energy);
        self.totals.add(&reward);

        let played = plant.pressed(&self.state.keys, self.config.played);
        let frame_score = frame_prf(self.roll.goal(t), played);
        self.prf.push(frame_score);
        self.per_frame.push(frame_score);
        self.played.push(played);

        self.frame += 1;
        self.done = self.frame >= self.roll.len();
        let mean = self.prf.mean();
        let goal = self.roll.goal(t);
        let false_positive = !plant
            .pressed(&self.state.keys, self.config.false_positive)
            .is_subset(goal);
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.done,
            info: StepInfo {
                frame: t,
                precision: mean.precision,
                recall: mean.recall,
                f1: mean.f1,
                totals: self.totals,
                false_positive,
            },
        })
    }

    /// Reward for the current plant state against frame `t`.
    fn reward(&self, t: usize, energy: f64) -> RewardBreakdown {
        let goal = self.roll.goal(t);
        let keys = &self.state.keys;
        let false_positive = !self.plant.pressed(keys, self.config.false_positive).is_subset(goal);
        let r_key = reward_key(goal, &keys.depression, false_positive, &self.config.key_tolerance);
        let tips = self.plant.fingertips(&self.state.hands);
        let r_finger = reward_finger(
            self.roll.targets_at(t),
            &tips,
            self.plant.layout(),
            &self.config.finger_tolerance,
        );
        RewardBreakdown::new(r_key, r_finger, energy, &self.config.weights)
    }

    /// Observation for the next frame to attempt.
    pub fn observe(&self) -> Vec<f64> {
        self.layout.build(&self.state, &self.roll, self.frame)
    }

    /// Scores the frames attempted so far.
    pub fn report(&self) -> EpisodeReport {
        let mut report = report_from_frames(self.per_frame.clone());
        report.rewards = Some(self.totals);
        report
    }

    /// Upper bound on the energy term of a single step.
    pub fn max_step_energy(&self) -> f64 {
        self.plant.model.max_energy(self.config.dt_control)
    }

    pub fn hand_base(&self, hand: Hand) -> f64 {
        self.state.hands.base_x(hand)
    }
}
