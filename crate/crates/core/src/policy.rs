//! Action sources that drive a [`PianoEnv`] one control step at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::PianoEnv;
use crate::error::{Error, Result};
use crate::hands::{base_dof, press_dof, HandModel, ACTION_DIM, FINGERS_PER_HAND};
use crate::keys::Hand;
use crate::metrics::episode_prf;

pub trait Policy {
    /// Called once after the environment is reset with `seed`.
    fn reset(&mut self, env: &PianoEnv, seed: u64) -> Result<()>;

    /// Action for the environment's current step.
    fn act(&mut self, env: &PianoEnv) -> Result<Vec<f64>>;
}

/// Holds the home pose with every finger lifted.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn reset(&mut self, _env: &PianoEnv, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _env: &PianoEnv) -> Result<Vec<f64>> {
        Ok(vec![0.0; ACTION_DIM])
    }
}

/// Uniform actions in `[-1, 1]`, seeded per episode.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl Default for RandomPolicy {
    fn default() -> Self {
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Policy for RandomPolicy {
    fn reset(&mut self, _env: &PianoEnv, seed: u64) -> Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(())
    }

    fn act(&mut self, _env: &PianoEnv) -> Result<Vec<f64>> {
        Ok((0..ACTION_DIM).map(|_| self.rng.random_range(-1.0..=1.0)).collect())
    }
}

/// Replays a fixed action sequence; errors when it runs out.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    actions: Vec<Vec<f64>>,
    next: usize,
}

impl ReplayPolicy {
    pub fn new(actions: Vec<Vec<f64>>) -> Self {
        ReplayPolicy { actions, next: 0 }
    }
}

impl Policy for ReplayPolicy {
    fn reset(&mut self, _env: &PianoEnv, _seed: u64) -> Result<()> {
        self.next = 0;
        Ok(())
    }

    fn act(&mut self, _env: &PianoEnv) -> Result<Vec<f64>> {
        let action = self
            .actions
            .get(self.next)
            .cloned()
            .ok_or_else(|| Error::State(format!("replay exhausted after {} actions", self.actions.len())))?;
        self.next += 1;
        Ok(action)
    }
}

/// Open-loop press schedule for labeled scores played from a fixed hand
/// position.
///
/// Each hand parks its base so the finger of its first labeled note sits on
/// that note's key center. A finger is pressed at step `t` when it has a goal
/// note anywhere in frames `t + release_lead ..= t + press_lead`. The two
/// leads absorb the hand and key response delays; they are chosen by
/// simulating every pair on a copy of the environment and keeping the best
/// episode F1.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    schedule: Vec<Vec<f64>>,
    pub press_lead: usize,
    pub release_lead: usize,
    /// F1 reached while choosing the leads.
    pub expected_f1: f64,
}

const MAX_LEAD: usize = 10;

impl ScriptedPolicy {
    pub fn plan(env: &PianoEnv) -> Result<Self> {
        let mut best: Option<ScriptedPolicy> = None;
        for press_lead in 0..=MAX_LEAD {
            for release_lead in 0..=press_lead {
                let schedule = Self::schedule(env, press_lead, release_lead);
                let f1 = Self::simulate(env, &schedule)?;
                if best.as_ref().is_none_or(|b| f1 > b.expected_f1) {
                    best = Some(ScriptedPolicy {
                        schedule,
                        press_lead,
                        release_lead,
                        expected_f1: f1,
                    });
                }
            }
        }
        Ok(best.expect("at least one lead pair"))
    }

    fn schedule(env: &PianoEnv, press_lead: usize, release_lead: usize) -> Vec<Vec<f64>> {
        let roll = env.roll();
        let model = &env.plant().model;
        let home = model.home_state();
        let mut parked = home;
        for hand in Hand::BOTH {
            let first = roll.targets.iter().flatten().find(|t| t.finger.hand() == hand);
            if let Some(target) = first {
                parked.pos[base_dof(hand)] =
                    model.layout().center(target.key) - home.offset_x(hand, target.finger.digit());
            }
        }
        let base_action = model.encode(&parked);
        (0..roll.len())
            .map(|t| {
                let mut action = vec![0.0; ACTION_DIM];
                for hand in Hand::BOTH {
                    action[base_dof(hand)] = base_action[base_dof(hand)];
                    for digit in 0..FINGERS_PER_HAND {
                        let finger = HandModel::finger_of(hand, digit);
                        let wanted = (t + release_lead..=t + press_lead)
                            .any(|f| roll.targets_at(f).iter().any(|x| x.finger == finger));
                        action[press_dof(hand, digit)] = if wanted { 1.0 } else { 0.0 };
                    }
                }
                action
            })
            .collect()
    }

    fn simulate(env: &PianoEnv, schedule: &[Vec<f64>]) -> Result<f64> {
        let mut sim = env.clone();
        sim.reset(0);
        for action in schedule {
            sim.step(action)?;
        }
        let goal = &sim.roll().frames;
        Ok(episode_prf(goal, sim.played())?.f1)
    }
}

impl Policy for ScriptedPolicy {
    fn reset(&mut self, _env: &PianoEnv, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, env: &PianoEnv) -> Result<Vec<f64>> {
        self.schedule
            .get(env.frame())
            .cloned()
            .ok_or_else(|| Error::State(format!("no scripted action for frame {}", env.frame())))
    }
}

/// Runs one episode from reset to done, returning the executed actions.
pub fn run_episode(env: &mut PianoEnv, policy: &mut dyn Policy, seed: u64) -> Result<Vec<Vec<f64>>> {
    env.reset(seed);
    policy.reset(env, seed)?;
    let mut actions = Vec::with_capacity(env.num_frames());
    while !env.is_done() {
        let action = policy.act(env)?;
        env.step(&action)?;
        actions.push(action);
    }
    Ok(actions)
}
