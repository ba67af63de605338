//! Predictive sampling: derivative-free receding-horizon control.
//!
//! A nominal action spline is improved by sampling Gaussian perturbations of
//! its control points, rolling each candidate out on a copy of the current
//! plant state and keeping the cheapest. After each control step the plan is
//! shifted forward and reused as the next warm start.

mod spline;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use spline::{NominalPlan, SplineKind};

use crate::env::{observation_hash, PianoEnv, TraceRecord};
use crate::error::{Error, Result};
use crate::hands::{substep_count, ACTION_DIM};
use crate::metrics::EpisodeReport;
use crate::policy::Policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Perturbed candidates per iteration.
    pub candidates: usize,
    /// Standard deviation of the control-point noise, in action units.
    pub sigma: f64,
    pub spline_points: usize,
    pub spline: SplineKind,
    pub horizon: f64,
    pub dt_plan: f64,
    pub dt_physics_plan: f64,
    /// Iteration cap per control step.
    pub iterations: usize,
    /// Wall-clock budget per control step, seconds; iterations still cap it.
    pub budget: Option<f64>,
    pub seed: u64,
    /// Worker threads for candidate rollouts; 0 uses every core.
    pub threads: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            candidates: 10,
            sigma: 0.05,
            spline_points: 2,
            spline: SplineKind::Cubic,
            horizon: 0.2,
            dt_plan: 0.01,
            dt_physics_plan: 0.005,
            iterations: 10,
            budget: None,
            seed: 0,
            threads: 1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates == 0 {
            return Err(Error::Config("planner needs at least one candidate".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.spline_points < 2 {
            return Err(Error::Config("spline needs at least 2 points".into()));
        }
        if !(self.dt_plan > 0.0 && self.horizon >= self.dt_plan) {
            return Err(Error::Config(format!(
                "need horizon >= dt_plan > 0, got horizon {} and dt_plan {}",
                self.horizon, self.dt_plan
            )));
        }
        substep_count(self.dt_plan, self.dt_physics_plan).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                return Err(Error::Config(format!("budget must be positive, got {b}")));
            }
        }
        Ok(())
    }

    /// Rollout steps over the horizon.
    pub fn plan_steps(&self) -> usize {
        (self.horizon / self.dt_plan - 1e-9).ceil() as usize
    }

    pub fn initial_plan(&self) -> Result<NominalPlan> {
        NominalPlan::zeros(self.spline_points, ACTION_DIM, self.horizon, self.spline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepCost {
    pub key: f64,
    pub finger: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub key: f64,
    pub finger: f64,
    pub total: f64,
    pub steps: Vec<StepCost>,
}

/// Simulates `plan` from the environment's current state and scores it.
///
/// Each plan step applies the spline value at the step's start for
/// `dt_plan`, then charges the goal frame containing the step's midpoint:
/// `0.5 * mean |d - 1|` over goal keys plus `0.5` on a false positive, and
/// the mean fingertip-to-key distance over labeled goal notes. Empty terms
/// cost nothing. The environment is not modified.
pub fn rollout_cost(env: &PianoEnv, plan: &NominalPlan, config: &PlannerConfig) -> Result<CostBreakdown> {
    if plan.dim() != ACTION_DIM {
        return Err(Error::invalid(format!(
            "plan has dimension {}, expected {ACTION_DIM}",
            plan.dim()
        )));
    }
    let substeps = substep_count(config.dt_plan, config.dt_physics_plan)?;
    let plant = env.plant();
    let roll = env.roll();
    let dt_control = env.config().dt_control;
    let fp_source = env.config().false_positive;
    let t0 = env.time();
    let mut state = env.state().clone();
    let mut action = vec![0.0; ACTION_DIM];
    let mut out = CostBreakdown::default();
    for k in 0..config.plan_steps() {
        let t_rel = k as f64 * config.dt_plan;
        plan.eval_into(t_rel, &mut action);
        plant.advance(&mut state, &action, substeps, config.dt_physics_plan, |_| {});
        let frame = ((t0 + t_rel + 0.5 * config.dt_plan) / dt_control).floor() as usize;
        let goal = roll.goal(frame);
        let mut key = 0.0;
        if !goal.is_empty() {
            let shortfall: f64 = goal.iter().map(|k| (state.keys.depression[k] - 1.0).abs()).sum();
            key += 0.5 * shortfall / goal.len() as f64;
        }
        if !plant.pressed(&state.keys, fp_source).is_subset(goal) {
            key += 0.5;
        }
        let targets = roll.targets_at(frame);
        let finger = if targets.is_empty() {
            0.0
        } else {
            targets
                .iter()
                .map(|t| plant.model.finger_distance(&state.hands, t.finger, t.key))
                .sum::<f64>()
                / targets.len() as f64
        };
        let step = StepCost {
            key,
            finger,
            total: key + finger,
        };
        out.key += step.key;
        out.finger += step.finger;
        out.total += step.total;
        out.steps.push(step);
    }
    Ok(out)
}

/// Result of one improvement iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub plan: NominalPlan,
    pub cost: f64,
    /// Cost of the incoming nominal.
    pub nominal_cost: f64,
    /// Index of the winner; 0 is the incumbent, `i >= 1` is candidate `i - 1`.
    pub winner: usize,
}

/// One iteration of predictive sampling.
///
/// Noise for all candidates is drawn from `rng` up front, so the result does
/// not depend on evaluation order. Candidates run on the current rayon pool
/// when `parallel` is set. The cheapest plan wins; ties go to the incumbent,
/// then to the lowest candidate index. `nominal_cost` skips re-evaluating
/// the incumbent when its cost is already known.
pub fn improve(
    nominal: &NominalPlan,
    env: &PianoEnv,
    config: &PlannerConfig,
    rng: &mut ChaCha8Rng,
    nominal_cost: Option<f64>,
    parallel: bool,
) -> Result<Improvement> {
    let width = nominal.points().len() * nominal.dim();
    let noise: Vec<f64> = (0..config.candidates * width)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let mut plans = Vec::with_capacity(config.candidates + 1);
    plans.push(nominal.clone());
    for c in 0..config.candidates {
        plans.push(nominal.perturbed(&noise[c * width..(c + 1) * width], config.sigma));
    }

    let cost_of = |i: usize, plan: &NominalPlan| -> Result<f64> {
        match (i, nominal_cost) {
            (0, Some(c)) => Ok(c),
            _ => rollout_cost(env, plan, config).map(|c| if c.total.is_nan() { f64::INFINITY } else { c.total }),
        }
    };
    let costs: Vec<f64> = if parallel {
        use rayon::prelude::*;
        plans
            .par_iter()
            .enumerate()
            .map(|(i, p)| cost_of(i, p))
            .collect::<Result<_>>()?
    } else {
        plans
            .iter()
            .enumerate()
            .map(|(i, p)| cost_of(i, p))
            .collect::<Result<_>>()?
    };

    let mut winner = 0;
    for (i, c) in costs.iter().enumerate().skip(1) {
        if *c < costs[winner] {
            winner = i;
        }
    }
    Ok(Improvement {
        cost: costs[winner],
        nominal_cost: costs[0],
        winner,
        plan: plans.swap_remove(winner),
    })
}

/// Stateful receding-horizon controller.
pub struct Planner {
    config: PlannerConfig,
    pool: Option<rayon::ThreadPool>,
    rng: ChaCha8Rng,
    nominal: NominalPlan,
    /// Iterations run at the most recent control step.
    pub last_iterations: usize,
}

impl std::fmt::Debug for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Planner")
            .field("config", &self.config)
            .field("nominal", &self.nominal)
            .finish_non_exhaustive()
    }
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        let pool = if config.threads == 1 {
            None
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot start planner threads: {e}")))?;
            Some(pool)
        };
        Ok(Planner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            nominal: config.initial_plan()?,
            pool,
            config,
            last_iterations: 0,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn nominal(&self) -> &NominalPlan {
        &self.nominal
    }

    /// Restarts from the zero plan with a fresh random stream.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.nominal = self.config.initial_plan()?;
        Ok(())
    }

    /// Improves the nominal against `env`'s current state, returns the
    /// action to execute now, and warm-starts the next step.
    pub fn plan_step(&mut self, env: &PianoEnv) -> Result<Vec<f64>> {
        let start = Instant::now();
        let budget = self.config.budget.map(Duration::from_secs_f64);
        let mut cost = None;
        let mut iterations = 0;
        while iterations < self.config.iterations && budget.is_none_or(|b| start.elapsed() < b) {
            let step = match &self.pool {
                Some(pool) => pool.install(|| improve(&self.nominal, env, &self.config, &mut self.rng, cost, true))?,
                None => improve(&self.nominal, env, &self.config, &mut self.rng, cost, false)?,
            };
            self.nominal = step.plan;
            cost = Some(step.cost);
            iterations += 1;
        }
        self.last_iterations = iterations;
        let action = self.nominal.eval(0.0);
        self.nominal = self.nominal.shifted(env.config().dt_control);
        Ok(action)
    }
}

/// [`Planner`] as a [`Policy`]; the episode seed reseeds its random stream.
#[derive(Debug)]
pub struct MpcPolicy {
    pub planner: Planner,
}

impl MpcPolicy {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        Ok(MpcPolicy {
            planner: Planner::new(config)?,
        })
    }
}

impl Policy for MpcPolicy {
    fn reset(&mut self, _env: &PianoEnv, seed: u64) -> Result<()> {
        self.planner.reset(seed)
    }

    fn act(&mut self, env: &PianoEnv) -> Result<Vec<f64>> {
        self.planner.plan_step(env)
    }
}

/// Plays one full episode under MPC from a reset with `config.seed`.
pub fn control_loop(env: &mut PianoEnv, config: &PlannerConfig) -> Result<(Vec<TraceRecord>, EpisodeReport)> {
    let mut planner = Planner::new(config.clone())?;
    let mut obs = env.reset(config.seed);
    let mut trace = Vec::with_capacity(env.num_frames());
    while !env.is_done() {
        let frame = env.frame();
        let obs_hash = observation_hash(&obs);
        let action = planner.plan_step(env)?;
        let out = env.step(&action)?;
        trace.push(TraceRecord {
            frame,
            obs_hash,
            action,
            reward: out.reward,
        });
        obs = out.observation;
    }
    Ok((trace, env.report()))
}
