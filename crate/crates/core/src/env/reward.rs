//! Shaped per-step reward: key press, finger proximity and energy terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyboard::KeyLayout;
use crate::keys::KeySet;
use crate::score::FingerTarget;

/// Value of the tolerance function at `bounds + margin`.
pub const VALUE_AT_MARGIN: f64 = 0.1;

/// Gaussian-shaped tolerance: 1 inside `[0, bounds]`, decaying to
/// [`VALUE_AT_MARGIN`] at `bounds + margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToleranceParams", into = "ToleranceParams")]
pub struct Tolerance {
    bounds: f64,
    margin: f64,
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceParams {
    pub bounds: f64,
    pub margin: f64,
}

impl Tolerance {
    pub fn new(bounds: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::invalid(format!(
                "tolerance margin must be positive, got {margin}"
            )));
        }
        if !(bounds >= 0.0 && bounds.is_finite()) {
            return Err(Error::invalid(format!(
                "tolerance bounds must be non-negative, got {bounds}"
            )));
        }
        Ok(Tolerance {
            bounds,
            margin,
            scale: (-2.0 * VALUE_AT_MARGIN.ln()).sqrt(),
        })
    }

    /// Parameters for key depression: bounds 0.05, margin 0.5.
    pub fn key_default() -> Self {
        Tolerance::new(0.05, 0.5).expect("valid constants")
    }

    /// Parameters for fingertip distance: bounds 0.01, margin 0.1.
    pub fn finger_default() -> Self {
        Tolerance::new(0.01, 0.1).expect("valid constants")
    }

    pub fn bounds(&self) -> f64 {
        self.bounds
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn eval(&self, distance: f64) -> f64 {
        if distance <= self.bounds {
            return 1.0;
        }
        let z = self.scale * (distance - self.bounds) / self.margin;
        (-0.5 * z * z).exp()
    }
}

impl TryFrom<ToleranceParams> for Tolerance {
    type Error = Error;

    fn try_from(p: ToleranceParams) -> Result<Self> {
        Tolerance::new(p.bounds, p.margin)
    }
}

impl From<Tolerance> for ToleranceParams {
    fn from(t: Tolerance) -> Self {
        ToleranceParams {
            bounds: t.bounds,
            margin: t.margin,
        }
    }
}

pub fn tolerance(distance: f64, bounds: f64, margin: f64) -> Result<f64> {
    if !(distance >= 0.0) {
        return Err(Error::invalid(format!("distance must be non-negative, got {distance}")));
    }
    Ok(Tolerance::new(bounds, margin)?.eval(distance))
}

/// Key press reward: half for how fully the goal keys are held down, half
/// for the absence of any false positive. With no goal keys the first half
/// is fully earned.
pub fn reward_key(goal: KeySet, depression: &[f64], false_positive: bool, tol: &Tolerance) -> f64 {
    let press_term = if goal.is_empty() {
        1.0
    } else {
        goal.iter().map(|k| tol.eval((depression[k] - 1.0).abs())).sum::<f64>() / goal.len() as f64
    };
    0.5 * press_term + 0.5 * if false_positive { 0.0 } else { 1.0 }
}

/// Mean tolerance of fingertip-to-key distance over labeled goal notes;
/// 1 when nothing is labeled.
pub fn reward_finger(
    targets: &[FingerTarget],
    fingertip_x: &[f64; crate::keys::NUM_FINGERS],
    layout: &KeyLayout,
    tol: &Tolerance,
) -> f64 {
    if targets.is_empty() {
        return 1.0;
    }
    targets
        .iter()
        .map(|t| tol.eval((fingertip_x[t.finger.index()] - layout.center(t.key)).abs()))
        .sum::<f64>()
        / targets.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub key: f64,
    pub finger: f64,
    pub energy: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            key: 1.0,
            finger: 1.0,
            energy: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub key: f64,
    pub finger: f64,
    pub energy: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(key: f64, finger: f64, energy: f64, weights: &RewardWeights) -> Self {
        RewardBreakdown {
            key,
            finger,
            energy,
            total: weights.key * key + weights.finger * finger - weights.energy * energy,
        }
    }
}

/// Running sums of reward terms over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTotals {
    pub key: f64,
    pub finger: f64,
    pub energy: f64,
    pub total: f64,
    pub steps: usize,
}

impl RewardTotals {
    pub fn add(&mut self, r: &RewardBreakdown) {
        self.key += r.key;
        self.finger += r.finger;
        self.energy += r.energy;
        self.total += r.total;
        self.steps += 1;
    }
}
