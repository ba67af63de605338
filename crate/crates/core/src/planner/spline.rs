use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interpolation between control points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineKind {
    /// Piecewise constant: each point holds until the next.
    Zero,
    Linear,
    /// Catmull-Rom with clamped ends (end points repeated as ghosts).
    #[default]
    Cubic,
}

impl std::str::FromStr for SplineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SplineKind::Zero),
            "linear" => Ok(SplineKind::Linear),
            "cubic" => Ok(SplineKind::Cubic),
            other => Err(Error::Config(format!(
                "unknown spline kind {other:?} (zero, linear, cubic)"
            ))),
        }
    }
}

/// Action sequence over a plan horizon, as `P` evenly spaced control points
/// of dimension `A`. Point `i` sits at time `i * horizon / (P - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalPlan {
    points: Vec<Vec<f64>>,
    horizon: f64,
    kind: SplineKind,
}

impl NominalPlan {
    pub fn new(points: Vec<Vec<f64>>, horizon: f64, kind: SplineKind) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "a plan needs at least 2 control points, got {}",
                points.len()
            )));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("control points differ in dimension"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("plan horizon must be positive, got {horizon}")));
        }
        let mut plan = NominalPlan { points, horizon, kind };
        plan.clamp();
        Ok(plan)
    }

    pub fn zeros(num_points: usize, dim: usize, horizon: f64, kind: SplineKind) -> Result<Self> {
        Self::new(vec![vec![0.0; dim]; num_points], horizon, kind)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> SplineKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn knot_time(&self, i: usize) -> f64 {
        i as f64 * self.horizon / (self.points.len() - 1) as f64
    }

    /// Copy with `noise` scaled by `sigma` added to every control point,
    /// clamped back to `[-1, 1]`. `noise` is point-major.
    pub fn perturbed(&self, noise: &[f64], sigma: f64) -> NominalPlan {
        let dim = self.dim();
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.iter()
                    .enumerate()
                    .map(|(j, v)| v + sigma * noise[i * dim + j])
                    .collect()
            })
            .collect();
        let mut plan = NominalPlan {
            points,
            horizon: self.horizon,
            kind: self.kind,
        };
        plan.clamp();
        plan
    }

    fn clamp(&mut self) {
        for v in self.points.iter_mut().flatten() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        }
    }

    /// Plan value at time `t`, clamped to `[0, horizon]` and to `[-1, 1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let segments = self.points.len() - 1;
        let mut s = (t / self.horizon).clamp(0.0, 1.0) * segments as f64;
        // snap to a knot within rounding distance so knot times hit it exactly
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        let i = (s.floor() as usize).min(segments - 1);
        let u = s - i as f64;
        let p1 = &self.points[i];
        let p2 = &self.points[i + 1];
        match self.kind {
            SplineKind::Zero => {
                out.copy_from_slice(if u >= 1.0 { p2 } else { p1 });
            }
            SplineKind::Linear => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = p1[j] + u * (p2[j] - p1[j]);
                }
            }
            SplineKind::Cubic => {
                let p0 = &self.points[i.saturating_sub(1)];
                let p3 = &self.points[(i + 2).min(segments)];
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                for (j, o) in out.iter_mut().enumerate() {
                    let m1 = 0.5 * (p2[j] - p0[j]);
                    let m2 = 0.5 * (p3[j] - p1[j]);
                    *o = h00 * p1[j] + h10 * m1 + h01 * p2[j] + h11 * m2;
                }
            }
        }
        for o in out.iter_mut() {
            *o = o.clamp(-1.0, 1.0);
        }
    }

    /// Receding-horizon warm start: the plan resampled `dt` later, holding
    /// the final value past the end.
    pub fn shifted(&self, dt: f64) -> NominalPlan {
        let points = (0..self.points.len())
            .map(|i| self.eval((self.knot_time(i) + dt).min(self.horizon)))
            .collect();
        NominalPlan {
            points,
            horizon: self.horizon,
            kind: self.kind,
        }
    }
}
