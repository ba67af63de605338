//! Framewise precision, recall and F1 between played and goal keys.
//!
//! Scores are computed per frame and then averaged over the frames that are
//! evaluated. A frame whose goal and played sets are both empty carries no
//! information and is skipped.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::RewardTotals;
use crate::error::{Diagnostic, Error, Result};
use crate::keys::KeySet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores one frame, or `None` when both sets are empty.
pub fn frame_prf(goal: KeySet, played: KeySet) -> Option<FramePrf> {
    if goal.is_empty() && played.is_empty() {
        return None;
    }
    let tp = goal.intersection(played).len() as f64;
    let fp = played.difference(goal).len() as f64;
    let fn_ = goal.difference(played).len() as f64;
    let precision = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Some(FramePrf { precision, recall, f1 })
}

/// Running average of per-frame scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfAccumulator {
    sum_precision: f64,
    sum_recall: f64,
    sum_f1: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

impl PrfAccumulator {
    pub fn push(&mut self, frame: Option<FramePrf>) {
        match frame {
            Some(s) => {
                self.sum_precision += s.precision;
                self.sum_recall += s.recall;
                self.sum_f1 += s.f1;
                self.evaluated += 1;
            }
            None => self.skipped += 1,
        }
    }

    /// Mean `(precision, recall, f1)`; `(1, 1, 1)` when nothing was evaluated.
    pub fn mean(&self) -> FramePrf {
        if self.evaluated == 0 {
            return FramePrf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let n = self.evaluated as f64;
        FramePrf {
            precision: self.sum_precision / n,
            recall: self.sum_recall / n,
            f1: self.sum_f1 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Harmonic mean of the averaged precision and recall.
    pub f1_of_means: f64,
    /// F1 when silent frames count as perfect instead of being skipped.
    pub f1_counting_silence: f64,
    pub per_frame: Vec<Option<FramePrf>>,
    pub evaluated: usize,
    pub skipped: usize,
    pub rewards: Option<RewardTotals>,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Averages [`frame_prf`] over paired frames.
pub fn episode_prf(goal: &[KeySet], played: &[KeySet]) -> Result<EpisodeReport> {
    if goal.len() != played.len() {
        return Err(Error::invalid(format!(
            "goal has {} frames but played has {}",
            goal.len(),
            played.len()
        )));
    }
    let per_frame: Vec<Option<FramePrf>> = goal.iter().zip(played).map(|(g, p)| frame_prf(*g, *p)).collect();
    Ok(report_from_frames(per_frame))
}

pub(crate) fn report_from_frames(per_frame: Vec<Option<FramePrf>>) -> EpisodeReport {
    let mut acc = PrfAccumulator::default();
    for frame in &per_frame {
        acc.push(*frame);
    }
    let mean = acc.mean();
    let mut diagnostics = Vec::new();
    if acc.evaluated == 0 {
        diagnostics.push(Diagnostic::warning(
            "no frame had goal or played keys; reporting precision, recall and F1 of 1",
        ));
    }
    let f1_of_means = if mean.precision + mean.recall == 0.0 {
        0.0
    } else {
        2.0 * mean.precision * mean.recall / (mean.precision + mean.recall)
    };
    let f1_counting_silence = if per_frame.is_empty() {
        1.0
    } else {
        per_frame.iter().map(|f| f.map_or(1.0, |s| s.f1)).sum::<f64>() / per_frame.len() as f64
    };
    EpisodeReport {
        precision: mean.precision,
        recall: mean.recall,
        f1: mean.f1,
        f1_of_means,
        f1_counting_silence,
        evaluated: acc.evaluated,
        skipped: acc.skipped,
        per_frame,
        rewards: None,
        diagnostics,
    }
}

impl EpisodeReport {
    /// Flat `key=value` record, one field per line, fixed field order.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "precision={}", self.precision);
        let _ = writeln!(out, "recall={}", self.recall);
        let _ = writeln!(out, "f1={}", self.f1);
        let _ = writeln!(out, "f1_of_means={}", self.f1_of_means);
        let _ = writeln!(out, "f1_counting_silence={}", self.f1_counting_silence);
        let _ = writeln!(out, "frames={}", self.per_frame.len());
        let _ = writeln!(out, "evaluated={}", self.evaluated);
        let _ = writeln!(out, "skipped={}", self.skipped);
        if let Some(r) = &self.rewards {
            let _ = writeln!(out, "reward_key={}", r.key);
            let _ = writeln!(out, "reward_finger={}", r.finger);
            let _ = writeln!(out, "reward_energy={}", r.energy);
            let _ = writeln!(out, "reward_total={}", r.total);
            let _ = writeln!(out, "steps={}", r.steps);
        }
        out
    }

    pub const CSV_HEADER: &'static str = "frame,evaluated,precision,recall,f1";

    /// One CSV row per frame; skipped frames leave the score columns empty.
    pub fn to_frame_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, frame) in self.per_frame.iter().enumerate() {
            match frame {
                Some(s) => {
                    let _ = writeln!(out, "{i},1,{},{},{}", s.precision, s.recall, s.f1);
                }
                None => {
                    let _ = writeln!(out, "{i},0,,,");
                }
            }
        }
        out
    }
}
