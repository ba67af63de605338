//! Simulated bimanual piano playing: score ingestion, a keyboard and hand
//! model, a goal-conditioned episode with shaped rewards, framewise scoring
//! and a sampling-based model-predictive controller.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod error;
pub mod hands;
pub mod keyboard;
pub mod keys;
pub mod metrics;
pub mod planner;
pub mod policy;
pub mod score;
pub mod service;
pub mod songs;

pub use error::{Diagnostic, Error, Result, Severity};
