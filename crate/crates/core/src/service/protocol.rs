//! Wire messages: one JSON object per line, discriminated by `kind`.

use serde::{Deserialize, Serialize};

use crate::env::{RewardBreakdown, StepInfo};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Handshake { version: u32 },
    Reset { song: String, seed: u64 },
    Step { action: Vec<f64> },
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Reply {
    Handshake(Handshake),
    Reset {
        observation: Vec<f64>,
        /// Number of control steps in the episode.
        frames: usize,
    },
    Step {
        observation: Vec<f64>,
        reward: RewardBreakdown,
        done: bool,
        info: StepInfo,
    },
    Close,
    Error(ErrorReply),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handshake {
    pub version: u32,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    pub dt: f64,
    pub lookahead: usize,
    pub songs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The line is not a valid request.
    Malformed,
    VersionMismatch,
    UnknownSong,
    /// Action length differs from the handshake's `action_dim`.
    BadAction,
    NotReset,
    EpisodeDone,
    /// Any other failure inside the environment.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub available: Option<Vec<String>>,
}

impl ErrorReply {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ErrorReply {
            code,
            message: message.into(),
            expected_dim: None,
            available: None,
        }
    }
}

impl Request {
    pub fn parse(line: &str) -> Result<Request> {
        serde_json::from_str(line).map_err(|e| Error::Protocol(e.to_string()))
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("requests always serialize")
    }
}

impl Reply {
    pub fn parse(line: &str) -> Result<Reply> {
        serde_json::from_str(line).map_err(|e| Error::Protocol(e.to_string()))
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("replies always serialize")
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Reply {
        Reply::Error(ErrorReply::new(code, message))
    }
}
