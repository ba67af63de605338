use serde::{Deserialize, Serialize};

use super::RewardBreakdown;

/// Compact per-step record for comparing runs: a hash of the observation
/// seen before acting, the action taken and the reward received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame: usize,
    pub obs_hash: u64,
    pub action: Vec<f64>,
    pub reward: RewardBreakdown,
}

/// 64-bit FNV-1a over the little-endian bit patterns of `values`.
pub fn observation_hash(values: &[f64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    hash
}
