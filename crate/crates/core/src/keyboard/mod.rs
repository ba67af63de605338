//! Spring-returned keys with activation threshold and sustain latch.
//!
//! Each key's normalized depression relaxes exponentially toward the
//! penetration commanded by whatever rests on it. A key is active once its
//! depression reaches the activation threshold; active keys sound, and the
//! sustain latch keeps released keys sounding until the pedal comes up.

mod layout;

use serde::{Deserialize, Serialize};

pub use layout::{is_black, KeyLayout, LayoutConfig};

use crate::keys::{KeySet, NUM_KEYS};

/// Activation margin below full travel, degrees.
pub const ACTIVATION_MARGIN_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyboardConfig {
    /// Key return time constant, seconds.
    pub tau_key: f64,
    /// Full key travel, degrees.
    pub travel_deg: f64,
    pub layout: LayoutConfig,
}

impl Default for KeyboardConfig {
    fn default() -> Self {
        KeyboardConfig {
            tau_key: 0.01,
            travel_deg: 5.0,
            layout: LayoutConfig::default(),
        }
    }
}

impl KeyboardConfig {
    /// Normalized depression at which a key counts as active.
    pub fn activation_threshold(&self) -> f64 {
        (self.travel_deg - ACTIVATION_MARGIN_DEG) / self.travel_deg
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tau_key > 0.0) {
            return Err(crate::Error::Config(format!(
                "tau_key must be positive, got {}",
                self.tau_key
            )));
        }
        if !(self.travel_deg > ACTIVATION_MARGIN_DEG) {
            return Err(crate::Error::Config(format!(
                "key travel must exceed the {ACTIVATION_MARGIN_DEG} degree activation margin, got {}",
                self.travel_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardState {
    pub depression: Vec<f64>,
    pub sustained: bool,
    pub sounding: KeySet,
    pub just_struck: KeySet,
}

impl Default for KeyboardState {
    fn default() -> Self {
        KeyboardState {
            depression: vec![0.0; NUM_KEYS],
            sustained: false,
            sounding: KeySet::empty(),
            just_struck: KeySet::empty(),
        }
    }
}

impl KeyboardState {
    pub fn active(&self, threshold: f64) -> KeySet {
        active_keys(self, threshold)
    }
}

/// Keys whose depression is at or above `threshold`.
pub fn active_keys(state: &KeyboardState, threshold: f64) -> KeySet {
    state
        .depression
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= threshold)
        .map(|(k, _)| k)
        .collect()
}

/// Advances every key by `dt` toward its commanded load.
///
/// Loads and the pedal command are clamped to `[0, 1]`; the latch holds
/// while the pedal command is at least 0.5.
pub fn step_keys(
    state: &KeyboardState,
    loads: &[f64],
    sustain_cmd: f64,
    dt: f64,
    config: &KeyboardConfig,
) -> KeyboardState {
    let decay = (-dt / config.tau_key).exp();
    let mut next = state.clone();
    step_keys_in_place(&mut next, loads, sustain_cmd, decay, config.activation_threshold());
    next
}

/// In-place variant of [`step_keys`] taking the precomputed decay factor
/// `exp(-dt / tau_key)`.
pub(crate) fn step_keys_in_place(
    state: &mut KeyboardState,
    loads: &[f64],
    sustain_cmd: f64,
    decay: f64,
    threshold: f64,
) {
    debug_assert_eq!(loads.len(), NUM_KEYS);
    let before = active_keys(state, threshold);
    for (d, load) in state.depression.iter_mut().zip(loads) {
        let load = if load.is_nan() { 0.0 } else { load.clamp(0.0, 1.0) };
        *d = (load + (*d - load) * decay).clamp(0.0, 1.0);
    }
    let after = active_keys(state, threshold);
    let sustain_cmd = if sustain_cmd.is_nan() {
        0.0
    } else {
        sustain_cmd.clamp(0.0, 1.0)
    };
    state.sustained = sustain_cmd >= 0.5;
    state.just_struck = after.difference(before);
    state.sounding = if state.sustained {
        state.sounding.union(after)
    } else {
        after
    };
}

/// A note-on or note-off for an external synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub on: bool,
    pub key: usize,
    pub time: f64,
}

impl SynthEvent {
    /// `event<TAB>key<TAB>time`, event being `on` or `off`.
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", if self.on { "on" } else { "off" }, self.key, self.time)
    }
}

/// Events implied by the sounding set changing from `before` to `after`.
pub fn synth_events(before: KeySet, after: KeySet, time: f64) -> Vec<SynthEvent> {
    let offs = before
        .difference(after)
        .iter()
        .map(|key| SynthEvent { on: false, key, time });
    let ons = after
        .difference(before)
        .iter()
        .map(|key| SynthEvent { on: true, key, time });
    offs.chain(ons).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn loads_with(key: usize, value: f64) -> Vec<f64> {
        let mut loads = vec![0.0; NUM_KEYS];
        loads[key] = value;
        loads
    }

    #[test]
    fn threshold_from_geometry() {
        let cfg = KeyboardConfig::default();
        assert!((cfg.activation_threshold() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn decays_to_rest() {
        let cfg = KeyboardConfig::default();
        let mut state = KeyboardState::default();
        state.depression.iter_mut().for_each(|d| *d = 1.0);
        state = step_keys(&state, &[1.0; NUM_KEYS], 1.0, 0.005, &cfg);
        assert_eq!(state.sounding.len(), NUM_KEYS);
        state = step_keys(&state, &[0.0; NUM_KEYS], 1.0, 0.005, &cfg);
        assert_eq!(state.sounding.len(), NUM_KEYS);
        for _ in 0..200 {
            state = step_keys(&state, &[0.0; NUM_KEYS], 0.0, 0.005, &cfg);
        }
        assert!(state.depression.iter().all(|d| *d < 1e-12));
        assert!(state.sounding.is_empty());
    }

    #[test]
    fn closed_threshold() {
        let mut state = KeyboardState::default();
        state.depression[10] = 0.9;
        assert_eq!(active_keys(&state, 0.9).iter().collect::<Vec<_>>(), vec![10]);
        assert!(active_keys(&KeyboardState::default(), 0.9).is_empty());
    }

    #[test]
    fn first_order_response_matches_closed_form() {
        let cfg = KeyboardConfig::default();
        let dt = 0.005;
        let mut state = KeyboardState::default();
        for step in 1..=20 {
            state = step_keys(&state, &loads_with(39, 1.0), 0.0, dt, &cfg);
            let t = step as f64 * dt;
            let want = 1.0 - (-t / cfg.tau_key).exp();
            assert!((state.depression[39] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sustain_holds_released_key() {
        let cfg = KeyboardConfig::default();
        let mut state = KeyboardState::default();
        for _ in 0..10 {
            state = step_keys(&state, &loads_with(39, 1.0), 1.0, 0.005, &cfg);
        }
        assert!(state.active(0.9).contains(39));
        for _ in 0..10 {
            state = step_keys(&state, &[0.0; NUM_KEYS], 1.0, 0.005, &cfg);
        }
        assert!(!state.active(0.9).contains(39));
        assert!(state.sounding.contains(39));
        state = step_keys(&state, &[0.0; NUM_KEYS], 0.0, 0.005, &cfg);
        assert!(state.sounding.is_empty());
    }

    #[test]
    fn just_struck_marks_crossing_step() {
        let cfg = KeyboardConfig::default();
        let mut state = KeyboardState::default();
        let mut struck_at = None;
        for step in 1..=20 {
            state = step_keys(&state, &loads_with(5, 1.0), 0.0, 0.005, &cfg);
            if state.just_struck.contains(5) {
                assert!(struck_at.is_none());
                struck_at = Some(step);
            }
        }
        // -tau ln(0.1) = 0.02303 s, crossed during the fifth 5 ms step
        assert_eq!(struck_at, Some(5));
    }

    #[test]
    fn synth_event_stream() {
        let before: KeySet = [1, 2].into_iter().collect();
        let after: KeySet = [2, 3].into_iter().collect();
        let events = synth_events(before, after, 0.25);
        let lines: Vec<String> = events.iter().map(SynthEvent::to_line).collect();
        assert_eq!(lines, vec!["off\t1\t0.25", "on\t3\t0.25"]);
    }

    proptest! {
        #[test]
        fn depressions_stay_in_unit_interval(
            seq in proptest::collection::vec((proptest::collection::vec(-2.0f64..3.0, NUM_KEYS), 0.0f64..1.0), 1..20),
        ) {
            let cfg = KeyboardConfig::default();
            let mut state = KeyboardState::default();
            for (loads, pedal) in seq {
                state = step_keys(&state, &loads, pedal, 0.005, &cfg);
                prop_assert!(state.depression.iter().all(|d| (0.0..=1.0).contains(d)));
                prop_assert!(state.active(0.9).is_subset(state.sounding));
                if !state.sustained {
                    prop_assert_eq!(state.sounding, state.active(0.9));
                }
            }
        }

        #[test]
        fn semigroup_two_half_steps(d0 in 0.0f64..1.0, load in 0.0f64..1.0, dt in 0.0001f64..0.05) {
            let cfg = KeyboardConfig::default();
            let mut state = KeyboardState::default();
            state.depression[7] = d0;
            let two = step_keys(&step_keys(&state, &loads_with(7, load), 0.0, dt, &cfg), &loads_with(7, load), 0.0, dt, &cfg);
            let one = step_keys(&state, &loads_with(7, load), 0.0, 2.0 * dt, &cfg);
            prop_assert!((two.depression[7] - one.depression[7]).abs() <= 1e-12);
        }

        #[test]
        fn larger_loads_never_give_smaller_depressions(
            seq in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30),
        ) {
            let cfg = KeyboardConfig::default();
            let mut low = KeyboardState::default();
            let mut high = KeyboardState::default();
            for (a, extra) in seq {
                low = step_keys(&low, &loads_with(3, a), 0.0, 0.005, &cfg);
                high = step_keys(&high, &loads_with(3, (a + extra).min(1.0)), 0.0, 0.005, &cfg);
                prop_assert!(high.depression[3] >= low.depression[3]);
            }
        }
    }
}
