//! Horizontal key geometry.
//!
//! Positions are meters along the keyboard, measured from the left edge of
//! the A0 key. White keys sit on a regular pitch; each black key is centered
//! on the boundary between its two white neighbors. Every key owns a
//! disjoint horizontal extent: white keys give up the part of their slot
//! covered by a black neighbor, and adjacent extents are separated by a gap.

use serde::{Deserialize, Serialize};

use crate::keys::{pitch_of_key, NUM_KEYS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    /// Distance between neighboring white key centers, meters.
    pub white_pitch: f64,
    pub black_width: f64,
    /// Clearance between adjacent key extents, meters.
    pub gap: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            white_pitch: 0.0235,
            black_width: 0.0115,
            gap: 0.001,
        }
    }
}

pub fn is_black(pitch: u8) -> bool {
    matches!(pitch % 12, 1 | 3 | 6 | 8 | 10)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyLayout {
    extents: Vec<(f64, f64)>,
    centers: Vec<f64>,
    width: f64,
}

impl KeyLayout {
    pub fn new(config: &LayoutConfig) -> Self {
        assert!(config.white_pitch > 0.0, "white key pitch must be positive");
        assert!(
            config.black_width > 0.0 && config.black_width + 2.0 * config.gap < config.white_pitch,
            "black keys must fit between white key centers"
        );
        let w = config.white_pitch;
        let half_b = config.black_width / 2.0;
        let half_gap = config.gap / 2.0;

        let mut white_index = vec![0usize; NUM_KEYS];
        let mut whites = 0usize;
        for (key, slot) in white_index.iter_mut().enumerate() {
            *slot = whites;
            if !is_black(pitch_of_key(key)) {
                whites += 1;
            }
        }

        let mut extents = Vec::with_capacity(NUM_KEYS);
        for (key, &index) in white_index.iter().enumerate() {
            let pitch = pitch_of_key(key);
            if is_black(pitch) {
                // white_index of a black key counts the whites to its left
                let boundary = index as f64 * w;
                extents.push((boundary - half_b, boundary + half_b));
            } else {
                let left = index as f64 * w;
                let black_left = key > 0 && is_black(pitch_of_key(key - 1));
                let black_right = key + 1 < NUM_KEYS && is_black(pitch_of_key(key + 1));
                let lo = left + if black_left { half_b + half_gap } else { half_gap };
                let hi = left + w - if black_right { half_b + half_gap } else { half_gap };
                extents.push((lo, hi));
            }
        }
        let centers = extents.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        KeyLayout {
            extents,
            centers,
            width: whites as f64 * w,
        }
    }

    /// Total keyboard width, meters.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn extent(&self, key: usize) -> (f64, f64) {
        self.extents[key]
    }

    /// Target point for a finger pressing `key`: the middle of its extent.
    pub fn center(&self, key: usize) -> f64 {
        self.centers[key]
    }

    /// The key a fingertip at `x` rests on: the key whose extent contains `x`,
    /// otherwise (in a gap) the key with the nearest center, lower index on
    /// ties. `None` off the keyboard.
    pub fn key_at(&self, x: f64) -> Option<usize> {
        if !(0.0..=self.width).contains(&x) {
            return None;
        }
        // Extents are sorted and disjoint.
        let idx = self.extents.partition_point(|(lo, _)| *lo <= x);
        if idx > 0 && x <= self.extents[idx - 1].1 {
            return Some(idx - 1);
        }
        let candidates = [idx.checked_sub(1), (idx < NUM_KEYS).then_some(idx)];
        candidates.into_iter().flatten().min_by(|a, b| {
            (x - self.centers[*a])
                .abs()
                .total_cmp(&(x - self.centers[*b]).abs())
                .then(a.cmp(b))
        })
    }
}

impl Default for KeyLayout {
    fn default() -> Self {
        KeyLayout::new(&LayoutConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_width() {
        let layout = KeyLayout::default();
        let blacks = (0..NUM_KEYS).filter(|k| is_black(pitch_of_key(*k))).count();
        assert_eq!(blacks, 36);
        assert_eq!(NUM_KEYS - blacks, 52);
        assert!((layout.width() - 52.0 * 0.0235).abs() < 1e-12);
    }

    #[test]
    fn extents_sorted_and_disjoint() {
        let layout = KeyLayout::default();
        for k in 0..NUM_KEYS {
            let (lo, hi) = layout.extent(k);
            assert!(lo < hi, "key {k}");
            if k + 1 < NUM_KEYS {
                let (next_lo, _) = layout.extent(k + 1);
                assert!(hi < next_lo, "keys {k} and {} overlap", k + 1);
            }
        }
    }

    #[test]
    fn every_center_maps_to_its_key() {
        let layout = KeyLayout::default();
        for k in 0..NUM_KEYS {
            assert_eq!(layout.key_at(layout.center(k)), Some(k));
        }
    }

    #[test]
    fn gap_resolves_to_nearest_center() {
        let layout = KeyLayout::default();
        // Between C4 (key 39, white) and C#4 (key 40, black).
        let (_, c_hi) = layout.extent(39);
        let (cs_lo, _) = layout.extent(40);
        assert!(c_hi < cs_lo);
        let mid = 0.5 * (c_hi + cs_lo);
        let hit = layout.key_at(mid).unwrap();
        let nearest = if (mid - layout.center(39)).abs() <= (mid - layout.center(40)).abs() {
            39
        } else {
            40
        };
        assert_eq!(hit, nearest);
        // Exactly one key for every sample point across the gap.
        for i in 0..=20 {
            let x = c_hi + (cs_lo - c_hi) * f64::from(i) / 20.0;
            assert!(matches!(layout.key_at(x), Some(39) | Some(40)));
        }
    }

    #[test]
    fn off_keyboard() {
        let layout = KeyLayout::default();
        assert_eq!(layout.key_at(-0.001), None);
        assert_eq!(layout.key_at(layout.width() + 0.001), None);
        assert_eq!(layout.key_at(0.0), Some(0));
    }

    #[test]
    fn middle_c_position() {
        let layout = KeyLayout::default();
        // 23 white keys from A0 up to (not including) C4.
        let (lo, hi) = layout.extent(39);
        assert!(lo >= 23.0 * 0.0235 && hi <= 24.0 * 0.0235);
    }
}
