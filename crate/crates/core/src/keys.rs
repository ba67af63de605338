//! Key and finger index sets.
//!
//! The keyboard has 88 keys, indexed 0 (A0, MIDI 21) through 87 (C8, MIDI 108).
//! Fingers are indexed 0..=4 for the right hand (thumb to little) and 5..=9
//! for the left hand (thumb to little).

use std::fmt;

use serde::{Deserialize, Serialize};

pub const NUM_KEYS: usize = 88;
pub const NUM_FINGERS: usize = 10;

/// MIDI note number of key 0 (A0).
pub const LOWEST_PITCH: u8 = 21;
/// MIDI note number of key 87 (C8).
pub const HIGHEST_PITCH: u8 = 108;

/// Maps a MIDI pitch onto its key index, or `None` when the pitch is off the keyboard.
pub fn key_of_pitch(pitch: u8) -> Option<usize> {
    (LOWEST_PITCH..=HIGHEST_PITCH)
        .contains(&pitch)
        .then(|| usize::from(pitch - LOWEST_PITCH))
}

pub fn pitch_of_key(key: usize) -> u8 {
    assert!(key < NUM_KEYS, "key index {key} out of range");
    LOWEST_PITCH + key as u8
}

/// A set of key indices, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeySet(u128);

impl KeySet {
    pub const fn empty() -> Self {
        KeySet(0)
    }

    pub fn from_bits(bits: u128) -> Self {
        KeySet(bits & ((1u128 << NUM_KEYS) - 1))
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn insert(&mut self, key: usize) {
        assert!(key < NUM_KEYS, "key index {key} out of range");
        self.0 |= 1 << key;
    }

    pub fn remove(&mut self, key: usize) {
        if key < NUM_KEYS {
            self.0 &= !(1 << key);
        }
    }

    pub fn contains(self, key: usize) -> bool {
        key < NUM_KEYS && self.0 & (1 << key) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: KeySet) -> KeySet {
        KeySet(self.0 | other.0)
    }

    pub fn intersection(self, other: KeySet) -> KeySet {
        KeySet(self.0 & other.0)
    }

    pub fn difference(self, other: KeySet) -> KeySet {
        KeySet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: KeySet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Iterates over member keys in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let key = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(key)
        })
    }

    pub fn to_bools(self) -> [bool; NUM_KEYS] {
        let mut out = [false; NUM_KEYS];
        for key in self.iter() {
            out[key] = true;
        }
        out
    }

    pub fn from_bools(bools: &[bool]) -> Self {
        let mut set = KeySet::empty();
        for (key, _) in bools.iter().enumerate().take(NUM_KEYS).filter(|(_, b)| **b) {
            set.insert(key);
        }
        set
    }
}

impl FromIterator<usize> for KeySet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = KeySet::empty();
        for key in iter {
            set.insert(key);
        }
        set
    }
}

impl fmt::Debug for KeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finger index in 0..=9.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Finger(u8);

impl Finger {
    pub fn new(index: u8) -> Option<Finger> {
        (usize::from(index) < NUM_FINGERS).then_some(Finger(index))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn hand(self) -> Hand {
        if self.0 < 5 {
            Hand::Right
        } else {
            Hand::Left
        }
    }

    /// Position within the hand, 0 = thumb .. 4 = little.
    pub fn digit(self) -> usize {
        usize::from(self.0 % 5)
    }
}

impl TryFrom<u8> for Finger {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Finger::new(value).ok_or_else(|| format!("finger index {value} out of range 0..=9"))
    }
}

impl From<Finger> for u8 {
    fn from(f: Finger) -> u8 {
        f.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Right,
    Left,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Right, Hand::Left];

    pub fn index(self) -> usize {
        match self {
            Hand::Right => 0,
            Hand::Left => 1,
        }
    }
}

/// A set of finger indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FingerSet(u16);

impl FingerSet {
    pub fn insert(&mut self, finger: Finger) {
        self.0 |= 1 << finger.0;
    }

    pub fn contains(self, finger: Finger) -> bool {
        self.0 & (1 << finger.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Finger> {
        (0..NUM_FINGERS as u8).map(Finger).filter(move |f| self.contains(*f))
    }
}

impl FromIterator<Finger> for FingerSet {
    fn from_iter<I: IntoIterator<Item = Finger>>(iter: I) -> Self {
        let mut set = FingerSet::default();
        for f in iter {
            set.insert(f);
        }
        set
    }
}

impl fmt::Debug for FingerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(Finger::index)).finish()
    }
}
