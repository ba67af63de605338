//! Byte-level builder for Standard MIDI Files used as test fixtures.
#![allow(dead_code)]

pub fn vlq(mut value: u32) -> Vec<u8> {
    let mut out = vec![(value & 0x7f) as u8];
    value >>= 7;
    while value > 0 {
        out.insert(0, (value & 0x7f) as u8 | 0x80);
        value >>= 7;
    }
    out
}

#[derive(Default)]
pub struct TrackBuilder {
    bytes: Vec<u8>,
}

impl TrackBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn event(mut self, delta: u32, body: &[u8]) -> Self {
        self.bytes.extend(vlq(delta));
        self.bytes.extend_from_slice(body);
        self
    }

    pub fn tempo(self, delta: u32, us_per_quarter: u32) -> Self {
        let b = us_per_quarter.to_be_bytes();
        self.event(delta, &[0xff, 0x51, 0x03, b[1], b[2], b[3]])
    }

    pub fn name(self, delta: u32, name: &str) -> Self {
        let mut body = vec![0xff, 0x03];
        body.extend(vlq(name.len() as u32));
        body.extend_from_slice(name.as_bytes());
        self.event(delta, &body)
    }

    pub fn on(self, delta: u32, channel: u8, pitch: u8, velocity: u8) -> Self {
        self.event(delta, &[0x90 | channel, pitch, velocity])
    }

    pub fn off(self, delta: u32, channel: u8, pitch: u8) -> Self {
        self.event(delta, &[0x80 | channel, pitch, 0x40])
    }

    pub fn pedal(self, delta: u32, channel: u8, value: u8) -> Self {
        self.event(delta, &[0xb0 | channel, 64, value])
    }

    pub fn raw(self, delta: u32, body: &[u8]) -> Self {
        self.event(delta, body)
    }

    pub fn end(self, delta: u32) -> Vec<u8> {
        self.event(delta, &[0xff, 0x2f, 0x00]).bytes
    }
}

pub fn smf(format: u16, ppq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
    let mut out = b"MThd".to_vec();
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&format.to_be_bytes());
    out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&ppq.to_be_bytes());
    for track in tracks {
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(track.len() as u32).to_be_bytes());
        out.extend_from_slice(track);
    }
    out
}

/// One quarter note of `pitch` at 120 bpm, PPQ 480, optionally with a
/// tempo change at `change_tick`.
pub fn quarter_note(pitch: u8, change: Option<(u32, u32)>) -> Vec<u8> {
    let mut t = TrackBuilder::new().tempo(0, 500_000).on(0, 0, pitch, 80);
    let mut at = 0;
    if let Some((tick, us)) = change {
        t = t.tempo(tick, us);
        at = tick;
    }
    smf(0, 480, &[t.off(480 - at, 0, pitch).end(0)])
}
