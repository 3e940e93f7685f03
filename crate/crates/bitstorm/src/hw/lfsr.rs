//! Fibonacci linear feedback shift registers.
//!
//! Tap positions are 1-based with position `width` naming the x^width term,
//! so the default 16-bit register with taps (16, 14, 13, 11) implements
//! x^16 + x^14 + x^13 + x^11 + 1, a maximal-length configuration with period
//! 2^16 - 1 (asserted by test, not assumed). Each step shifts the register
//! right by one; the shifted-out bit is the output and the XOR of the tapped
//! bits is fed back into the top.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfsrConfig {
    pub width: u32,
    pub taps: Vec<u32>,
}

impl Default for LfsrConfig {
    fn default() -> Self {
        Self {
            width: 16,
            taps: vec![16, 14, 13, 11],
        }
    }
}

impl LfsrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=32).contains(&self.width) {
            return Err(Error::Config(format!(
                "LFSR width {} out of range 2..=32",
                self.width
            )));
        }
        if self.taps.is_empty() {
            return Err(Error::Config("LFSR needs at least one tap".into()));
        }
        for &t in &self.taps {
            if t < 1 || t > self.width {
                return Err(Error::Config(format!(
                    "LFSR tap {t} out of range 1..={}",
                    self.width
                )));
            }
        }
        let mut sorted = self.taps.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.taps.len() {
            return Err(Error::Config("duplicate LFSR taps".into()));
        }
        Ok(())
    }

    pub fn state_mask(&self) -> u32 {
        if self.width == 32 {
            u32::MAX
        } else {
            (1u32 << self.width) - 1
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lfsr {
    width: u32,
    tap_mask: u32,
    state: u32,
}

impl Lfsr {
    /// The state must be nonzero and fit in `width` bits; an all-zero
    /// register would be stuck emitting zeros forever.
    pub fn new(config: &LfsrConfig, state: u32) -> Result<Self> {
        config.validate()?;
        if state == 0 {
            return Err(Error::Config("LFSR state must be nonzero".into()));
        }
        if state & !config.state_mask() != 0 {
            return Err(Error::Config(format!(
                "LFSR state {state:#x} wider than {} bits",
                config.width
            )));
        }
        let mut tap_mask = 0u32;
        for &t in &config.taps {
            tap_mask |= 1 << (config.width - t);
        }
        Ok(Self {
            width: config.width,
            tap_mask,
            state,
        })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    /// Advance one cycle; returns the shifted-out bit.
    pub fn step(&mut self) -> bool {
        let out = self.state & 1 == 1;
        let feedback = ((self.state & self.tap_mask).count_ones() & 1) as u32;
        self.state = (self.state >> 1) | (feedback << (self.width - 1));
        out
    }

    /// Fill `buf` with consecutive output bits.
    pub fn fill(&mut self, buf: &mut [bool]) {
        for b in buf {
            *b = self.step();
        }
    }
}
