//! Delay assignment for an FDL bank.
//!
//! A bank of `m` FDLs uses `Z = floor(log2 m) + 1` distinct delays `1..=Z`,
//! spread round-robin so that per-value counts differ by at most one and the
//! shorter delays receive any surplus.

use alloc::vec::Vec;

use crate::model::ModelError;

/// Number of distinct delay values for a bank of `m` FDLs. Zero for an empty bank.
pub fn num_delay_values(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        m.ilog2() as usize + 1
    }
}

/// Delays of every FDL in one bank, in slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayProfile {
    m: usize,
    z: usize,
    t_max: u32,
    delays: Vec<u32>,
}

impl DelayProfile {
    /// Builds a profile from an explicit delay list (the config-file override hook).
    pub fn from_delays(delays: Vec<u32>) -> Result<Self, ModelError> {
        if delays.contains(&0) {
            return Err(ModelError::ZeroDelay);
        }
        let mut distinct = delays.clone();
        distinct.sort_unstable();
        distinct.dedup();
        Ok(Self {
            m: delays.len(),
            z: distinct.len(),
            t_max: delays.iter().copied().max().unwrap_or(0),
            delays,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Distinct delay values.
    pub fn z(&self) -> usize {
        self.z
    }

    /// Largest delay, 0 for an empty bank.
    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn delays(&self) -> &[u32] {
        &self.delays
    }

    /// Number of FDLs carrying each delay value `1..=t_max`, indexed by `value - 1`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.t_max as usize];
        for &d in &self.delays {
            counts[d as usize - 1] += 1;
        }
        counts
    }
}

/// Assigns delays `1..=Z` round-robin over `m` FDLs and sorts them ascending.
pub fn build_profile(m: usize) -> DelayProfile {
    let z = num_delay_values(m);
    let mut delays: Vec<u32> = (0..m).map(|i| (i % z) as u32 + 1).collect();
    delays.sort_unstable();
    DelayProfile {
        m,
        z,
        t_max: z as u32,
        delays,
    }
}
