//! Slotted Bernoulli arrivals with uniform destinations.
//!
//! Each input carries at most one packet per slot, present with probability
//! `rho`; its destination is uniform over all output ports (including the
//! input's own index). `rho` is the offered load per input.

use alloc::vec::Vec;

use rand::distributions::{Bernoulli, Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Packet;
use crate::Slot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("offered load {0} is outside [0, 1]")]
    InvalidLoad(f64),
    #[error("traffic needs at least one port")]
    NoPorts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    pub rho: f64,
    pub seed: u64,
    pub n_ports: usize,
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(TrafficError::InvalidLoad(self.rho));
        }
        if self.n_ports == 0 || self.n_ports > u32::MAX as usize {
            return Err(TrafficError::NoPorts);
        }
        Ok(())
    }
}

/// Supplies the packets arriving in each slot.
pub trait ArrivalSource {
    fn n_ports(&self) -> usize;

    /// Appends the packets arriving at `slot`, ordered by input port. Slots
    /// are requested in increasing order.
    fn arrivals(&mut self, slot: Slot, out: &mut Vec<Packet>);
}

impl<S: ArrivalSource + ?Sized> ArrivalSource for &mut S {
    fn n_ports(&self) -> usize {
        (**self).n_ports()
    }

    fn arrivals(&mut self, slot: Slot, out: &mut Vec<Packet>) {
        (**self).arrivals(slot, out)
    }
}

/// Seeded generator; identical seeds give identical arrival streams.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    config: TrafficConfig,
    rng: ChaCha8Rng,
    present: Bernoulli,
    dest: Uniform<u32>,
    next_id: u64,
}

impl TrafficGenerator {
    pub fn new(config: TrafficConfig) -> Result<Self, TrafficError> {
        config.validate()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            present: Bernoulli::new(config.rho)
                .map_err(|_| TrafficError::InvalidLoad(config.rho))?,
            dest: Uniform::new(0, config.n_ports as u32),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.config
    }

    pub fn generate_arrivals(&mut self, slot: Slot) -> Vec<Packet> {
        let mut out = Vec::new();
        self.arrivals(slot, &mut out);
        out
    }
}

impl ArrivalSource for TrafficGenerator {
    fn n_ports(&self) -> usize {
        self.config.n_ports
    }

    fn arrivals(&mut self, slot: Slot, out: &mut Vec<Packet>) {
        for input in 0..self.config.n_ports as u32 {
            if self.present.sample(&mut self.rng) {
                let dest = self.dest.sample(&mut self.rng);
                out.push(Packet::new(self.next_id, slot, input, dest));
                self.next_id += 1;
            }
        }
    }
}
