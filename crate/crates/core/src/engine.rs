//! The slot loop: release, assign, bookkeeping, then a drain tail with no new
//! arrivals until every FDL is empty.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::metrics::{RunMetrics, TraceId};
use crate::model::{ModelError, Packet, SwitchConfig, SwitchState};
use crate::scheduler::{assign_phase, release_phase, Disposition};
use crate::traffic::{ArrivalSource, TrafficConfig, TrafficError, TrafficGenerator};
use crate::Slot;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("invalid run plan: {0}")]
    InvalidPlan(&'static str),
    #[error(
        "conservation broken at slot {slot}: offered {offered} != delivered {delivered} + dropped {dropped} + in flight {in_flight}"
    )]
    Conservation {
        slot: Slot,
        offered: u64,
        delivered: u64,
        dropped: u64,
        in_flight: u64,
    },
    #[error("switch still holds packets {slots} slots after the last arrival")]
    DrainStalled { slots: Slot },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Slots that receive arrivals. The drain tail comes after these.
    pub total_slots: Slot,
    /// Packets arriving before this slot are left out of the metrics.
    pub warmup_slots: Slot,
    pub switch: SwitchConfig,
    pub traffic: TrafficConfig,
    pub record_event_log: bool,
    /// Check every model invariant and conservation after each slot.
    pub check_invariants: bool,
}

impl RunPlan {
    pub const DEFAULT_HORIZON: Slot = 1_000_000;
    pub const DEFAULT_WARMUP: Slot = 10_000;

    pub fn new(switch: SwitchConfig, rho: f64, seed: u64) -> Self {
        let traffic = TrafficConfig {
            rho,
            seed,
            n_ports: switch.n_ports,
        };
        Self {
            total_slots: Self::DEFAULT_HORIZON,
            warmup_slots: Self::DEFAULT_WARMUP,
            switch,
            traffic,
            record_event_log: false,
            check_invariants: false,
        }
    }

    pub fn with_horizon(mut self, total_slots: Slot, warmup_slots: Slot) -> Self {
        self.total_slots = total_slots;
        self.warmup_slots = warmup_slots;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.warmup_slots >= self.total_slots {
            return Err(EngineError::InvalidPlan(
                "warmup_slots must be below total_slots",
            ));
        }
        if self.traffic.n_ports != self.switch.n_ports {
            return Err(EngineError::InvalidPlan(
                "traffic and switch port counts differ",
            ));
        }
        self.switch.validate()?;
        self.traffic.validate()?;
        Ok(())
    }
}

/// Whole-run counters, warm-up included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub totals: Totals,
    /// Slots run after the horizon until the switch was empty.
    pub drain_slots: Slot,
    pub event_log: Option<Vec<Disposition>>,
}

/// One run's state. Owns its switch, arrival source and shuffle generator.
pub struct Simulation<S> {
    state: SwitchState,
    source: S,
    rng: ChaCha8Rng,
    slot: Slot,
    total_slots: Slot,
    warmup_slots: Slot,
    check: bool,
    drain_bound: Slot,
    metrics: RunMetrics,
    totals: Totals,
    trace_id: TraceId,
    arrivals: Vec<Packet>,
    dispositions: Vec<Disposition>,
    event_log: Option<Vec<Disposition>>,
}

impl<S: ArrivalSource> Simulation<S> {
    pub fn new(plan: &RunPlan, source: S) -> Result<Self, EngineError> {
        plan.validate()?;
        if source.n_ports() != plan.switch.n_ports {
            return Err(EngineError::InvalidPlan(
                "arrival source port count differs from switch",
            ));
        }
        let state = SwitchState::new(plan.switch.clone())?;
        let drain_bound = state.aux1.max_delay() as Slot
            + plan.switch.max_circulations as Slot * state.feedback.max_delay() as Slot
            + state.forward.max_delay() as Slot;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.traffic.seed);
        // stream 0 belongs to the traffic generator
        rng.set_stream(1);
        Ok(Self {
            state,
            source,
            rng,
            slot: 0,
            total_slots: plan.total_slots,
            warmup_slots: plan.warmup_slots,
            check: plan.check_invariants,
            drain_bound,
            metrics: RunMetrics::new(),
            totals: Totals::default(),
            trace_id: TraceId::default(),
            arrivals: Vec::new(),
            dispositions: Vec::new(),
            event_log: plan.record_event_log.then(Vec::new),
        })
    }

    pub fn state(&self) -> &SwitchState {
        &self.state
    }

    /// The next slot [`step`](Self::step) will process.
    pub fn slot(&self) -> Slot {
        self.slot
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    /// Upper bound on drain length: longest Aux-I delay, plus every allowed
    /// circulation through the longest feedback FDL, plus the longest forward FDL.
    pub fn drain_bound(&self) -> Slot {
        self.drain_bound
    }

    /// Past the horizon with every FDL empty.
    pub fn is_drained(&self) -> bool {
        self.slot >= self.total_slots && self.state.in_flight() == 0
    }

    /// Processes one slot and returns its dispositions, releases first.
    pub fn step(&mut self) -> Result<&[Disposition], EngineError> {
        let slot = self.slot;
        self.dispositions.clear();
        self.arrivals.clear();
        self.state.claims.clear(slot);

        release_phase(&mut self.state, slot, &mut self.dispositions)?;

        if slot < self.total_slots {
            self.source.arrivals(slot, &mut self.arrivals);
        }
        for p in &self.arrivals {
            self.trace_id.record(slot, p.input_port, p.dest_port);
            self.totals.offered += 1;
            if p.arrival_slot >= self.warmup_slots {
                self.metrics.record_offered();
            }
        }
        assign_phase(
            &mut self.state,
            slot,
            &mut self.arrivals,
            &mut self.rng,
            &mut self.dispositions,
        )?;

        for d in &self.dispositions {
            match d.outcome {
                crate::Outcome::Delivered { .. } => self.totals.delivered += 1,
                crate::Outcome::Dropped(_) => self.totals.dropped += 1,
                _ => continue,
            }
            if d.packet.arrival_slot >= self.warmup_slots {
                self.metrics.record(d);
            }
        }
        if let Some(log) = &mut self.event_log {
            log.extend_from_slice(&self.dispositions);
        }
        if self.check {
            self.state.check_invariants(slot)?;
            self.check_conservation(slot)?;
        }
        self.slot += 1;
        Ok(&self.dispositions)
    }

    fn check_conservation(&self, slot: Slot) -> Result<(), EngineError> {
        let in_flight = self.state.in_flight() as u64;
        let t = self.totals;
        if t.offered != t.delivered + t.dropped + in_flight {
            return Err(EngineError::Conservation {
                slot,
                offered: t.offered,
                delivered: t.delivered,
                dropped: t.dropped,
                in_flight,
            });
        }
        Ok(())
    }

    /// Runs the horizon and the drain tail.
    pub fn run_to_end(mut self) -> Result<RunOutput, EngineError> {
        while self.slot < self.total_slots {
            self.step()?;
        }
        let mut drain_slots = 0;
        while self.state.in_flight() > 0 {
            if drain_slots >= self.drain_bound {
                return Err(EngineError::DrainStalled { slots: drain_slots });
            }
            self.step()?;
            drain_slots += 1;
        }
        self.check_conservation(self.slot)?;
        let mut metrics = self.metrics;
        self.trace_id.finish(self.total_slots);
        metrics.trace_id = self.trace_id;
        Ok(RunOutput {
            metrics,
            totals: self.totals,
            drain_slots,
            event_log: self.event_log,
        })
    }
}

/// Runs `plan` with its own seeded traffic generator.
pub fn run(plan: &RunPlan) -> Result<RunOutput, EngineError> {
    let source = TrafficGenerator::new(plan.traffic)?;
    run_with_source(plan, source)
}

/// Runs `plan` with arrivals from `source`, e.g. a replayed trace.
pub fn run_with_source<S: ArrivalSource>(
    plan: &RunPlan,
    source: S,
) -> Result<RunOutput, EngineError> {
    Simulation::new(plan, source)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_validation() {
        let plan = RunPlan::new(SwitchConfig::default(), 0.5, 1).with_horizon(10, 10);
        assert!(matches!(plan.validate(), Err(EngineError::InvalidPlan(_))));
        let mut plan = RunPlan::new(SwitchConfig::default(), 0.5, 1).with_horizon(10, 0);
        plan.traffic.n_ports = 3;
        assert!(plan.validate().is_err());
        let plan = RunPlan::new(SwitchConfig::default(), 2.0, 1).with_horizon(10, 0);
        assert!(matches!(plan.validate(), Err(EngineError::Traffic(_))));
    }

    #[test]
    fn empty_step_changes_nothing() {
        let plan = RunPlan::new(SwitchConfig::default(), 0.0, 1).with_horizon(5, 0);
        let mut sim = Simulation::new(&plan, TrafficGenerator::new(plan.traffic).unwrap()).unwrap();
        assert!(sim.step().unwrap().is_empty());
        assert_eq!(sim.state().in_flight(), 0);
        assert_eq!(sim.totals(), Totals::default());
        assert_eq!(sim.slot(), 1);
    }

    #[test]
    fn zero_load_run() {
        let plan = RunPlan::new(SwitchConfig::default(), 0.0, 9).with_horizon(1000, 10);
        let out = run(&plan).unwrap();
        assert_eq!(out.metrics.offered, 0);
        assert_eq!(out.metrics.plr(), 0.0);
        assert_eq!(out.metrics.avg_delay(), 0.0);
        assert_eq!(out.drain_slots, 0);
    }

    #[test]
    fn single_port_never_contends() {
        let switch = SwitchConfig {
            n_ports: 1,
            m_aux1: 0,
            aux2_enabled: false,
            ..SwitchConfig::default()
        };
        let plan = RunPlan::new(switch, 1.0, 4).with_horizon(500, 0);
        let out = run(&plan).unwrap();
        assert_eq!(out.metrics.offered, 500);
        assert_eq!(out.metrics.delivered, 500);
        assert_eq!(out.metrics.plr(), 0.0);
        assert_eq!(out.metrics.avg_delay(), 0.0);
    }

    #[test]
    fn warmup_packets_excluded() {
        let mut plan = RunPlan::new(SwitchConfig::with_aux1(8, 8), 0.8, 2).with_horizon(2000, 500);
        plan.check_invariants = true;
        let out = run(&plan).unwrap();
        assert!(out.metrics.offered < out.totals.offered);
        assert_eq!(
            out.metrics.offered,
            out.metrics.delivered + out.metrics.total_dropped()
        );
        assert_eq!(
            out.totals.offered,
            out.totals.delivered + out.totals.dropped
        );
    }
}
