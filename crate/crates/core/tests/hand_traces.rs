//! Small traces worked out by hand, driven through the full engine.

use fdlswitch_core::{
    run_with_source, ArrivalSource, BankKind, Disposition, DropReason, Outcome, Packet, RunPlan,
    Simulation, Slot, SwitchConfig,
};

/// Emits `count` packets for `port` at slot 0 and nothing afterwards.
struct Burst {
    n_ports: usize,
    port: u32,
    count: u32,
}

impl ArrivalSource for Burst {
    fn n_ports(&self) -> usize {
        self.n_ports
    }

    fn arrivals(&mut self, slot: Slot, out: &mut Vec<Packet>) {
        if slot == 0 {
            out.extend((0..self.count).map(|i| Packet::new(i as u64, 0, i, self.port)));
        }
    }
}

fn plan(m: usize) -> RunPlan {
    let mut plan = RunPlan::new(SwitchConfig::with_aux1(4, m), 0.5, 42).with_horizon(1, 0);
    plan.record_event_log = true;
    plan.check_invariants = true;
    plan
}

fn burst(m: usize, count: u32) -> Vec<Disposition> {
    let source = Burst {
        n_ports: 4,
        port: 2,
        count,
    };
    run_with_source(&plan(m), source)
        .unwrap()
        .event_log
        .unwrap()
}

fn delivered_delays(log: &[Disposition]) -> Vec<u64> {
    let mut v: Vec<u64> = log
        .iter()
        .filter_map(|d| match d.outcome {
            Outcome::Delivered { delay } => Some(delay),
            _ => None,
        })
        .collect();
    v.sort_unstable();
    v
}

#[test]
fn lone_packet_goes_straight_through() {
    let log = burst(2, 1);
    assert_eq!(delivered_delays(&log), vec![0]);
}

#[test]
fn two_contenders_slot_by_slot() {
    let source = Burst {
        n_ports: 4,
        port: 2,
        count: 2,
    };
    let mut sim = Simulation::new(&plan(2), source).unwrap();

    let slot0: Vec<Outcome> = sim.step().unwrap().iter().map(|d| d.outcome).collect();
    assert_eq!(slot0.len(), 2);
    assert!(slot0.contains(&Outcome::Delivered { delay: 0 }));
    assert!(slot0.contains(&Outcome::Buffered {
        bank: BankKind::Aux1,
        fdl: 0
    }));

    let slot1: Vec<Outcome> = sim.step().unwrap().iter().map(|d| d.outcome).collect();
    assert_eq!(slot1, vec![Outcome::Delivered { delay: 1 }]);
    assert!(sim.is_drained());
}

#[test]
fn three_contenders_stagger_over_two_fdls() {
    let log = burst(2, 3);
    assert_eq!(delivered_delays(&log), vec![0, 1, 2]);
    // the third packet could not reuse the delay-1 FDL entry in slot 0
    assert!(log.iter().any(|d| d.outcome
        == Outcome::Buffered {
            bank: BankKind::Aux1,
            fdl: 1
        }));
}

#[test]
fn forward_bank_absorbs_two_then_drops() {
    let log = burst(0, 4);
    assert_eq!(delivered_delays(&log), vec![0, 1, 2]);
    let drops: Vec<_> = log
        .iter()
        .filter_map(|d| match d.outcome {
            Outcome::Dropped(r) => Some(r),
            _ => None,
        })
        .collect();
    assert_eq!(drops, vec![DropReason::AssignBlocked]);
}

#[test]
fn empty_source_produces_nothing() {
    let source = Burst {
        n_ports: 4,
        port: 0,
        count: 0,
    };
    let out = run_with_source(&plan(8), source).unwrap();
    assert!(out.event_log.unwrap().is_empty());
    assert_eq!(out.metrics.offered, 0);
}
