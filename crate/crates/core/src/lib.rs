//! Slotted-time model of a two-stage shared fiber-delay-line (FDL) optical
//! packet switch.
//!
//! The switch has `N` input and output ports. Contended packets are parked in
//! one of three FDL banks:
//!
//! * the Aux Switch-I bank of `m` feed-forward FDLs,
//! * the Aux Switch-II feed-forward bank of `K` FDLs,
//! * the Aux Switch-II feedback bank of `K` recirculating FDLs.
//!
//! Every slot runs a release phase (Aux-II forward, Aux-II feedback, then
//! Aux-I emergences claim output ports) before the assignment phase places the
//! slot's new arrivals. Aux-I assignments never schedule two packets for the
//! same output port in the same future slot.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the command line
//! and parallel sweeps live in the `fdlswitch` crate.

#![no_std]

extern crate alloc;

pub mod delay;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod traffic;

pub use delay::{build_profile, num_delay_values, DelayProfile};
pub use engine::{run, run_with_source, EngineError, RunOutput, RunPlan, Simulation, Totals};
pub use metrics::{aggregate, loss_reduction, MetricsError, RunMetrics, Summary, TraceId};
pub use model::{
    BankKind, FdlBank, FdlPipeline, ModelError, Packet, PortClaims, ReservationCalendar,
    SwitchConfig, SwitchState,
};
pub use scheduler::{Disposition, DropReason, Outcome, Source};
pub use traffic::{ArrivalSource, TrafficConfig, TrafficError, TrafficGenerator};

/// Slot index. One slot is the transmission time of one packet.
pub type Slot = u64;
