//! Contention resolution with packet-releasing priority.
//!
//! Each slot first releases packets leaving the FDL banks (Aux-II forward,
//! then Aux-II feedback, then Aux-I) and only then places new arrivals:
//! direct delivery, an Aux-I FDL that keeps the output port conflict free,
//! the shortest free Aux-II forward FDL, or a drop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{BankKind, ModelError, Packet, SwitchState};
use crate::Slot;

/// Where a packet was when the scheduler handled it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Arrival,
    Aux2Forward,
    Aux2Feedback,
    Aux1,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Arrival => "arrival",
            Source::Aux2Forward => "aux2_forward",
            Source::Aux2Feedback => "aux2_feedback",
            Source::Aux1 => "aux1",
        }
    }

    pub fn is_release(self) -> bool {
        self != Source::Arrival
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    /// No Aux-I FDL satisfied the conflict-free constraint and no Aux-II forward entry was free.
    AssignBlocked,
    /// A feedback packet met a busy port with its circulations spent or no feedback entry free.
    RecirculationExhausted,
    /// A released Aux-I packet met a busy port and no feedback entry was free.
    FeedbackFullFromAux1,
    /// A released Aux-II forward packet met a busy port and no feedback entry was free.
    FeedbackFullFromForward,
}

impl DropReason {
    pub const ALL: [DropReason; 4] = [
        DropReason::AssignBlocked,
        DropReason::RecirculationExhausted,
        DropReason::FeedbackFullFromAux1,
        DropReason::FeedbackFullFromForward,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::AssignBlocked => "assign_blocked",
            DropReason::RecirculationExhausted => "recirculation_exhausted",
            DropReason::FeedbackFullFromAux1 => "feedback_full_from_aux1",
            DropReason::FeedbackFullFromForward => "feedback_full_from_ff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Sent to its output port; `delay` = delivery slot − arrival slot.
    Delivered {
        delay: u64,
    },
    /// Placed into an FDL of `bank`.
    Buffered {
        bank: BankKind,
        fdl: usize,
    },
    /// A feedback packet sent around the feedback bank again.
    Recirculated {
        fdl: usize,
    },
    Dropped(DropReason),
}

/// What happened to one packet in one slot. `packet` reflects the state after
/// the decision (e.g. its incremented circulation count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Disposition {
    pub slot: Slot,
    pub packet: Packet,
    pub source: Source,
    pub outcome: Outcome,
}

impl Disposition {
    /// Delivered or dropped: the packet leaves the switch.
    pub fn is_final(&self) -> bool {
        matches!(
            self.outcome,
            Outcome::Delivered { .. } | Outcome::Dropped(_)
        )
    }
}

/// Aux-I FDL for a contended packet: free entry this slot and no reservation
/// for `dest_port` at the emergence slot. Minimum delay wins, then lowest index.
pub fn select_aux1_fdl(state: &SwitchState, dest_port: usize, slot: Slot) -> Option<usize> {
    state.aux1.by_delay().iter().copied().find(|&i| {
        state.aux1.entry_free(i, slot)
            && !state
                .calendar
                .is_reserved(dest_port, slot + state.aux1.delay(i) as u64)
    })
}

/// Shortest free Aux-II forward FDL, if Aux-II is present.
pub fn select_forward_fdl(state: &SwitchState, slot: Slot) -> Option<usize> {
    if !state.config.aux2_enabled {
        return None;
    }
    state.forward.min_delay_free(slot)
}

/// Shortest free feedback FDL for a packet that has begun `circulations`
/// traversals; absent once another traversal would exceed the cap.
pub fn select_feedback_fdl(state: &SwitchState, slot: Slot, circulations: u32) -> Option<usize> {
    if !state.config.aux2_enabled || circulations + 1 > state.config.max_circulations {
        return None;
    }
    state.feedback.min_delay_free(slot)
}

fn delivered(slot: Slot, packet: Packet, source: Source) -> Disposition {
    Disposition {
        slot,
        packet,
        source,
        outcome: Outcome::Delivered {
            delay: slot - packet.arrival_slot,
        },
    }
}

/// Sends a blocked released packet into the feedback bank, or drops it.
fn divert_to_feedback(
    state: &mut SwitchState,
    slot: Slot,
    mut packet: Packet,
    source: Source,
    on_full: DropReason,
) -> Result<Disposition, ModelError> {
    let outcome = match select_feedback_fdl(state, slot, packet.circulations) {
        Some(fdl) => {
            packet.circulations += 1;
            state.feedback.insert(fdl, slot, packet)?;
            if source == Source::Aux2Feedback {
                Outcome::Recirculated { fdl }
            } else {
                Outcome::Buffered {
                    bank: BankKind::Aux2Feedback,
                    fdl,
                }
            }
        }
        None => Outcome::Dropped(on_full),
    };
    Ok(Disposition {
        slot,
        packet,
        source,
        outcome,
    })
}

/// Releases every packet due at `slot`: Aux-II forward, then Aux-II feedback,
/// then Aux-I, each in ascending FDL index. Port claims for the slot must
/// already be cleared.
pub fn release_phase(
    state: &mut SwitchState,
    slot: Slot,
    out: &mut Vec<Disposition>,
) -> Result<(), ModelError> {
    for fdl in 0..state.forward.len() {
        if let Some(packet) = state.forward.take_due(fdl, slot) {
            let d = if state.claims.claim(packet.dest_port as usize) {
                delivered(slot, packet, Source::Aux2Forward)
            } else {
                divert_to_feedback(
                    state,
                    slot,
                    packet,
                    Source::Aux2Forward,
                    DropReason::FeedbackFullFromForward,
                )?
            };
            out.push(d);
        }
    }

    for fdl in 0..state.feedback.len() {
        if let Some(packet) = state.feedback.take_due(fdl, slot) {
            let d = if state.claims.claim(packet.dest_port as usize) {
                delivered(slot, packet, Source::Aux2Feedback)
            } else {
                divert_to_feedback(
                    state,
                    slot,
                    packet,
                    Source::Aux2Feedback,
                    DropReason::RecirculationExhausted,
                )?
            };
            out.push(d);
        }
    }

    for fdl in 0..state.aux1.len() {
        if let Some(packet) = state.aux1.take_due(fdl, slot) {
            let port = packet.dest_port as usize;
            if !state.calendar.release(port, slot) {
                return Err(ModelError::Invariant {
                    slot,
                    detail: alloc::format!("Aux-I packet {} left without a reservation", packet.id),
                });
            }
            let d = if state.claims.claim(port) {
                delivered(slot, packet, Source::Aux1)
            } else {
                divert_to_feedback(
                    state,
                    slot,
                    packet,
                    Source::Aux1,
                    DropReason::FeedbackFullFromAux1,
                )?
            };
            out.push(d);
        }
    }
    Ok(())
}

/// Places `arrivals` in the given order. Must run after [`release_phase`] for
/// the same slot.
pub fn assign_in_order(
    state: &mut SwitchState,
    slot: Slot,
    arrivals: &[Packet],
    out: &mut Vec<Disposition>,
) -> Result<(), ModelError> {
    for &packet in arrivals {
        let port = packet.dest_port as usize;
        let outcome = if state.claims.claim(port) {
            Outcome::Delivered {
                delay: slot - packet.arrival_slot,
            }
        } else if let Some(fdl) = select_aux1_fdl(state, port, slot) {
            let emergence = state.aux1.insert(fdl, slot, packet)?;
            state.calendar.reserve(port, emergence)?;
            Outcome::Buffered {
                bank: BankKind::Aux1,
                fdl,
            }
        } else if let Some(fdl) = select_forward_fdl(state, slot) {
            state.forward.insert(fdl, slot, packet)?;
            Outcome::Buffered {
                bank: BankKind::Aux2Forward,
                fdl,
            }
        } else {
            Outcome::Dropped(DropReason::AssignBlocked)
        };
        out.push(Disposition {
            slot,
            packet,
            source: Source::Arrival,
            outcome,
        });
    }
    Ok(())
}

/// Shuffles the slot's arrivals uniformly with `rng`, then places them.
pub fn assign_phase<R: Rng + ?Sized>(
    state: &mut SwitchState,
    slot: Slot,
    arrivals: &mut [Packet],
    rng: &mut R,
    out: &mut Vec<Disposition>,
) -> Result<(), ModelError> {
    arrivals.shuffle(rng);
    assign_in_order(state, slot, arrivals, out)
}
