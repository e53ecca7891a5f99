//! Switch state: packets, FDL pipelines, the per-slot output-port claims and
//! the Aux-I reservation calendar.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::delay::{build_profile, DelayProfile};
use crate::Slot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid switch configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("FDL delays must be at least one slot")]
    ZeroDelay,
    #[error("FDL {fdl} already holds a packet emerging at slot {emergence}")]
    OccupiedEntry { fdl: usize, emergence: Slot },
    #[error("FDL {fdl} still holds a packet due at slot {due}, which was never released")]
    StaleEntry { fdl: usize, due: Slot },
    #[error("output port {port} is already reserved for slot {slot}")]
    ReservationConflict { port: usize, slot: Slot },
    #[error("invariant violated at slot {slot}: {detail}")]
    Invariant { slot: Slot, detail: String },
}

/// Port counts and scheduling limits of one switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchConfig {
    /// Input ports, equal to output ports (`N`).
    pub n_ports: usize,
    /// FDLs in Aux Switch-I (`m`).
    pub m_aux1: usize,
    /// Feed-forward FDLs in Aux Switch-II; the feedback bank has as many (`K`).
    pub k_aux2: usize,
    /// Cap on feedback traversals per packet.
    pub max_circulations: u32,
    /// When false the switch runs without Aux Switch-II.
    pub aux2_enabled: bool,
    /// Explicit Aux-I delays replacing the generated profile. Its length must equal `m_aux1`.
    pub aux1_delays: Option<Vec<u32>>,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            n_ports: 32,
            m_aux1: 32,
            k_aux2: 2,
            max_circulations: 5,
            aux2_enabled: true,
            aux1_delays: None,
        }
    }
}

impl SwitchConfig {
    pub fn with_aux1(n_ports: usize, m_aux1: usize) -> Self {
        Self {
            n_ports,
            m_aux1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_ports == 0 {
            return Err(ModelError::InvalidConfig("n_ports must be at least 1"));
        }
        if self.n_ports > u32::MAX as usize {
            return Err(ModelError::InvalidConfig("n_ports does not fit in 32 bits"));
        }
        if self.k_aux2 == 0 {
            return Err(ModelError::InvalidConfig("k_aux2 must be at least 1"));
        }
        if self.max_circulations == 0 {
            return Err(ModelError::InvalidConfig(
                "max_circulations must be at least 1",
            ));
        }
        if let Some(delays) = &self.aux1_delays {
            if delays.len() != self.m_aux1 {
                return Err(ModelError::InvalidConfig(
                    "aux1_delays length must equal m_aux1",
                ));
            }
            if delays.contains(&0) {
                return Err(ModelError::ZeroDelay);
            }
        }
        Ok(())
    }

    pub fn aux1_profile(&self) -> Result<DelayProfile, ModelError> {
        match &self.aux1_delays {
            Some(delays) => DelayProfile::from_delays(delays.clone()),
            None => Ok(build_profile(self.m_aux1)),
        }
    }

    pub fn aux2_profile(&self) -> DelayProfile {
        build_profile(self.k_aux2)
    }
}

/// One fixed-length optical cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub id: u64,
    pub arrival_slot: Slot,
    pub input_port: u32,
    pub dest_port: u32,
    /// Feedback-FDL traversals begun so far.
    pub circulations: u32,
}

impl Packet {
    pub fn new(id: u64, arrival_slot: Slot, input_port: u32, dest_port: u32) -> Self {
        Self {
            id,
            arrival_slot,
            input_port,
            dest_port,
            circulations: 0,
        }
    }
}

/// A fixed-delay FDL. It admits one packet per slot at its input and holds up
/// to `delay` packets in flight, keyed by emergence slot.
///
/// In-flight emergence slots always lie in `[now, now + delay]`, so a ring of
/// `delay + 1` cells indexed by `emergence % (delay + 1)` never aliases.
#[derive(Debug, Clone)]
pub struct FdlPipeline {
    delay: u32,
    cells: Vec<Option<(Slot, Packet)>>,
    len: usize,
}

impl FdlPipeline {
    pub fn new(delay: u32) -> Self {
        assert!(delay >= 1, "FDL delay must be at least one slot");
        Self {
            delay,
            cells: alloc::vec![None; delay as usize + 1],
            len: 0,
        }
    }

    pub fn delay(&self) -> u32 {
        self.delay
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn cell(&self, emergence: Slot) -> usize {
        (emergence % (self.delay as u64 + 1)) as usize
    }

    /// True iff no packet entering at `slot` is already scheduled, i.e. no
    /// packet emerges at `slot + delay`.
    #[inline]
    pub fn entry_free(&self, slot: Slot) -> bool {
        let emergence = slot + self.delay as u64;
        !matches!(self.cells[self.cell(emergence)], Some((e, _)) if e == emergence)
    }

    /// Stores `packet` entering at `slot`; returns its emergence slot.
    pub fn insert(&mut self, slot: Slot, packet: Packet) -> Result<Slot, ModelError> {
        let emergence = slot + self.delay as u64;
        let idx = self.cell(emergence);
        match self.cells[idx] {
            Some((e, _)) if e == emergence => Err(ModelError::OccupiedEntry { fdl: 0, emergence }),
            Some((due, _)) => Err(ModelError::StaleEntry { fdl: 0, due }),
            None => {
                self.cells[idx] = Some((emergence, packet));
                self.len += 1;
                Ok(emergence)
            }
        }
    }

    /// Removes and returns the packet emerging at `slot`, if any.
    #[inline]
    pub fn take_due(&mut self, slot: Slot) -> Option<Packet> {
        let idx = self.cell(slot);
        match self.cells[idx] {
            Some((e, p)) if e == slot => {
                self.cells[idx] = None;
                self.len -= 1;
                Some(p)
            }
            _ => None,
        }
    }

    /// In-flight packets with their emergence slots, in no particular order.
    pub fn in_flight(&self) -> impl Iterator<Item = (Slot, &Packet)> {
        self.cells.iter().flatten().map(|(e, p)| (*e, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BankKind {
    Aux1,
    Aux2Forward,
    Aux2Feedback,
}

impl BankKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BankKind::Aux1 => "aux1",
            BankKind::Aux2Forward => "aux2_forward",
            BankKind::Aux2Feedback => "aux2_feedback",
        }
    }
}

/// An indexed set of FDLs sharing one auxiliary switch.
#[derive(Debug, Clone)]
pub struct FdlBank {
    kind: BankKind,
    pipelines: Vec<FdlPipeline>,
    /// Pipeline indices ordered by (delay, index).
    by_delay: Vec<usize>,
}

impl FdlBank {
    pub fn new(kind: BankKind, profile: &DelayProfile) -> Self {
        let pipelines: Vec<FdlPipeline> = profile
            .delays()
            .iter()
            .map(|&d| FdlPipeline::new(d))
            .collect();
        let mut by_delay: Vec<usize> = (0..pipelines.len()).collect();
        by_delay.sort_by_key(|&i| (pipelines[i].delay(), i));
        Self {
            kind,
            pipelines,
            by_delay,
        }
    }

    pub fn kind(&self) -> BankKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pipelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipelines.is_empty()
    }

    pub fn pipelines(&self) -> &[FdlPipeline] {
        &self.pipelines
    }

    pub fn delay(&self, fdl: usize) -> u32 {
        self.pipelines[fdl].delay()
    }

    /// Indices ordered by ascending delay, ties by index.
    pub fn by_delay(&self) -> &[usize] {
        &self.by_delay
    }

    /// Panics if `fdl` is out of range.
    pub fn entry_free(&self, fdl: usize, slot: Slot) -> bool {
        self.pipelines[fdl].entry_free(slot)
    }

    pub fn insert(&mut self, fdl: usize, slot: Slot, packet: Packet) -> Result<Slot, ModelError> {
        self.pipelines[fdl]
            .insert(slot, packet)
            .map_err(|e| match e {
                ModelError::OccupiedEntry { emergence, .. } => {
                    ModelError::OccupiedEntry { fdl, emergence }
                }
                ModelError::StaleEntry { due, .. } => ModelError::StaleEntry { fdl, due },
                other => other,
            })
    }

    /// Removes the packet leaving FDL `fdl` at `slot`, if any.
    #[inline]
    pub fn take_due(&mut self, fdl: usize, slot: Slot) -> Option<Packet> {
        self.pipelines[fdl].take_due(slot)
    }

    /// The free-entry FDL of minimum delay (lowest index on ties).
    pub fn min_delay_free(&self, slot: Slot) -> Option<usize> {
        self.by_delay
            .iter()
            .copied()
            .find(|&i| self.pipelines[i].entry_free(slot))
    }

    /// Appends every packet emerging at `slot` to `out`, ascending FDL index,
    /// and removes them from the bank.
    pub fn emergences(&mut self, slot: Slot, out: &mut Vec<(usize, Packet)>) {
        for (i, pipeline) in self.pipelines.iter_mut().enumerate() {
            if let Some(p) = pipeline.take_due(slot) {
                out.push((i, p));
            }
        }
    }

    pub fn in_flight(&self) -> usize {
        self.pipelines.iter().map(FdlPipeline::len).sum()
    }

    pub fn max_delay(&self) -> u32 {
        self.pipelines
            .iter()
            .map(FdlPipeline::delay)
            .max()
            .unwrap_or(0)
    }
}

/// Future (output port, slot) claims held by packets inside Aux Switch-I.
/// At most one reservation exists per pair.
#[derive(Debug, Clone)]
pub struct ReservationCalendar {
    window: u64,
    /// `n_ports * window` cells, `Slot::MAX` when vacant.
    cells: Vec<Slot>,
    len: usize,
}

const VACANT: Slot = Slot::MAX;

impl ReservationCalendar {
    /// A calendar able to hold reservations up to `max_delay` slots ahead.
    pub fn new(n_ports: usize, max_delay: u32) -> Self {
        let window = if max_delay == 0 {
            0
        } else {
            max_delay as u64 + 1
        };
        Self {
            window,
            cells: alloc::vec![VACANT; n_ports * window as usize],
            len: 0,
        }
    }

    #[inline]
    fn cell(&self, port: usize, slot: Slot) -> usize {
        port * self.window as usize + (slot % self.window) as usize
    }

    #[inline]
    pub fn is_reserved(&self, port: usize, slot: Slot) -> bool {
        self.window != 0 && self.cells[self.cell(port, slot)] == slot
    }

    pub fn reserve(&mut self, port: usize, slot: Slot) -> Result<(), ModelError> {
        if self.window == 0 {
            return Err(ModelError::InvalidConfig("calendar has no window"));
        }
        let idx = self.cell(port, slot);
        if self.cells[idx] != VACANT {
            return Err(ModelError::ReservationConflict { port, slot });
        }
        self.cells[idx] = slot;
        self.len += 1;
        Ok(())
    }

    /// Removes the reservation; returns whether it existed.
    pub fn release(&mut self, port: usize, slot: Slot) -> bool {
        if !self.is_reserved(port, slot) {
            return false;
        }
        let idx = self.cell(port, slot);
        self.cells[idx] = VACANT;
        self.len -= 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All reservations as (port, slot).
    pub fn iter(&self) -> impl Iterator<Item = (usize, Slot)> + '_ {
        let window = self.window.max(1) as usize;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != VACANT)
            .map(move |(i, &s)| (i / window, s))
    }
}

/// Output ports already delivering a packet in the current slot.
#[derive(Debug, Clone)]
pub struct PortClaims {
    slot: Slot,
    claimed_at: Vec<Slot>,
}

impl PortClaims {
    pub fn new(n_ports: usize) -> Self {
        Self {
            slot: 0,
            claimed_at: alloc::vec![VACANT; n_ports],
        }
    }

    /// Starts a new slot with no ports claimed.
    pub fn clear(&mut self, slot: Slot) {
        debug_assert!(slot != VACANT);
        if slot <= self.slot {
            self.claimed_at.iter_mut().for_each(|c| *c = VACANT);
        }
        self.slot = slot;
    }

    #[inline]
    pub fn is_claimed(&self, port: usize) -> bool {
        self.claimed_at[port] == self.slot
    }

    /// Claims `port`; false if it was already claimed this slot.
    #[inline]
    pub fn claim(&mut self, port: usize) -> bool {
        if self.is_claimed(port) {
            return false;
        }
        self.claimed_at[port] = self.slot;
        true
    }

    pub fn count(&self) -> usize {
        self.claimed_at.iter().filter(|&&c| c == self.slot).count()
    }
}

/// Complete mutable state of one switch.
#[derive(Debug, Clone)]
pub struct SwitchState {
    pub config: SwitchConfig,
    pub aux1: FdlBank,
    pub forward: FdlBank,
    pub feedback: FdlBank,
    pub calendar: ReservationCalendar,
    pub claims: PortClaims,
}

impl SwitchState {
    pub fn new(config: SwitchConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let aux1 = FdlBank::new(BankKind::Aux1, &config.aux1_profile()?);
        let aux2 = config.aux2_profile();
        let forward = FdlBank::new(BankKind::Aux2Forward, &aux2);
        let feedback = FdlBank::new(BankKind::Aux2Feedback, &aux2);
        let calendar = ReservationCalendar::new(config.n_ports, aux1.max_delay());
        let claims = PortClaims::new(config.n_ports);
        Ok(Self {
            config,
            aux1,
            forward,
            feedback,
            calendar,
            claims,
        })
    }

    pub fn bank(&self, kind: BankKind) -> &FdlBank {
        match kind {
            BankKind::Aux1 => &self.aux1,
            BankKind::Aux2Forward => &self.forward,
            BankKind::Aux2Feedback => &self.feedback,
        }
    }

    /// Packets currently inside any FDL.
    pub fn in_flight(&self) -> usize {
        self.aux1.in_flight() + self.forward.in_flight() + self.feedback.in_flight()
    }

    /// Checks pipeline capacity, emergence ordering, circulation cap and
    /// calendar soundness. `slot` is the slot whose processing just finished.
    pub fn check_invariants(&self, slot: Slot) -> Result<(), ModelError> {
        let fail = |detail: String| Err(ModelError::Invariant { slot, detail });
        let max_circ = self.config.max_circulations;
        for bank in [&self.aux1, &self.forward, &self.feedback] {
            for (i, pipeline) in bank.pipelines().iter().enumerate() {
                if pipeline.len() > pipeline.delay() as usize {
                    return fail(format!(
                        "{} FDL {i} holds {} packets with delay {}",
                        bank.kind().as_str(),
                        pipeline.len(),
                        pipeline.delay()
                    ));
                }
                for (emergence, packet) in pipeline.in_flight() {
                    if emergence <= slot {
                        return fail(format!(
                            "packet {} in {} FDL {i} was due at slot {emergence}",
                            packet.id,
                            bank.kind().as_str()
                        ));
                    }
                    if packet.circulations > max_circ {
                        return fail(format!(
                            "packet {} has {} circulations",
                            packet.id, packet.circulations
                        ));
                    }
                    if bank.kind() == BankKind::Aux1
                        && !self
                            .calendar
                            .is_reserved(packet.dest_port as usize, emergence)
                    {
                        return fail(format!(
                            "Aux-I packet {} lacks a reservation for ({}, {emergence})",
                            packet.id, packet.dest_port
                        ));
                    }
                }
            }
        }
        if self.calendar.len() != self.aux1.in_flight() {
            return fail(format!(
                "{} reservations for {} Aux-I packets",
                self.calendar.len(),
                self.aux1.in_flight()
            ));
        }
        Ok(())
    }
}
