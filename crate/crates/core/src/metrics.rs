//! Loss and delay accounting.

use alloc::vec::Vec;

use thiserror::Error;

use crate::scheduler::{Disposition, DropReason, Outcome};
use crate::Slot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty set of runs")]
    Empty,
    #[error("runs used different traffic traces ({with:#018x} vs {without:#018x})")]
    TraceMismatch { with: u64, without: u64 },
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a fingerprint of an arrival stream, used to prove that two runs saw
/// the same traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceId(u64);

impl Default for TraceId {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl TraceId {
    pub fn value(self) -> u64 {
        self.0
    }

    fn feed(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn record(&mut self, slot: Slot, input_port: u32, dest_port: u32) {
        self.feed(slot);
        self.feed(((input_port as u64) << 32) | dest_port as u64);
    }

    /// Marks the end of the arrival horizon so equal prefixes of different
    /// lengths do not collide.
    pub fn finish(&mut self, total_slots: Slot) {
        self.feed(u64::MAX);
        self.feed(total_slots);
    }

    fn combine(&mut self, other: TraceId) {
        self.feed(other.0);
    }
}

/// Counters for one run (or a merge of runs).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunMetrics {
    pub offered: u64,
    pub delivered: u64,
    pub dropped: [u64; DropReason::ALL.len()],
    pub delay_sum: u64,
    /// `delay_histogram[d]` = packets delivered with delay `d`.
    pub delay_histogram: Vec<u64>,
    pub trace_id: TraceId,
}

impl RunMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_offered(&mut self) {
        self.offered += 1;
    }

    /// Counts a delivery or drop; intermediate dispositions are ignored.
    pub fn record(&mut self, d: &Disposition) {
        match d.outcome {
            Outcome::Delivered { delay } => {
                self.delivered += 1;
                self.delay_sum += delay;
                let idx = delay as usize;
                if idx >= self.delay_histogram.len() {
                    self.delay_histogram.resize(idx + 1, 0);
                }
                self.delay_histogram[idx] += 1;
            }
            Outcome::Dropped(reason) => self.dropped[reason.index()] += 1,
            Outcome::Buffered { .. } | Outcome::Recirculated { .. } => {}
        }
    }

    pub fn total_dropped(&self) -> u64 {
        self.dropped.iter().sum()
    }

    pub fn dropped_by(&self, reason: DropReason) -> u64 {
        self.dropped[reason.index()]
    }

    /// True when nothing was offered; [`plr`](Self::plr) and
    /// [`avg_delay`](Self::avg_delay) then report 0 by convention.
    pub fn is_degenerate(&self) -> bool {
        self.offered == 0
    }

    /// Dropped / offered, 0 when nothing was offered.
    pub fn plr(&self) -> f64 {
        if self.offered == 0 {
            0.0
        } else {
            self.total_dropped() as f64 / self.offered as f64
        }
    }

    /// Mean arrival-to-delivery delay over delivered packets, direct
    /// deliveries included. 0 when nothing was delivered.
    pub fn avg_delay(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.delay_sum as f64 / self.delivered as f64
        }
    }

    /// Non-empty histogram buckets as (delay, count).
    pub fn histogram(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.delay_histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(d, &c)| (d as u64, c))
    }

    /// Adds another run's counters into this one.
    pub fn merge(&mut self, other: &RunMetrics) {
        self.offered += other.offered;
        self.delivered += other.delivered;
        for (a, b) in self.dropped.iter_mut().zip(other.dropped) {
            *a += b;
        }
        self.delay_sum += other.delay_sum;
        if other.delay_histogram.len() > self.delay_histogram.len() {
            self.delay_histogram.resize(other.delay_histogram.len(), 0);
        }
        for (a, b) in self.delay_histogram.iter_mut().zip(&other.delay_histogram) {
            *a += b;
        }
        self.trace_id.combine(other.trace_id);
    }
}

/// Percentage of loss removed by Aux Switch-II, comparing two runs over the
/// same arrival trace. 0 when the run without it lost nothing.
pub fn loss_reduction(
    with_aux2: &RunMetrics,
    without_aux2: &RunMetrics,
) -> Result<f64, MetricsError> {
    if with_aux2.trace_id != without_aux2.trace_id {
        return Err(MetricsError::TraceMismatch {
            with: with_aux2.trace_id.value(),
            without: without_aux2.trace_id.value(),
        });
    }
    let base = without_aux2.plr();
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * (base - with_aux2.plr()) / base)
}

/// Across-seed statistics. Standard deviations are sample (n − 1) deviations,
/// 0 for a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub plr_mean: f64,
    pub plr_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            libm::sqrt(self.m2 / (self.n - 1) as f64)
        }
    }
}

pub fn aggregate(runs: &[RunMetrics]) -> Result<Summary, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut plr = Welford::default();
    let mut delay = Welford::default();
    for r in runs {
        plr.push(r.plr());
        delay.push(r.avg_delay());
    }
    Ok(Summary {
        runs: runs.len(),
        plr_mean: plr.mean,
        plr_std: plr.std(),
        delay_mean: delay.mean,
        delay_std: delay.std(),
    })
}
