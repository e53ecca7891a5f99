//! Traffic trace files.
//!
//! A trace records every arrival of a run so the same traffic can be replayed
//! against different switch configurations (e.g. with and without Aux-II).
//!
//! ```text
//! # fdlswitch-trace v1
//! # n_ports=32 slots=1000 rho=0.6 seed=7
//! 0 3 17
//! 0 9 2
//! 1 0 30
//! ```
//!
//! Lines starting with `#` are headers or comments; the `key=value` header
//! line must give `n_ports` and `slots` (`rho` and `seed` are optional and
//! default to 0). Every other line is `slot input_port dest_port`. Slots are
//! nondecreasing, input ports strictly increase within a slot, and every
//! slot is below `slots`.

use std::io::{BufRead, Write};

use fdlswitch_core::{ArrivalSource, Packet, Slot, TrafficConfig, TrafficGenerator};
use thiserror::Error;

pub const TRACE_MAGIC: &str = "# fdlswitch-trace v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace header is missing `{0}`")]
    MissingHeader(&'static str),
    #[error(transparent)]
    Traffic(#[from] fdlswitch_core::TrafficError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub slot: Slot,
    pub input_port: u32,
    pub dest_port: u32,
}

/// An in-memory arrival trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n_ports: usize,
    pub slots: Slot,
    pub rho: f64,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Captures `slots` slots of a seeded generator.
    pub fn generate(config: TrafficConfig, slots: Slot) -> Result<Self, TraceError> {
        let mut gen = TrafficGenerator::new(config)?;
        let mut buf = Vec::new();
        let mut records = Vec::new();
        for slot in 0..slots {
            buf.clear();
            gen.arrivals(slot, &mut buf);
            records.extend(buf.iter().map(|p| TraceRecord {
                slot,
                input_port: p.input_port,
                dest_port: p.dest_port,
            }));
        }
        Ok(Self {
            n_ports: config.n_ports,
            slots,
            rho: config.rho,
            seed: config.seed,
            records,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_MAGIC}")?;
        writeln!(
            w,
            "# n_ports={} slots={} rho={} seed={}",
            self.n_ports, self.slots, self.rho, self.seed
        )?;
        for r in &self.records {
            writeln!(w, "{} {} {}", r.slot, r.input_port, r.dest_port)?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut n_ports = None;
        let mut slots = None;
        let mut rho = 0.0;
        let mut seed = 0;
        let mut records = Vec::new();
        let mut last: Option<(Slot, u32)> = None;

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let err = |message: String| TraceError::Parse {
                line: line_no,
                message,
            };
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(header) = text.strip_prefix('#') {
                for pair in header.split_whitespace() {
                    let Some((k, v)) = pair.split_once('=') else {
                        continue;
                    };
                    let bad = || err(format!("bad header value `{pair}`"));
                    match k {
                        "n_ports" => n_ports = Some(v.parse::<usize>().map_err(|_| bad())?),
                        "slots" => slots = Some(v.parse::<Slot>().map_err(|_| bad())?),
                        "rho" => rho = v.parse().map_err(|_| bad())?,
                        "seed" => seed = v.parse().map_err(|_| bad())?,
                        _ => {}
                    }
                }
                continue;
            }
            let n = n_ports.ok_or(TraceError::MissingHeader("n_ports"))?;
            let horizon = slots.ok_or(TraceError::MissingHeader("slots"))?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "expected `slot input_port dest_port`, got `{text}`"
                )));
            }
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| err(format!("`{s}` is not a number")))
            };
            let (slot, input, dest) = (num(fields[0])?, num(fields[1])?, num(fields[2])?);
            if slot >= horizon {
                return Err(err(format!(
                    "slot {slot} is beyond the {horizon}-slot horizon"
                )));
            }
            if input >= n as u64 || dest >= n as u64 {
                return Err(err(format!("port out of range for {n} ports")));
            }
            let (input, dest) = (input as u32, dest as u32);
            if let Some((ls, li)) = last {
                if slot < ls || (slot == ls && input <= li) {
                    return Err(err(
                        "records must be ordered by slot, then input port".into()
                    ));
                }
            }
            last = Some((slot, input));
            records.push(TraceRecord {
                slot,
                input_port: input,
                dest_port: dest,
            });
        }
        Ok(Self {
            n_ports: n_ports.ok_or(TraceError::MissingHeader("n_ports"))?,
            slots: slots.ok_or(TraceError::MissingHeader("slots"))?,
            rho,
            seed,
            records,
        })
    }

    pub fn replay(&self) -> TraceReplay<'_> {
        TraceReplay {
            trace: self,
            cursor: 0,
            next_id: 0,
        }
    }
}

/// Feeds a [`Trace`] to the engine. Packet ids are assigned in record order.
pub struct TraceReplay<'a> {
    trace: &'a Trace,
    cursor: usize,
    next_id: u64,
}

impl ArrivalSource for TraceReplay<'_> {
    fn n_ports(&self) -> usize {
        self.trace.n_ports
    }

    fn arrivals(&mut self, slot: Slot, out: &mut Vec<Packet>) {
        let records = &self.trace.records;
        while self.cursor < records.len() && records[self.cursor].slot < slot {
            self.cursor += 1;
        }
        while self.cursor < records.len() && records[self.cursor].slot == slot {
            let r = records[self.cursor];
            out.push(Packet::new(self.next_id, slot, r.input_port, r.dest_port));
            self.next_id += 1;
            self.cursor += 1;
        }
    }
}
