//! Line-oriented event log: one line per disposition.
//!
//! ```text
//! 12 345 arrival delivered in=4 port=3 arrival=12 circ=0 delay=0
//! 12 346 arrival buffered in=9 port=3 arrival=12 circ=0 bank=aux1 fdl=0
//! 13 346 aux1 delivered in=9 port=3 arrival=12 circ=0 delay=1
//! 15 400 aux2_feedback recirculated in=1 port=5 arrival=9 circ=3 fdl=1
//! 15 401 arrival dropped in=0 port=2 arrival=15 circ=0 reason=assign_blocked
//! ```
//!
//! Fields: slot, packet id, source (`arrival`, `aux1`, `aux2_forward`,
//! `aux2_feedback`), outcome, then `key=value` details. `circ` is the
//! circulation count after the decision.

use std::io::Write;

use fdlswitch_core::{BankKind, Disposition, DropReason, Outcome, Packet, Source};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event log: {0}")]
pub struct EventParseError(String);

pub fn format_event(d: &Disposition) -> String {
    let (kind, detail) = match d.outcome {
        Outcome::Delivered { delay } => ("delivered", format!("delay={delay}")),
        Outcome::Buffered { bank, fdl } => {
            ("buffered", format!("bank={} fdl={fdl}", bank.as_str()))
        }
        Outcome::Recirculated { fdl } => ("recirculated", format!("fdl={fdl}")),
        Outcome::Dropped(reason) => ("dropped", format!("reason={}", reason.as_str())),
    };
    let p = &d.packet;
    format!(
        "{} {} {} {kind} in={} port={} arrival={} circ={} {detail}",
        d.slot,
        p.id,
        d.source.as_str(),
        p.input_port,
        p.dest_port,
        p.arrival_slot,
        p.circulations
    )
}

pub fn write_event_log<W: Write>(mut w: W, events: &[Disposition]) -> std::io::Result<()> {
    for d in events {
        writeln!(w, "{}", format_event(d))?;
    }
    w.flush()
}

fn parse_source(s: &str) -> Option<Source> {
    [
        Source::Arrival,
        Source::Aux1,
        Source::Aux2Forward,
        Source::Aux2Feedback,
    ]
    .into_iter()
    .find(|x| x.as_str() == s)
}

fn parse_bank(s: &str) -> Option<BankKind> {
    [
        BankKind::Aux1,
        BankKind::Aux2Forward,
        BankKind::Aux2Feedback,
    ]
    .into_iter()
    .find(|x| x.as_str() == s)
}

pub fn parse_event(line: &str) -> Result<Disposition, EventParseError> {
    let err = |what: &str| EventParseError(format!("{what} in `{line}`"));
    let mut fields = line.split_whitespace();
    let mut next = |what: &str| fields.next().ok_or_else(|| err(what));
    let slot = next("missing slot")?.parse().map_err(|_| err("bad slot"))?;
    let id = next("missing id")?.parse().map_err(|_| err("bad id"))?;
    let source = parse_source(next("missing source")?).ok_or_else(|| err("bad source"))?;
    let kind = next("missing outcome")?;

    let mut get = |key: &str| -> Result<&str, EventParseError> {
        let field = fields.next().ok_or_else(|| err("missing detail"))?;
        field
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .ok_or_else(|| err(&format!("expected `{key}=`")))
    };
    let num = |v: &str| v.parse::<u64>().map_err(|_| err("bad number"));
    let input_port = num(get("in")?)? as u32;
    let dest_port = num(get("port")?)? as u32;
    let arrival_slot = num(get("arrival")?)?;
    let circulations = num(get("circ")?)? as u32;
    let outcome = match kind {
        "delivered" => Outcome::Delivered {
            delay: num(get("delay")?)?,
        },
        "buffered" => {
            let bank = parse_bank(get("bank")?).ok_or_else(|| err("bad bank"))?;
            Outcome::Buffered {
                bank,
                fdl: num(get("fdl")?)? as usize,
            }
        }
        "recirculated" => Outcome::Recirculated {
            fdl: num(get("fdl")?)? as usize,
        },
        "dropped" => Outcome::Dropped(
            DropReason::parse(get("reason")?).ok_or_else(|| err("bad drop reason"))?,
        ),
        _ => return Err(err("bad outcome")),
    };
    if fields.next().is_some() {
        return Err(err("trailing fields"));
    }
    Ok(Disposition {
        slot,
        packet: Packet {
            id,
            arrival_slot,
            input_port,
            dest_port,
            circulations,
        },
        source,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdlswitch_core::{run, RunPlan, SwitchConfig};

    #[test]
    fn run_log_reads_back() {
        let mut plan = RunPlan::new(SwitchConfig::with_aux1(8, 4), 0.9, 3).with_horizon(300, 0);
        plan.record_event_log = true;
        let log = run(&plan).unwrap().event_log.unwrap();
        let mut buf = Vec::new();
        write_event_log(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<_> = text.lines().map(|l| parse_event(l).unwrap()).collect();
        assert_eq!(parsed, log);
        // the run is busy enough to exercise every outcome kind
        for kind in ["delivered", "buffered", "recirculated", "dropped"] {
            assert!(text.contains(kind), "{kind} missing");
        }
    }

    #[test]
    fn example_line() {
        let d = parse_event("13 346 aux1 delivered in=9 port=3 arrival=12 circ=0 delay=1").unwrap();
        assert_eq!(d.slot, 13);
        assert_eq!(d.source, Source::Aux1);
        assert_eq!(d.outcome, Outcome::Delivered { delay: 1 });
        assert_eq!(
            format_event(&d),
            "13 346 aux1 delivered in=9 port=3 arrival=12 circ=0 delay=1"
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_event("").is_err());
        assert!(parse_event("1 2 arrival vanished in=0 port=0 arrival=1 circ=0").is_err());
        assert!(parse_event("1 2 arrival delivered port=0 in=0 arrival=1 circ=0 delay=0").is_err());
        assert!(
            parse_event("1 2 arrival delivered in=0 port=0 arrival=1 circ=0 delay=0 x").is_err()
        );
    }
}
