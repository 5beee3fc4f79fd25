//! Case-file parsing and serialization.
//!
//! The case format is line-oriented text. Blank lines and `#` comments are
//! ignored. Records:
//!
//! ```text
//! CASE   name base_mva
//! BUS    id area kv kind vset            kind in {PQ, PV, SLACK}
//! BRANCH from to ckt r x b lte ste xfmr  xfmr in {0, 1}; ste <= 0 defaults to 1.2*lte
//! GEN    bus pmin pmax qmin qmax pset machine
//! LOAD   bus p q
//! ```

use thiserror::Error;

use super::{
    Branch, Bus, BusId, BusKind, BusStatus, GenStatus, Generator, InfraStatus, Load, Network,
    OperStatus,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed {record} record: {reason}")]
    Malformed {
        line: usize,
        record: &'static str,
        reason: String,
    },
    #[error("line {line}: unknown record type {token:?}")]
    UnknownRecord { line: usize, token: String },
    #[error("line {line}: duplicate bus id {id}")]
    DuplicateBus { line: usize, id: BusId },
    #[error("line {line}: {record} references unknown bus {id}")]
    DanglingBus {
        line: usize,
        record: &'static str,
        id: BusId,
    },
    #[error("case has no buses")]
    NoBuses,
}

struct FieldCursor<'a> {
    line_no: usize,
    record: &'static str,
    fields: std::str::SplitWhitespace<'a>,
    index: usize,
}

impl<'a> FieldCursor<'a> {
    fn next_str(&mut self) -> Result<&'a str, ParseError> {
        self.index += 1;
        self.fields.next().ok_or_else(|| ParseError::Malformed {
            line: self.line_no,
            record: self.record,
            reason: format!("missing field {}", self.index),
        })
    }

    fn next_num<T: Scalar>(&mut self) -> Result<T, ParseError> {
        let s = self.next_str()?;
        let v: f64 = s.parse().map_err(|_| ParseError::Malformed {
            line: self.line_no,
            record: self.record,
            reason: format!("field {} is not a number: {s:?}", self.index),
        })?;
        Ok(T::of(v))
    }

    fn next_u32(&mut self) -> Result<u32, ParseError> {
        let s = self.next_str()?;
        s.parse().map_err(|_| ParseError::Malformed {
            line: self.line_no,
            record: self.record,
            reason: format!("field {} is not an integer: {s:?}", self.index),
        })
    }
}

/// Parse a case file into a [`Network`]. Foreign keys are resolved and
/// duplicate bus ids rejected; deeper semantic checks live in
/// [`super::validate`].
pub fn parse_case<T: Scalar>(text: &str) -> Result<Network<T>, ParseError> {
    let mut net = Network {
        name: String::new(),
        base_mva: T::of(100.0),
        buses: Vec::new(),
        branches: Vec::new(),
        generators: Vec::new(),
        loads: Vec::new(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().expect("non-empty line");
        let mut cur = |record| FieldCursor {
            line_no,
            record,
            fields: fields.clone(),
            index: 0,
        };
        match tag {
            "CASE" => {
                let mut c = cur("CASE");
                net.name = c.next_str()?.to_string();
                net.base_mva = c.next_num()?;
            }
            "BUS" => {
                let mut c = cur("BUS");
                let id = BusId(c.next_u32()?);
                if net.buses.iter().any(|b| b.id == id) {
                    return Err(ParseError::DuplicateBus { line: line_no, id });
                }
                let area = c.next_u32()?;
                let base_kv = c.next_num()?;
                let kind = match c.next_str()? {
                    "PQ" => BusKind::Pq,
                    "PV" => BusKind::Pv,
                    "SLACK" => BusKind::Slack,
                    other => {
                        return Err(ParseError::Malformed {
                            line: line_no,
                            record: "BUS",
                            reason: format!("unknown bus kind {other:?}"),
                        })
                    }
                };
                let voltage_setpoint = c.next_num()?;
                net.buses.push(Bus {
                    id,
                    area,
                    base_kv,
                    kind,
                    voltage_setpoint,
                    status: BusStatus::Connected,
                });
            }
            "BRANCH" => {
                let mut c = cur("BRANCH");
                let from_bus = BusId(c.next_u32()?);
                let to_bus = BusId(c.next_u32()?);
                let circuit_id = c.next_str()?.to_string();
                let resistance = c.next_num()?;
                let reactance = c.next_num()?;
                let charging = c.next_num()?;
                let rating_lte: T = c.next_num()?;
                let ste_raw: T = c.next_num()?;
                let rating_ste = if ste_raw > T::zero() {
                    ste_raw
                } else {
                    rating_lte * T::of(1.2)
                };
                let is_transformer = c.next_u32()? != 0;
                net.branches.push(Branch {
                    from_bus,
                    to_bus,
                    circuit_id,
                    resistance,
                    reactance,
                    charging,
                    rating_lte,
                    rating_ste,
                    is_transformer,
                    infra_status: InfraStatus::Intact,
                    oper_status: OperStatus::InService,
                });
            }
            "GEN" => {
                let mut c = cur("GEN");
                let bus = BusId(c.next_u32()?);
                let p_min = c.next_num()?;
                let p_max = c.next_num()?;
                let q_min = c.next_num()?;
                let q_max = c.next_num()?;
                let p_set = c.next_num()?;
                let machine_ref = c.next_str()?.to_string();
                net.generators.push(Generator {
                    bus,
                    p_min,
                    p_max,
                    q_min,
                    q_max,
                    p_set,
                    status: GenStatus::Online,
                    machine_ref,
                });
            }
            "LOAD" => {
                let mut c = cur("LOAD");
                let bus = BusId(c.next_u32()?);
                let p_nominal = c.next_num()?;
                let q_nominal = c.next_num()?;
                net.loads.push(Load {
                    bus,
                    p_nominal,
                    q_nominal,
                    served_fraction: T::one(),
                });
            }
            other => {
                return Err(ParseError::UnknownRecord {
                    line: line_no,
                    token: other.to_string(),
                })
            }
        }
    }

    if net.buses.is_empty() {
        return Err(ParseError::NoBuses);
    }

    // resolve foreign keys eagerly so later stages can index without checks
    for (i, br) in net.branches.iter().enumerate() {
        for id in [br.from_bus, br.to_bus] {
            if net.buses.iter().all(|b| b.id != id) {
                return Err(ParseError::DanglingBus {
                    line: branch_line(text, i),
                    record: "BRANCH",
                    id,
                });
            }
        }
    }
    for (i, g) in net.generators.iter().enumerate() {
        if net.buses.iter().all(|b| b.id != g.bus) {
            return Err(ParseError::DanglingBus {
                line: record_line(text, "GEN", i),
                record: "GEN",
                id: g.bus,
            });
        }
    }
    for (i, l) in net.loads.iter().enumerate() {
        if net.buses.iter().all(|b| b.id != l.bus) {
            return Err(ParseError::DanglingBus {
                line: record_line(text, "LOAD", i),
                record: "LOAD",
                id: l.bus,
            });
        }
    }

    Ok(net)
}

fn record_line(text: &str, tag: &str, occurrence: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim().starts_with(tag))
        .nth(occurrence)
        .map(|(i, _)| i + 1)
        .unwrap_or(0)
}

fn branch_line(text: &str, occurrence: usize) -> usize {
    record_line(text, "BRANCH", occurrence)
}

/// Serialize a network back into case-file text. `parse_case` of the output
/// reproduces the network exactly (statuses reset to in-service, as in any
/// freshly parsed case).
pub fn serialize_case<T: Scalar>(net: &Network<T>) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "# gridres case v1");
    let _ = writeln!(out, "CASE {} {}", net.name, net.base_mva);
    for b in &net.buses {
        let kind = match b.kind {
            BusKind::Pq => "PQ",
            BusKind::Pv => "PV",
            BusKind::Slack => "SLACK",
        };
        let _ = writeln!(
            out,
            "BUS {} {} {} {} {}",
            b.id, b.area, b.base_kv, kind, b.voltage_setpoint
        );
    }
    for br in &net.branches {
        let _ = writeln!(
            out,
            "BRANCH {} {} {} {} {} {} {} {} {}",
            br.from_bus,
            br.to_bus,
            br.circuit_id,
            br.resistance,
            br.reactance,
            br.charging,
            br.rating_lte,
            br.rating_ste,
            u8::from(br.is_transformer)
        );
    }
    for g in &net.generators {
        let _ = writeln!(
            out,
            "GEN {} {} {} {} {} {} {}",
            g.bus, g.p_min, g.p_max, g.q_min, g.q_max, g.p_set, g.machine_ref
        );
    }
    for l in &net.loads {
        let _ = writeln!(out, "LOAD {} {} {}", l.bus, l.p_nominal, l.q_nominal);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# toy case
CASE toy 100
BUS 1 1 230 SLACK 1.02
BUS 2 1 230 PQ 1.0
BRANCH 1 2 1 0.01 0.1 0.02 100 120 0
GEN 1 0 200 -50 100 50 U1
LOAD 2 40 10
";

    #[test]
    fn parses_small_case() {
        let net: Network<f64> = parse_case(SMALL).unwrap();
        assert_eq!(net.name, "toy");
        assert_eq!(net.buses.len(), 2);
        assert_eq!(net.branches.len(), 1);
        assert_eq!(net.generators.len(), 1);
        assert_eq!(net.loads.len(), 1);
        assert_eq!(net.buses[0].kind, BusKind::Slack);
        assert_eq!(net.branches[0].rating_ste, 120.0);
    }

    #[test]
    fn ste_defaults_to_1_2x_lte() {
        let text = SMALL.replace("100 120 0", "100 0 0");
        let net: Network<f64> = parse_case(&text).unwrap();
        assert!((net.branches[0].rating_ste - 120.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_bus_list() {
        let err = parse_case::<f64>("CASE empty 100\n").unwrap_err();
        assert_eq!(err, ParseError::NoBuses);
    }

    #[test]
    fn rejects_duplicate_bus() {
        let text = SMALL.replace("BUS 2 1 230 PQ 1.0", "BUS 1 1 230 PQ 1.0");
        let err = parse_case::<f64>(&text).unwrap_err();
        assert!(matches!(err, ParseError::DuplicateBus { id: BusId(1), .. }));
    }

    #[test]
    fn rejects_dangling_reference() {
        let text = SMALL.replace("LOAD 2 40 10", "LOAD 9 40 10");
        let err = parse_case::<f64>(&text).unwrap_err();
        assert!(matches!(
            err,
            ParseError::DanglingBus {
                record: "LOAD",
                id: BusId(9),
                ..
            }
        ));
    }

    #[test]
    fn reports_malformed_line_and_field() {
        let text = SMALL.replace("LOAD 2 40 10", "LOAD 2 forty 10");
        let err = parse_case::<f64>(&text).unwrap_err();
        match err {
            ParseError::Malformed { line, record, .. } => {
                assert_eq!(record, "LOAD");
                assert_eq!(line, 8);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_identity() {
        let net: Network<f64> = parse_case(SMALL).unwrap();
        let text = serialize_case(&net);
        let reparsed: Network<f64> = parse_case(&text).unwrap();
        assert_eq!(serialize_case(&reparsed), text);
        assert_eq!(reparsed.buses.len(), net.buses.len());
        assert_eq!(reparsed.branches[0].reactance, net.branches[0].reactance);
    }
}
