//! Semantic validation of a parsed network. Violations are data, not
//! failures: the validator always returns a report.

use super::{BusKind, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// What the violation is about, e.g. `branch 101-102 ckt 1`.
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.subject, v.message)?;
        }
        Ok(())
    }
}

pub fn validate<T: Scalar>(net: &Network<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |subject: String, message: String| {
        report.violations.push(Violation { subject, message });
    };

    for bus in &net.buses {
        if !(bus.base_kv > T::zero()) {
            push(format!("bus {}", bus.id), "base voltage must be > 0".into());
        }
    }
    if net.base_mva <= T::zero() {
        push("case".into(), "base MVA must be > 0".into());
    }

    let slack_count = net
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Slack)
        .count();
    if slack_count != 1 {
        push(
            "case".into(),
            format!("expected exactly one slack bus, found {slack_count}"),
        );
    }

    for br in &net.branches {
        let subject = format!("branch {}-{} ckt {}", br.from_bus, br.to_bus, br.circuit_id);
        if br.reactance == T::zero() {
            push(subject.clone(), "zero reactance".into());
        }
        if !(br.rating_lte > T::zero()) {
            push(subject.clone(), "LTE rating must be > 0".into());
        }
        if br.rating_ste < br.rating_lte {
            push(subject.clone(), "STE rating below LTE rating".into());
        }
        for id in [br.from_bus, br.to_bus] {
            if net.bus(id).is_none() {
                push(subject.clone(), format!("dangling reference to bus {id}"));
            }
        }
    }

    for (i, g) in net.generators.iter().enumerate() {
        let subject = format!("gen {i} at bus {}", g.bus);
        if net.bus(g.bus).is_none() {
            push(subject.clone(), "dangling reference".into());
        }
        if g.p_min > g.p_max {
            push(subject.clone(), "p_min above p_max".into());
        }
        if g.q_min > g.q_max {
            push(subject.clone(), "q_min above q_max".into());
        }
        if g.p_set < g.p_min || g.p_set > g.p_max {
            push(subject.clone(), "p_set outside [p_min, p_max]".into());
        }
        if g.machine_ref.is_empty() {
            push(subject, "empty machine reference".into());
        }
    }

    for (i, l) in net.loads.iter().enumerate() {
        let subject = format!("load {i} at bus {}", l.bus);
        if net.bus(l.bus).is_none() {
            push(subject.clone(), "dangling reference".into());
        }
        if l.served_fraction < T::zero() || l.served_fraction > T::one() {
            push(subject, "served fraction outside [0, 1]".into());
        }
    }

    report
}
