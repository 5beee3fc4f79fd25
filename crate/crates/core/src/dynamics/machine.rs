//! Machine, exciter, and governor surrogate parameters.
//!
//! The machine model is a two-axis round-rotor synchronous machine with a
//! first-order excitation system (gain, time constant, field limits) and a
//! first-order droop governor (droop, time constant, gate limits). Parameters
//! live on the machine MVA base in the CSV and are converted to the system
//! base once per study.

use num_complex::Complex;
use thiserror::Error;

use crate::model::Network;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ExciterParams<T> {
    pub ka: T,
    pub ta_s: T,
    pub efd_min: T,
    pub efd_max: T,
}

#[derive(Debug, Clone)]
pub struct GovernorParams<T> {
    /// Speed droop, pu frequency per pu power on the machine base.
    pub droop: T,
    pub tg_s: T,
    /// Gate limits, pu of the machine base.
    pub gate_min: T,
    pub gate_max: T,
}

/// Raw per-class parameters on the machine base.
#[derive(Debug, Clone)]
pub struct MachineParams<T> {
    pub machine_ref: String,
    pub mbase_mva: T,
    /// Inertia constant, seconds on the machine base.
    pub h_s: T,
    pub damping: T,
    pub ra: T,
    pub xd: T,
    pub xq: T,
    pub xd_p: T,
    pub xq_p: T,
    pub td0_p_s: T,
    pub tq0_p_s: T,
    pub exciter: ExciterParams<T>,
    pub governor: GovernorParams<T>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MachineError {
    #[error("machine csv line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("machine parameters for {0:?}: {1}")]
    BadParams(String, String),
    #[error("generator {gen} references unknown machine class {class:?}")]
    UnknownClass { gen: usize, class: String },
}

/// Machine parameter table keyed by `machine_ref`.
#[derive(Debug, Clone)]
pub struct MachineTable<T> {
    pub machines: Vec<MachineParams<T>>,
}

impl<T: Scalar> MachineTable<T> {
    pub fn get(&self, machine_ref: &str) -> Option<&MachineParams<T>> {
        self.machines.iter().find(|m| m.machine_ref == machine_ref)
    }

    /// Parse the machine CSV (19 columns, see the shipped file header).
    pub fn parse_csv(text: &str) -> Result<Self, MachineError> {
        let mut machines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("machine_ref") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 19 {
                return Err(MachineError::Malformed {
                    line: idx + 1,
                    reason: format!("expected 19 fields, got {}", fields.len()),
                });
            }
            let num = |k: usize| -> Result<T, MachineError> {
                fields[k]
                    .parse::<f64>()
                    .map(T::of)
                    .map_err(|_| MachineError::Malformed {
                        line: idx + 1,
                        reason: format!("field {} is not a number: {:?}", k + 1, fields[k]),
                    })
            };
            let params = MachineParams {
                machine_ref: fields[0].to_string(),
                mbase_mva: num(1)?,
                h_s: num(2)?,
                damping: num(3)?,
                ra: num(4)?,
                xd: num(5)?,
                xq: num(6)?,
                xd_p: num(7)?,
                xq_p: num(8)?,
                td0_p_s: num(9)?,
                tq0_p_s: num(10)?,
                exciter: ExciterParams {
                    ka: num(11)?,
                    ta_s: num(12)?,
                    efd_min: num(13)?,
                    efd_max: num(14)?,
                },
                governor: GovernorParams {
                    droop: num(15)?,
                    tg_s: num(16)?,
                    gate_min: num(17)?,
                    gate_max: num(18)?,
                },
            };
            validate_params(&params)?;
            machines.push(params);
        }
        Ok(Self { machines })
    }
}

fn validate_params<T: Scalar>(p: &MachineParams<T>) -> Result<(), MachineError> {
    let bad = |reason: &str| {
        Err(MachineError::BadParams(
            p.machine_ref.clone(),
            reason.to_string(),
        ))
    };
    if p.h_s <= T::zero() {
        return bad("inertia must be positive");
    }
    if p.mbase_mva <= T::zero() {
        return bad("machine base must be positive");
    }
    if p.td0_p_s <= T::zero() || p.tq0_p_s <= T::zero() {
        return bad("open-circuit time constants must be positive");
    }
    if p.xd_p <= T::zero() || p.xq_p <= T::zero() {
        return bad("transient reactances must be positive");
    }
    if p.xd < p.xd_p || p.xq < p.xq_p {
        return bad("synchronous reactances must exceed transient reactances");
    }
    if p.exciter.efd_min >= p.exciter.efd_max {
        return bad("field limits out of order");
    }
    if p.governor.gate_min >= p.governor.gate_max {
        return bad("gate limits out of order");
    }
    Ok(())
}

/// One generator's parameters converted to the system MVA base, ready for
/// simulation. All formulas downstream work purely in system per-unit.
#[derive(Debug, Clone)]
pub struct SystemMachine<T> {
    pub gen_idx: usize,
    pub bus_idx: usize,
    pub mbase_mva: T,
    /// 2H on the system base, seconds.
    pub two_h: T,
    /// COI weight: H on the system base.
    pub h_weight: T,
    pub damping: T,
    pub ra: T,
    pub xd: T,
    pub xq: T,
    pub xd_p: T,
    pub xq_p: T,
    pub td0_p: T,
    pub tq0_p: T,
    pub exc: ExciterParams<T>,
    /// Droop converted to pu frequency per pu power on the system base.
    pub gov_droop: T,
    pub gov_tg: T,
    pub gate_min: T,
    pub gate_max: T,
    /// Norton admittance used in the augmented network matrix.
    pub norton_y: Complex<T>,
}

/// Convert the table entries for every generator in the network.
pub fn system_machines<T: Scalar>(
    net: &Network<T>,
    table: &MachineTable<T>,
) -> Result<Vec<SystemMachine<T>>, MachineError> {
    let sbase = net.base_mva;
    net.generators
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let p = table
                .get(&g.machine_ref)
                .ok_or_else(|| MachineError::UnknownClass {
                    gen: gi,
                    class: g.machine_ref.clone(),
                })?;
            let to_sys = sbase / p.mbase_mva;
            let ra = p.ra * to_sys;
            let xd_p = p.xd_p * to_sys;
            let xq_p = p.xq_p * to_sys;
            let x_avg = (xd_p + xq_p) / T::of(2.0);
            Ok(SystemMachine {
                gen_idx: gi,
                bus_idx: net.bus_index(g.bus).expect("resolved gen bus"),
                mbase_mva: p.mbase_mva,
                two_h: T::of(2.0) * p.h_s / to_sys,
                h_weight: p.h_s / to_sys,
                damping: p.damping / to_sys,
                ra,
                xd: p.xd * to_sys,
                xq: p.xq * to_sys,
                xd_p,
                xq_p,
                td0_p: p.td0_p_s,
                tq0_p: p.tq0_p_s,
                exc: p.exciter.clone(),
                gov_droop: p.governor.droop * to_sys,
                gov_tg: p.governor.tg_s,
                gate_min: p.governor.gate_min / to_sys,
                gate_max: p.governor.gate_max / to_sys,
                norton_y: Complex::new(T::one(), T::zero()) / Complex::new(ra, x_avg),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
# test machines
machine_ref,mbase_mva,h_s,d_pu,ra_pu,xd,xq,xd_p,xq_p,td0_p_s,tq0_p_s,exc_ka,exc_ta_s,efd_min,efd_max,gov_droop,gov_tg_s,gate_min,gate_max
U1,200,4.0,1.0,0.002,1.8,1.7,0.3,0.45,7.0,1.0,100,0.05,-5,6,0.05,0.5,0,1.1
";

    #[test]
    fn parses_and_converts_to_system_base() {
        let table = MachineTable::<f64>::parse_csv(CSV).unwrap();
        let m = table.get("U1").unwrap();
        assert_eq!(m.mbase_mva, 200.0);

        let net = crate::model::parse_case::<f64>(
            "CASE t 100\nBUS 1 1 230 SLACK 1.0\nGEN 1 0 150 -50 80 100 U1\n",
        )
        .unwrap();
        let sys = system_machines(&net, &table).unwrap();
        let s = &sys[0];
        // base conversion: x scales by 100/200, H by 200/100
        assert!((s.xd_p - 0.15).abs() < 1e-12);
        assert!((s.two_h - 16.0).abs() < 1e-12);
        assert!((s.h_weight - 8.0).abs() < 1e-12);
        assert!((s.gov_droop - 0.025).abs() < 1e-12);
        assert!((s.gate_max - 2.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_class() {
        let table = MachineTable::<f64>::parse_csv(CSV).unwrap();
        let net = crate::model::parse_case::<f64>(
            "CASE t 100\nBUS 1 1 230 SLACK 1.0\nGEN 1 0 150 -50 80 100 U9\n",
        )
        .unwrap();
        assert!(matches!(
            system_machines(&net, &table).unwrap_err(),
            MachineError::UnknownClass { gen: 0, .. }
        ));
    }

    #[test]
    fn rejects_inverted_reactances() {
        let bad = CSV.replace("1.8,1.7,0.3,0.45", "0.2,1.7,0.3,0.45");
        assert!(matches!(
            MachineTable::<f64>::parse_csv(&bad).unwrap_err(),
            MachineError::BadParams(..)
        ));
    }
}
