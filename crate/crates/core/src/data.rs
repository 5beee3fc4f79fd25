//! Data shipped with the crate: the RTS-96 study case, stand-in storm and
//! fragility data, the winter load profile, machine parameters, and the
//! built-in two-area stability fixture.

use crate::dynamics::MachineTable;
use crate::fragility::{FragilityCurve, RobustnessClass};
use crate::model::{parse_case, Network, ParseError};
use crate::scalar::Scalar;

pub const RTS96_CASE: &str = include_str!("../data/rts96.case");
pub const WINTER_LOAD_CSV: &str = include_str!("../data/winter_load.csv");
pub const WIND_AREA1_CSV: &str = include_str!("../data/wind_area1.csv");
pub const FRAGILITY_NORMAL_CSV: &str = include_str!("../data/fragility_normal.csv");
pub const FRAGILITY_ROBUST_CSV: &str = include_str!("../data/fragility_robust.csv");
pub const MACHINES_RTS96_CSV: &str = include_str!("../data/machines_rts96.csv");
pub const TWO_AREA_CASE: &str = include_str!("../data/twoarea.case");
pub const MACHINES_TWO_AREA_CSV: &str = include_str!("../data/machines_twoarea.csv");

/// Resolve a case argument: a built-in name (`rts96`, `twoarea`) or a path.
pub fn builtin_case(name: &str) -> Option<&'static str> {
    match name {
        "rts96" => Some(RTS96_CASE),
        "twoarea" => Some(TWO_AREA_CASE),
        _ => None,
    }
}

/// Built-in machine table matching a built-in case name.
pub fn builtin_machines(name: &str) -> Option<&'static str> {
    match name {
        "rts96" => Some(MACHINES_RTS96_CSV),
        "twoarea" => Some(MACHINES_TWO_AREA_CSV),
        _ => None,
    }
}

pub fn rts96<T: Scalar>() -> Result<Network<T>, ParseError> {
    parse_case(RTS96_CASE)
}

pub fn two_area<T: Scalar>() -> Result<Network<T>, ParseError> {
    parse_case(TWO_AREA_CASE)
}

pub fn rts96_machines<T: Scalar>() -> MachineTable<T> {
    MachineTable::parse_csv(MACHINES_RTS96_CSV).expect("shipped machine table parses")
}

pub fn two_area_machines<T: Scalar>() -> MachineTable<T> {
    MachineTable::parse_csv(MACHINES_TWO_AREA_CSV).expect("shipped machine table parses")
}

/// The default stand-in fragility pair (normal + more-robust).
pub fn default_fragility<T: Scalar>() -> Vec<FragilityCurve<T>> {
    vec![
        FragilityCurve::parse_csv(RobustnessClass::Normal, FRAGILITY_NORMAL_CSV)
            .expect("shipped normal curve parses"),
        FragilityCurve::parse_csv(RobustnessClass::MoreRobust, FRAGILITY_ROBUST_CSV)
            .expect("shipped robust curve parses"),
    ]
}
