//! Electrical network model: domain types, case-file ingestion, validation,
//! hourly load scheduling, and island (topology) analysis.

mod parse;
mod schedule;
mod topology;
mod validate;

pub use parse::{parse_case, serialize_case, ParseError};
pub use schedule::{scheduled_load, LoadProfile, ScheduleError};
pub use topology::{connected_islands, Island, IslandSet, OperatingState};
pub use validate::{validate, ValidationReport, Violation};

use crate::scalar::Scalar;

/// External bus identifier from the case file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl std::fmt::Display for BusId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Pq,
    Pv,
    Slack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusStatus {
    Connected,
    IslandedDead,
}

#[derive(Debug, Clone)]
pub struct Bus<T> {
    pub id: BusId,
    pub area: u32,
    /// Base voltage in kV.
    pub base_kv: T,
    pub kind: BusKind,
    /// Voltage setpoint in per-unit (meaningful for PV/slack buses).
    pub voltage_setpoint: T,
    pub status: BusStatus,
}

/// Weather-damage state of a branch, independent of whether it is energized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfraStatus {
    Intact,
    Damaged,
}

/// Operational state of a branch; islanding can de-energize intact branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperStatus {
    InService,
    OutOfService,
}

#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub circuit_id: String,
    /// Series resistance, per-unit on the system base.
    pub resistance: T,
    /// Series reactance, per-unit; never zero in a valid case.
    pub reactance: T,
    /// Total line-charging susceptance, per-unit.
    pub charging: T,
    /// Long-term (24 h) emergency rating, MVA.
    pub rating_lte: T,
    /// Short-term (15 min) emergency rating, MVA.
    pub rating_ste: T,
    pub is_transformer: bool,
    pub infra_status: InfraStatus,
    pub oper_status: OperStatus,
}

impl<T: Scalar> Branch<T> {
    /// Internal from-bus index resolved against the owning network.
    pub fn ends(&self, net: &Network<T>) -> (usize, usize) {
        (
            net.bus_index(self.from_bus).expect("resolved from_bus"),
            net.bus_index(self.to_bus).expect("resolved to_bus"),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenStatus {
    Online,
    OfflineIslanded,
    OfflineTripped,
}

#[derive(Debug, Clone)]
pub struct Generator<T> {
    pub bus: BusId,
    pub p_min: T,
    pub p_max: T,
    pub q_min: T,
    pub q_max: T,
    /// Scheduled active power output, MW.
    pub p_set: T,
    pub status: GenStatus,
    /// Key into the dynamics parameter table.
    pub machine_ref: String,
}

#[derive(Debug, Clone)]
pub struct Load<T> {
    pub bus: BusId,
    /// Active power at system peak, MW.
    pub p_nominal: T,
    /// Reactive power at system peak, MVAr.
    pub q_nominal: T,
    /// Fraction of the scheduled demand currently served, in [0, 1].
    pub served_fraction: T,
}

/// The system under study. Immutable after validation; hourly mutations are
/// expressed through [`OperatingState`] snapshots layered on top.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub name: String,
    pub base_mva: T,
    pub buses: Vec<Bus<T>>,
    pub branches: Vec<Branch<T>>,
    pub generators: Vec<Generator<T>>,
    pub loads: Vec<Load<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus<T>> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Total installed generating capacity in MW.
    pub fn total_p_max(&self) -> T {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    /// Number of distinct buses carrying load.
    pub fn load_bus_count(&self) -> usize {
        let mut ids: Vec<BusId> = self.loads.iter().map(|l| l.bus).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn line_count(&self) -> usize {
        self.branches.iter().filter(|b| !b.is_transformer).count()
    }

    pub fn transformer_count(&self) -> usize {
        self.branches.iter().filter(|b| b.is_transformer).count()
    }

    /// Generator indices attached to the given bus index.
    pub fn gens_at(&self, bus_idx: usize) -> Vec<usize> {
        let id = self.buses[bus_idx].id;
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.bus == id)
            .map(|(i, _)| i)
            .collect()
    }
}
