//! One hour of quasi-static analysis: islanding, shed minimization, power
//! flow, and the indicator snapshot.

use super::powerflow::{PowerFlowOptions, PowerFlowSolution};
use super::shed::{solve_minimum_shed, ShedError, ShedPlan};
use crate::model::{connected_islands, GenStatus, InfraStatus, IslandSet, Network, OperatingState};
use crate::scalar::Scalar;

/// Percentage indicators (0–100) describing one hourly system state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorSnapshot<T> {
    pub generators_online_pct: T,
    pub generation_capacity_pct: T,
    pub branches_in_service_pct: T,
    pub branches_available_pct: T,
    pub load_served_pct: T,
}

impl<T: Scalar> IndicatorSnapshot<T> {
    pub fn all_hundred() -> Self {
        let h = T::of(100.0);
        Self {
            generators_online_pct: h,
            generation_capacity_pct: h,
            branches_in_service_pct: h,
            branches_available_pct: h,
            load_served_pct: h,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateRecord<T> {
    pub hour: usize,
    pub islands: IslandSet,
    pub shed: ShedPlan<T>,
    pub indicators: IndicatorSnapshot<T>,
    /// Scheduled demand before shedding, per bus.
    pub scheduled_demand: Vec<(T, T)>,
}

impl<T: Scalar> SteadyStateRecord<T> {
    pub fn solution(&self) -> &PowerFlowSolution<T> {
        &self.shed.solution
    }
}

/// Compute the indicator snapshot for a resolved hour state.
pub fn indicators<T: Scalar>(
    net: &Network<T>,
    state: &OperatingState,
    islands: &IslandSet,
    scheduled: &[(T, T)],
    shed: &ShedPlan<T>,
) -> IndicatorSnapshot<T> {
    let hundred = T::of(100.0);
    let n_gen = net.generators.len();
    let online = islands
        .gen_status
        .iter()
        .filter(|&&s| s == GenStatus::Online)
        .count();
    let cap_total = net.total_p_max();
    let cap_online: T = net
        .generators
        .iter()
        .enumerate()
        .filter(|(gi, _)| islands.gen_status[*gi] == GenStatus::Online)
        .map(|(_, g)| g.p_max)
        .sum();

    let n_br = net.branches.len();
    let in_service = islands.branch_in_service.iter().filter(|&&b| b).count();
    let available = state.branch_damaged.iter().filter(|&&d| !d).count();

    let total_sched: T = scheduled.iter().map(|&(p, _)| p).sum();
    let served: T = (0..net.buses.len())
        .map(|b| scheduled[b].0 * (T::one() - shed.bus_shed_fraction[b]))
        .sum();

    let pct = |num: T, den: T| {
        if den > T::zero() {
            (num / den * hundred).min(hundred).max(T::zero())
        } else {
            hundred
        }
    };

    IndicatorSnapshot {
        generators_online_pct: pct(T::of(online as f64), T::of(n_gen as f64)),
        generation_capacity_pct: pct(cap_online, cap_total),
        branches_in_service_pct: pct(T::of(in_service as f64), T::of(n_br as f64)),
        branches_available_pct: pct(T::of(available as f64), T::of(n_br as f64)),
        load_served_pct: pct(served, total_sched),
    }
}

/// Run one complete steady-state hour on a prepared operating state.
pub fn hourly_steady_state<T: Scalar>(
    net: &Network<T>,
    state: &OperatingState,
    scheduled: Vec<(T, T)>,
    hour: usize,
    warm: Option<&PowerFlowSolution<T>>,
    options: &PowerFlowOptions<T>,
) -> Result<SteadyStateRecord<T>, ShedError> {
    let islands = connected_islands(net, state);
    let shed = solve_minimum_shed(net, &islands, &scheduled, warm, options)?;
    let snapshot = indicators(net, state, &islands, &scheduled, &shed);
    // infra-status consistency: damaged branches are never in service
    debug_assert!(net
        .branches
        .iter()
        .enumerate()
        .all(|(bi, _)| !(state.branch_damaged[bi] && islands.branch_in_service[bi])));
    Ok(SteadyStateRecord {
        hour,
        islands,
        shed,
        indicators: snapshot,
        scheduled_demand: scheduled,
    })
}

/// Convenience used by indicator invariants: in-service percentage can never
/// exceed availability because damage forces branches out of service.
pub fn in_service_leq_available<T: Scalar>(snap: &IndicatorSnapshot<T>) -> bool {
    snap.branches_in_service_pct <= snap.branches_available_pct + T::of(1e-9)
}
