//! Hourly quasi-static analysis: Newton-Raphson AC power flow and
//! minimum-load-shedding dispatch per energized island.

mod hourly;
mod powerflow;
mod shed;

pub use hourly::{hourly_steady_state, IndicatorSnapshot, SteadyStateRecord};
pub use powerflow::{
    allocate_unit_outputs, run_power_flow, BranchFlow, IslandSolve, PowerFlowError,
    PowerFlowOptions, PowerFlowSolution,
};
pub use shed::{solve_minimum_shed, ShedError, ShedPlan};
