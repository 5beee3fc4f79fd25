//! Fixed-step time-domain transient stability with generator, exciter, and
//! governor surrogates, coupled to the protection relay models.

mod machine;
mod sim;

pub use machine::{
    system_machines, ExciterParams, GovernorParams, MachineError, MachineParams, MachineTable,
    SystemMachine,
};
pub use sim::{
    detect_loss_of_synchronism, init_from_power_flow, max_initial_derivative, run_transient,
    BranchEnd, Disturbance, DynamicState, GenTrip, MachineState, RelayPlan, RelayTrip, SeriesRow,
    SimConfig, SimError, SteOverload, TransientResult, TransientShed, TransientSim, Verdict,
};
