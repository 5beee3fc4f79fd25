//! Windstorm resilience simulation for transmission grids.
//!
//! The crate couples four layers behind one scenario driver:
//!
//! * [`model`] — network domain types, case-file ingestion, islanding;
//! * [`fragility`] — wind-speed fragility curves and Monte Carlo outage
//!   sampling with MTTR-based repair;
//! * [`steady`] — hourly Newton-Raphson power flow and minimum-load-shed
//!   dispatch per island;
//! * [`dynamics`] + [`protection`] — fixed-step transient stability with
//!   distance / under-frequency / under-voltage relays and out-of-step
//!   corrective tripping;
//! * [`metrics`] — performance traces, phase detection, and resilience
//!   metrics in steady-state and aggregated modes.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! [`Real`] is the concrete type used by the CLI and the shipped data.

pub mod data;
pub mod fragility;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod protection;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod steady;

pub mod dynamics;

/// Default scalar for the shipped tooling.
pub type Real = f64;

/// Complex value over the default scalar.
pub type Complex = num_complex::Complex<Real>;

pub use model::Network;
pub use scalar::Scalar;

/// Concrete aliases over [`Real`] for the main artifacts.
pub type RealNetwork = model::Network<Real>;
pub type RealSolution = steady::PowerFlowSolution<Real>;
