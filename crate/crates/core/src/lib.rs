//! Optimal control of a population of cooperators and defectors coupled to a
//! shared environmental resource.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: payoffs, vector fields, equilibria and regime labels;
//! - [`odeint`]: adaptive Dormand-Prince integration with dense output;
//! - [`ocp`]: the incentive, propaganda and awareness control problems;
//! - [`climb`]: the Hamiltonian hill-climbing optimizer;
//! - [`scenarios`]: configuration, presets, persisted runs and sweeps.

pub mod climb;
pub mod dynamics;
pub mod error;
pub mod ocp;
pub mod odeint;
pub mod scenarios;

pub use climb::{
    optimize, ControlSignal, InitialControl, IterationLog, OptimizerConfig, RunRecord, Termination,
};
pub use dynamics::{GamePayoffs, PayoffMatrix, Regime, SystemState};
pub use error::{Error, Result};
pub use ocp::{ProblemKind, ProblemSpec};
pub use odeint::{IntegratorConfig, Trajectory};
