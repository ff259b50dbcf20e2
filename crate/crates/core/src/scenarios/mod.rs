//! Scenario configuration, the preset catalog, persisted runs and sweeps.

mod config;
pub mod metrics;
mod presets;
mod run;
mod sweep;

pub use config::{OptimizerSection, OutputSection, ProblemSection, ScenarioConfig, ScenarioKind};
pub use presets::{preset, PRESETS};
pub use run::{execute, run_scenario, simulate_pair, simulate_scenario, ScenarioRun, Series};
pub use sweep::{sweep, write_summary, SweepEntry, SweepRow};
