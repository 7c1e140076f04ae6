//! Config-driven experiments, independent oracles and reproducible outputs
//! for the `oscchain` toolkit.

pub mod config;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, Run};
pub use oracle::{mc_oracle, ode_oracle, Estimate, Observable, OdeTrajectory};
pub use output::{Check, Outcome, RunManifest};
