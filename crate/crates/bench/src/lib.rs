//! Instances, reference solutions, baselines and the experiment runner
//! behind the `saddle-bench` binary.

pub mod baselines;
pub mod error;
pub mod generate;
pub mod instance;
pub mod manifest;
pub mod matrix_io;
pub mod reference;
pub mod runner;

pub use error::{BenchError, Result};
pub use instance::{Instance, InstanceData};
pub use manifest::{InstanceKind, Manifest, Topology};
pub use reference::reference_solution;
pub use runner::{run_experiment, run_single, ExperimentConfig, RunReport, SolverKind};
