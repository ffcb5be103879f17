//! Experiment runner behind the `lqf` command.

pub mod cputime;
pub mod error;
pub mod experiments;
pub mod spec;

pub use error::{CliError, Result};
pub use experiments::{run, write_artifacts, Artifact};
pub use spec::{load_spec, parse_spec, ExperimentKind, ExperimentSpec, TimeScale};
