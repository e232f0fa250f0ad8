//! Library half of the `ringwalk` binary, kept separate so the commands can be
//! tested without spawning processes.

pub mod app;
pub mod commands;
pub mod error;
pub mod output;
pub mod spec;
pub mod verify;

pub use error::{CliError, CliResult};
pub use spec::{CoinState, ExperimentSpec, OutputFormat, SweepAxis, SweepQuantity, SweepSpec, WalkKind};
