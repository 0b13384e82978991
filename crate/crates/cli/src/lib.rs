//! Experiment pipelines behind the `wurl` binary: configuration, run
//! directories with manifests, and one entry point per subcommand.

pub mod commands;
pub mod config;
mod error;
pub mod rundir;

pub use commands::{
    cmd_estimate, cmd_eval, cmd_gradcheck, cmd_hierarchy, cmd_incremental, cmd_train, load_actors, IncrementalResult,
    Run, Stage, TrainResult, METRICS,
};
pub use config::{HierarchyConfig, IncrementalConfig, Kind, Overrides, RunConfig};
pub use error::{CliError, Result};
pub use rundir::{Manifest, RunDir};
