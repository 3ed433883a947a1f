//! File formats, run configuration, manifests, the staged pipeline and report
//! rendering on top of `flowloc-core`. The `flowloc` binary is a thin clap
//! front end over [`pipeline`].

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
