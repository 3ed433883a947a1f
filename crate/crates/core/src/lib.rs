//! Flow-guided nanoscale localization toolkit, algorithmic core.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! with `no_std` + `alloc`. File formats, the command line and report
//! rendering live in the `flowloc` companion crate.
//!
//! Pipeline, in order:
//!
//! 1. [`vasculature`] describes the cardiovascular graph nanodevices travel on.
//! 2. [`mobility_sim`] walks nanodevices through it and produces the lossy
//!    reports an on-body anchor next to the heart would receive.
//! 3. [`profile_transform`] rescales those reports to a different patient
//!    (height, weight, activity level).
//! 4. [`features`] turns reports into a fixed-length anchor descriptor and
//!    assembles the heterogeneous input graph.
//! 5. [`gnn`] is the heterogeneous message-passing model, its trainer and the
//!    hyperparameter search.
//! 6. [`eval`] scores predictions (region accuracy, point error, confusion).
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod geometry;
pub mod gnn;
pub mod matrix;
pub(crate) mod math;
pub mod mobility_sim;
pub mod profile_transform;
pub mod rng;
pub mod vasculature;

pub use error::{Error, Result};
pub use geometry::Point3;
