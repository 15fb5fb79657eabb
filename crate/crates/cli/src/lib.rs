//! Scenario-driven front end for the `nongibbs` diagnostics.

pub mod catalog;
pub mod run;
pub mod scenario;

pub use run::{run, Manifest, RunOptions, CACHE_ENV};
pub use scenario::{Kind, Scenario};

/// Exit status for a config that does not parse or validate.
pub const EXIT_INVALID: i32 = 1;
/// Exit status for failures while running a valid config.
pub const EXIT_RUNTIME: i32 = 2;
