//! Scenario files, batch runs and report emission for `histkit`.

pub mod emit;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use run::{run, RunError, RunReport, Verdict};
pub use scenario::{parse_scenario, parse_str, Scenario, ScenarioError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}
