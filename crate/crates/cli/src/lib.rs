//! Library surface of the `csl` command-line tool: configuration parsing,
//! the verification suites, and report emission. The binary in `main.rs` is
//! a thin argument-parsing shell over these.

pub mod commands;
pub mod config;
pub mod report;
pub mod suite;

pub use config::{FactorSpec, GridSpec, RunConfig, SurfaceSpec};
pub use report::{CheckResult, CheckVerdict, SuiteReport};
pub use suite::run_suite;
