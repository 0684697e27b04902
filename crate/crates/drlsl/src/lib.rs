//! Harness library: run configuration, training/test drivers, and metrics.
//! The `drlsl` binary is a thin CLI over these entry points; the acceptance
//! suite drives them directly.

pub mod config;
pub mod run;
