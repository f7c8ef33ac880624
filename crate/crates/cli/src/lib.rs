//! Command implementations behind the `mscbench` binary.

pub mod args;
pub mod commands;
pub mod exit;
pub mod review;
