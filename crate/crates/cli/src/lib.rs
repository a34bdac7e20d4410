//! Library side of the `finslerkit` binary: scenario loading, commands and report output.

pub mod commands;
pub mod report;
pub mod scenario;
