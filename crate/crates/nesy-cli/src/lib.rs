//! Library surface of the `nesy` binary: command bodies, configuration
//! resolution, benchmark reporting, and the gradient-check suites.

pub mod commands;
pub mod config;
pub mod errors;
pub mod gradcheck;
pub mod mem;
pub mod report;
