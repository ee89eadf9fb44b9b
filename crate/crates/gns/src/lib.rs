//! File formats, configuration and the `gns` command-line driver for the
//! `gns-core` spectral Galerkin solver.
//!
//! Exit codes: 0 all checks satisfied, 1 a check failed, 2 usage or input
//! error, 3 numerical divergence.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::Failure;
pub use config::RunConfig;
