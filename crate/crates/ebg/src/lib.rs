//! Standard-library side of the benchmark generator: configuration files,
//! run directories, HTTP and recording chat backends, a parallel scorer,
//! output formats and the command line.

pub mod backend;
pub mod cli;
pub mod config;
pub mod io;
pub mod report;
pub mod scorer;

pub use ebg_core;
