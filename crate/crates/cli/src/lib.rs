//! Stream ingestion, sampling runs, verification suites and benchmarks behind
//! the `wrs` binary.

pub mod bench;
pub mod error;
pub mod ingest;
pub mod sample;
pub mod verify;

pub use error::{CliError, Result};
