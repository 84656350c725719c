//! Client/cloud plumbing: the task envelope exchanged between processes,
//! the benchmark runner, and the command-line interface.

pub mod bench;
pub mod cli;
pub mod envelope;

pub use bench::{bench_run, parse_dims, BenchProtocol, BenchRow, CSV_HEADER};
pub use envelope::{Envelope, EnvelopeKind, ENVELOPE_MAGIC, ENVELOPE_VERSION};
