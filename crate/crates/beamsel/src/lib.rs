//! File formats, configuration and the staged command-line pipeline around
//! `beamsel-core`: requirement sampling, clustering, representative
//! matrices, classifier training, evaluation, pattern export and the
//! oracle-versus-inference timing benchmark.

// Validation uses `!(x > 0.0)` style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod export;
pub mod formats;
pub mod pipeline;
pub mod seeds;

pub use bench::{benchmark_timing, BenchmarkResult};
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_full_pipeline, Stage};
