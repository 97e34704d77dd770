//! Benchmark harness: datasets x methods x seeded runs, with JSON/CSV
//! result tables and SVG scatter plots.

pub mod config;
pub mod engine;
pub mod plot;

pub use config::{BenchConfig, DatasetEntry, MethodEntry, MethodSpec};
pub use engine::{derive_seed, run, ResultsBundle, RunRecord};
