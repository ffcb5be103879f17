//! Criterion benchmarks for the simulation engine live in `benches/`.

pub use lqf_core;
