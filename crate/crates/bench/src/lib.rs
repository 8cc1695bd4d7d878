//! Criterion benchmarks for the probing toolkit; see `benches/probe.rs`.
