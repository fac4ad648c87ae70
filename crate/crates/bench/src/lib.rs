//! Benchmark-only crate; see `benches/steps.rs`.
