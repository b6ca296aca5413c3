//! Criterion benchmarks for the wanframe core; see `benches/pipeline.rs`.
