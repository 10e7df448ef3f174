//! Criterion benchmarks for the freeknot kernels; see `benches/kernels.rs`.
