//! Criterion benchmarks for `wsc-core`; see `benches/`.
