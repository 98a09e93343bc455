//! Criterion benchmarks for the dressed-cavity model; see `benches/`.
