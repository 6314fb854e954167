//! Benchmarks for the surffv solver live in `benches/`.
