//! Criterion benchmarks for the hot paths of `hyplab-core`. See `benches/`.
