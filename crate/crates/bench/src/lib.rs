//! Criterion benchmarks for the clapshot hot paths. See `benches/`.
