//! Criterion benchmarks for koornwalk live under `benches/`.
