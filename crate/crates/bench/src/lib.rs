//! Criterion benchmarks for heatlab; see `benches/`.
