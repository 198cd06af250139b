//! Criterion benchmarks for the DataDock core live in `benches/`.
