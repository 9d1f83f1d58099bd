//! Criterion benchmarks for `obliq`; see `benches/`.
