//! Criterion benchmarks for `clrar-core`; see `benches/`.
