//! Criterion benchmarks for the operators and the solver; see `benches/`.
