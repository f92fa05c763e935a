//! Criterion benchmarks for the `regnn` kernels live in `benches/`.
