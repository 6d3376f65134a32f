//! Criterion benchmarks for the loss, simplex and training kernels live in `benches/`.
