//! Benchmarks for `psc-core`; see `benches/`.
