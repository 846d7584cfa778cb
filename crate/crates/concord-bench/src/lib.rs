//! Empty library shell; the benchmarks live under `benches/`.
