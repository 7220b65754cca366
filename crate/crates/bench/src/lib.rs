//! Shared inputs for the benchmarks.

use fqv_core::partition::dyadic_sequence;
use fqv_core::path::generate_brownian;
use fqv_core::{builtin, Functional, Partition, SampledPath};

/// Brownian path on `2^log2_m` intervals, seed 42.
pub fn brownian(log2_m: u32) -> SampledPath {
    generate_brownian(1, 1.0, 1 << log2_m, 42).expect("valid grid")
}

pub fn dyadic(path: &SampledPath, n: usize) -> Partition {
    dyadic_sequence(path.grid(), n, n)
        .expect("level divides the grid")
        .finest()
        .partition
        .clone()
}

pub fn functional(name: &str) -> Functional {
    builtin(name).unwrap_or_else(|| panic!("unknown builtin {name}"))
}
