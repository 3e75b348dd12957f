//! Fixtures shared by the benchmarks.

use cheeger_core::{generate_regular, Graph, Seed};

/// A fixed random connected k-regular graph per `(n, k)`.
pub fn fixture(n: usize, k: usize) -> Graph {
    generate_regular(n, k, Seed::new(0xBE7C, (n * 100 + k) as u64)).expect("valid bench parameters")
}
