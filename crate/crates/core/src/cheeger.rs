//! Exact Cheeger constant by exhaustive subset enumeration.
//!
//! [`cheeger_exact`] walks all `2^n` vertex subsets in reflected Gray-code
//! order. Consecutive subsets differ in one vertex `v`, so the boundary size
//! moves by `±(k − 2·|N(v) ∩ F|)`, one popcount per step. [`cheeger_naive`]
//! recomputes every boundary from the edge list and serves as its oracle.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bit, members, Graph, VertexSet};

/// Largest `n` accepted by [`cheeger_exact`].
pub const EXACT_MAX_VERTICES: usize = 40;
/// Largest `n` accepted by [`cheeger_naive`].
pub const NAIVE_MAX_VERTICES: usize = 16;

/// `h = boundary / size`, attained by `witness`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheegerResult {
    /// `|∂F|`
    pub boundary: u64,
    /// `|F|`
    pub size: u64,
    pub witness: VertexSet,
}

impl CheegerResult {
    pub fn h(&self) -> f64 {
        self.boundary as f64 / self.size as f64
    }

    /// Exact comparison of the two ratios.
    pub fn cmp_ratio(&self, other: &CheegerResult) -> Ordering {
        (u128::from(self.boundary) * u128::from(other.size))
            .cmp(&(u128::from(other.boundary) * u128::from(self.size)))
    }

    pub fn same_ratio(&self, other: &CheegerResult) -> bool {
        self.cmp_ratio(other) == Ordering::Equal
    }

    pub fn witness_vertices(&self) -> Vec<usize> {
        members(self.witness).collect()
    }

    /// Numerator and denominator in lowest terms.
    pub fn reduced(&self) -> (u64, u64) {
        let g = gcd(self.boundary, self.size);
        (self.boundary / g, self.size / g)
    }
}

impl std::fmt::Display for CheegerResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (= {}/{})", self.h(), self.boundary, self.size)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Number of edges with exactly one endpoint in `set`.
pub fn boundary_size(g: &Graph, set: VertexSet) -> u64 {
    members(set)
        .map(|v| u64::from((g.neighbors(v) & !set).count_ones()))
        .sum()
}

fn check_input(g: &Graph, cap: usize) -> Result<()> {
    if g.n() > cap {
        return Err(Error::TooLarge { n: g.n(), cap });
    }
    let violations = g.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGraph(crate::graph::join_violations(
            &violations,
        )));
    }
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    Ok(())
}

#[inline]
fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// Best subset found in one contiguous range of Gray-code indices, and the
/// index at which it was first reached.
#[derive(Clone, Copy, Debug)]
struct BlockBest {
    result: CheegerResult,
    index: u64,
}

fn better(a: Option<BlockBest>, b: Option<BlockBest>) -> Option<BlockBest> {
    match (a, b) {
        (Some(x), Some(y)) => match x.result.cmp_ratio(&y.result) {
            Ordering::Less => Some(x),
            Ordering::Greater => Some(y),
            Ordering::Equal => Some(if x.index <= y.index { x } else { y }),
        },
        (x, None) => x,
        (None, y) => y,
    }
}

/// Scans Gray-code indices `lo..hi`; index 0 (the empty set) is skipped.
fn scan_block(g: &Graph, lo: u64, hi: u64) -> Option<BlockBest> {
    let adj = g.adjacency();
    let k = g.k() as i64;
    let half = (g.n() / 2) as u64;

    let mut set = gray(lo);
    let mut boundary = boundary_size(g, set) as i64;
    let mut size = u64::from(set.count_ones());
    // best.boundary / best.size, initialised above any attainable ratio.
    let (mut best_b, mut best_s) = (u64::MAX, 1u64);
    let mut best_set = 0;
    let mut best_index = 0;

    let mut consider = |set: u64, boundary: i64, size: u64, index: u64| {
        if size == 0 || size > half {
            return;
        }
        let b = boundary as u64;
        if u128::from(b) * u128::from(best_s) < u128::from(best_b) * u128::from(size) {
            best_b = b;
            best_s = size;
            best_set = set;
            best_index = index;
        }
    };

    consider(set, boundary, size, lo);
    for i in (lo + 1)..hi {
        let v = i.trailing_zeros() as usize;
        let inside = i64::from((adj[v] & set).count_ones());
        let delta = k - 2 * inside;
        if set & bit(v) == 0 {
            boundary += delta;
            size += 1;
        } else {
            boundary -= delta;
            size -= 1;
        }
        set ^= bit(v);
        consider(set, boundary, size, i);
    }

    (best_b != u64::MAX).then_some(BlockBest {
        result: CheegerResult {
            boundary: best_b,
            size: best_s,
            witness: best_set,
        },
        index: best_index,
    })
}

/// Exact Cheeger constant: minimum of `|∂F|/|F|` over nonempty `F` with
/// `|F| ≤ ⌊n/2⌋`. Ties go to the first minimiser in Gray-code order.
pub fn cheeger_exact(g: &Graph) -> Result<CheegerResult> {
    check_input(g, EXACT_MAX_VERTICES)?;
    let total = 1u64 << g.n();
    Ok(scan_block(g, 0, total)
        .expect("a connected graph has a nonempty half")
        .result)
}

/// Same result as [`cheeger_exact`], with the Gray-code range split into
/// `blocks` contiguous pieces evaluated on the rayon pool and min-reduced.
/// The output, witness included, is identical to the serial run.
pub fn cheeger_exact_parallel(g: &Graph, blocks: usize) -> Result<CheegerResult> {
    check_input(g, EXACT_MAX_VERTICES)?;
    let total = 1u64 << g.n();
    let blocks = (blocks.max(1) as u64).min(total);
    let step = total.div_ceil(blocks);
    let best = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * step;
            let hi = ((b + 1) * step).min(total);
            if lo >= hi {
                None
            } else {
                scan_block(g, lo, hi)
            }
        })
        .reduce(|| None, better);
    Ok(best.expect("a connected graph has a nonempty half").result)
}

/// Reference implementation: every subset in binary order, boundary counted
/// from the edge list each time.
pub fn cheeger_naive(g: &Graph) -> Result<CheegerResult> {
    check_input(g, NAIVE_MAX_VERTICES)?;
    let n = g.n();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut best: Option<CheegerResult> = None;
    for mask in 1u64..(1 << n) {
        let size = (0..n).filter(|&v| mask >> v & 1 == 1).count() as u64;
        if size > (n / 2) as u64 {
            continue;
        }
        let boundary = edges
            .iter()
            .filter(|&&(u, v)| (mask >> u & 1) != (mask >> v & 1))
            .count() as u64;
        let candidate = CheegerResult {
            boundary,
            size,
            witness: mask,
        };
        if best.is_none_or(|b| candidate.cmp_ratio(&b) == Ordering::Less) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("n >= 3 leaves a nonempty half"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_regular;
    use crate::seed::Seed;
    use rand::Rng;

    fn ratio(r: &CheegerResult) -> (u64, u64) {
        r.reduced()
    }

    #[test]
    fn complete_graphs() {
        for n in 3..=10 {
            let g = Graph::complete(n).unwrap();
            let r = cheeger_exact(&g).unwrap();
            assert_eq!(ratio(&r), ((n - n / 2) as u64, 1), "K{n}");
        }
        let r = cheeger_exact(&Graph::complete(4).unwrap()).unwrap();
        assert_eq!((r.boundary, r.size), (4, 2));
    }

    #[test]
    fn cycles() {
        for n in 3..=12 {
            let r = cheeger_exact(&Graph::cycle(n).unwrap()).unwrap();
            let (num, den) = (2u64, (n / 2) as u64);
            let g = gcd(num, den);
            assert_eq!(ratio(&r), (num / g, den / g), "C{n}");
        }
    }

    #[test]
    fn six_cycle_witness_is_a_path() {
        let g = Graph::cycle(6).unwrap();
        let r = cheeger_exact(&g).unwrap();
        assert_eq!((r.boundary, r.size), (2, 3));
        assert_eq!(boundary_size(&g, r.witness), 2);
        assert_eq!(cheeger_naive(&g).unwrap().reduced(), (2, 3));
    }

    #[test]
    fn petersen_is_one() {
        let g = Graph::petersen();
        assert_eq!(cheeger_naive(&g).unwrap().reduced(), (1, 1));
        assert_eq!(cheeger_exact(&g).unwrap().reduced(), (1, 1));
    }

    #[test]
    fn errors() {
        let two_triangles =
            Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
        assert!(matches!(
            cheeger_exact(&two_triangles),
            Err(Error::NotConnected)
        ));
        assert!(matches!(
            cheeger_naive(&two_triangles),
            Err(Error::NotConnected)
        ));
        let big = generate_regular(18, 3, Seed::new(1, 0)).unwrap();
        assert!(matches!(
            cheeger_naive(&big),
            Err(Error::TooLarge { n: 18, cap: 16 })
        ));
        let huge = generate_regular(42, 3, Seed::new(1, 0)).unwrap();
        assert!(matches!(
            cheeger_exact(&huge),
            Err(Error::TooLarge { n: 42, cap: 40 })
        ));
    }

    #[test]
    fn cubic_graphs_on_eight_vertices_match_oracle() {
        for s in 0..40 {
            let g = generate_regular(8, 3, Seed::new(s, 1)).unwrap();
            let fast = cheeger_exact(&g).unwrap();
            let slow = cheeger_naive(&g).unwrap();
            assert!(fast.same_ratio(&slow));
        }
    }

    #[test]
    fn parallel_matches_serial_bit_for_bit() {
        for s in 0..10 {
            let g = generate_regular(14, 4, Seed::new(s, 2)).unwrap();
            let serial = cheeger_exact(&g).unwrap();
            for blocks in [1, 2, 3, 7, 64] {
                assert_eq!(cheeger_exact_parallel(&g, blocks).unwrap(), serial);
            }
        }
    }

    #[test]
    fn incremental_boundary_matches_recomputation() {
        // Replays the Gray-code walk and compares the running boundary with
        // a from-scratch count at random checkpoints.
        let mut rng = Seed::new(99, 0).rng();
        for s in 0..5 {
            let g = generate_regular(16, 5, Seed::new(s, 3)).unwrap();
            let total = 1u64 << g.n();
            let checkpoints: std::collections::BTreeSet<u64> =
                (0..200).map(|_| rng.gen_range(1..total)).collect();
            let (mut set, mut boundary) = (0u64, 0i64);
            let k = g.k() as i64;
            for i in 1..total {
                let v = i.trailing_zeros() as usize;
                let delta = k - 2 * i64::from((g.neighbors(v) & set).count_ones());
                boundary += if set & bit(v) == 0 { delta } else { -delta };
                set ^= bit(v);
                if checkpoints.contains(&i) {
                    assert_eq!(set, gray(i));
                    assert_eq!(boundary as u64, boundary_size(&g, set));
                }
            }
        }
    }
}
