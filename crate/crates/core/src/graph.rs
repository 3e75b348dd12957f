//! Simple undirected k-regular graphs stored as per-vertex neighbor bitsets,
//! and a seeded pairing-model generator for random connected ones.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::Seed;

/// Largest supported vertex count; one neighborhood fits in a `u64`.
pub const MAX_VERTICES: usize = 64;

/// Restarts allowed before [`generate_regular`] gives up.
pub const DEFAULT_RESTART_CAP: usize = 10_000;

/// Consecutive rejected draws tolerated before scanning for a dead end.
const MISS_SCAN_INTERVAL: usize = 32;

/// A set of vertices, bit `v` set iff `v` is a member.
pub type VertexSet = u64;

#[inline]
pub(crate) fn bit(v: usize) -> VertexSet {
    1u64 << v
}

/// Iterates the members of a vertex set in increasing order.
pub fn members(set: VertexSet) -> impl Iterator<Item = usize> {
    let mut rest = set;
    std::iter::from_fn(move || {
        if rest == 0 {
            return None;
        }
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        Some(v)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    k: usize,
    adj: Vec<VertexSet>,
}

/// A broken [`Graph`] invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VertexCount {
        n: usize,
    },
    DegreeRange {
        n: usize,
        k: usize,
    },
    OddDegreeSum {
        n: usize,
        k: usize,
    },
    AdjacencyLength {
        n: usize,
        len: usize,
    },
    SelfLoop {
        vertex: usize,
    },
    NeighborOutOfRange {
        vertex: usize,
        neighbor: usize,
    },
    Asymmetric {
        from: usize,
        to: usize,
    },
    Degree {
        vertex: usize,
        found: usize,
        expected: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::VertexCount { n } => {
                write!(f, "vertex count {n} outside 3..={MAX_VERTICES}")
            }
            Violation::DegreeRange { n, k } => {
                write!(f, "degree {k} outside 2..={}", n.saturating_sub(1))
            }
            Violation::OddDegreeSum { n, k } => write!(f, "n*k = {} is odd", n * k),
            Violation::AdjacencyLength { n, len } => {
                write!(f, "adjacency has {len} rows for {n} vertices")
            }
            Violation::SelfLoop { vertex } => write!(f, "self-loop at vertex {vertex}"),
            Violation::NeighborOutOfRange { vertex, neighbor } => {
                write!(f, "vertex {vertex} lists out-of-range neighbor {neighbor}")
            }
            Violation::Asymmetric { from, to } => {
                write!(f, "edge {from}->{to} has no reverse entry {to}->{from}")
            }
            Violation::Degree {
                vertex,
                found,
                expected,
            } => {
                write!(f, "vertex {vertex} has degree {found}, expected {expected}")
            }
        }
    }
}

impl Graph {
    /// Builds a graph without checking any invariant. Use [`Graph::validate`]
    /// to inspect the result.
    pub fn from_adjacency_unchecked(n: usize, k: usize, adj: Vec<VertexSet>) -> Self {
        Graph { n, k, adj }
    }

    /// Builds a graph from adjacency bitsets, rejecting anything that is not a
    /// simple k-regular graph.
    pub fn from_adjacency(n: usize, k: usize, adj: Vec<VertexSet>) -> Result<Self> {
        let g = Graph { n, k, adj };
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidGraph(join_violations(&violations)))
        }
    }

    /// Builds a graph from an undirected edge list. The degree is taken from
    /// vertex 0 and then enforced everywhere.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 || n > MAX_VERTICES {
            return Err(Error::InvalidGraph(
                Violation::VertexCount { n }.to_string(),
            ));
        }
        let mut adj = vec![0; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for n={n}"
                )));
            }
            if adj[u] & bit(v) != 0 {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            adj[u] |= bit(v);
            adj[v] |= bit(u);
        }
        let k = adj[0].count_ones() as usize;
        Graph::from_adjacency(n, k, adj)
    }

    /// Parses a whitespace-separated `u v` edge list, one edge per line,
    /// 0-indexed. Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace().map(str::parse::<usize>);
            match (fields.next(), fields.next(), fields.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two vertex indices, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Graph::from_edges(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn complete(n: usize) -> Result<Self> {
        let all = if n == MAX_VERTICES {
            u64::MAX
        } else {
            (1u64 << n) - 1
        };
        let adj = (0..n).map(|v| all & !bit(v)).collect();
        Graph::from_adjacency(n, n.saturating_sub(1), adj)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    /// Outer 5-cycle, inner pentagram, spokes between them.
    pub fn petersen() -> Self {
        let mut edges = Vec::with_capacity(15);
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
            edges.push((i, 5 + i));
        }
        Graph::from_edges(10, &edges).expect("Petersen graph is 3-regular")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, v: usize) -> VertexSet {
        self.adj[v]
    }

    pub fn adjacency(&self) -> &[VertexSet] {
        &self.adj
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u] & bit(v) != 0
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|a| a.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            members(self.adj[u] & !((bit(u) << 1).wrapping_sub(1))).map(move |v| (u, v))
        })
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for u in 0..n {
            for v in members(self.adj[u]) {
                a[u * n + v] = 1.0;
            }
        }
        a
    }

    /// All violated invariants; empty iff this is a simple k-regular graph.
    pub fn validate(&self) -> Vec<Violation> {
        let (n, k) = (self.n, self.k);
        let mut out = Vec::new();
        if !(3..=MAX_VERTICES).contains(&n) {
            out.push(Violation::VertexCount { n });
        }
        if k < 2 || k + 1 > n {
            out.push(Violation::DegreeRange { n, k });
        }
        if (n * k) % 2 == 1 {
            out.push(Violation::OddDegreeSum { n, k });
        }
        if self.adj.len() != n {
            out.push(Violation::AdjacencyLength {
                n,
                len: self.adj.len(),
            });
            return out;
        }
        let in_range = if n >= MAX_VERTICES {
            u64::MAX
        } else {
            (1u64 << n) - 1
        };
        for (v, &nb) in self.adj.iter().enumerate() {
            if nb & bit(v) != 0 {
                out.push(Violation::SelfLoop { vertex: v });
            }
            for u in members(nb & !in_range) {
                out.push(Violation::NeighborOutOfRange {
                    vertex: v,
                    neighbor: u,
                });
            }
            for u in members(nb & in_range & !bit(v)) {
                if self.adj[u] & bit(v) == 0 {
                    out.push(Violation::Asymmetric { from: v, to: u });
                }
            }
            let found = nb.count_ones() as usize;
            if found != k {
                out.push(Violation::Degree {
                    vertex: v,
                    found,
                    expected: k,
                });
            }
        }
        out
    }

    /// Breadth-first reachability from vertex 0.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = bit(0);
        let mut frontier = bit(0);
        while frontier != 0 {
            let mut next = 0;
            for v in members(frontier) {
                next |= self.adj[v];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen.count_ones() as usize == self.n
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-regular graph on {} vertices", self.k, self.n)
    }
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn check_parameters(n: usize, k: usize) -> Result<()> {
    if !(3..=MAX_VERTICES).contains(&n) {
        return Err(Error::InvalidParameters(format!(
            "n={n} outside 3..={MAX_VERTICES}"
        )));
    }
    if k < 2 || k >= n {
        return Err(Error::InvalidParameters(format!(
            "k={k} outside 2..={}",
            n - 1
        )));
    }
    if (n * k) % 2 == 1 {
        return Err(Error::InvalidParameters(format!("n*k = {n}*{k} is odd")));
    }
    Ok(())
}

/// Random connected simple k-regular graph on `n` vertices, deterministic in
/// `(n, k, seed)`.
pub fn generate_regular(n: usize, k: usize, seed: Seed) -> Result<Graph> {
    generate_regular_with_cap(n, k, seed, DEFAULT_RESTART_CAP)
}

/// Pairing model: `n*k` points grouped `k` per vertex are matched by drawing
/// uniform point pairs and keeping only pairs that join distinct,
/// non-adjacent vertices. A dead end (no legal pair left) or a disconnected
/// result restarts from scratch on the next substream of `seed`.
pub fn generate_regular_with_cap(
    n: usize,
    k: usize,
    seed: Seed,
    restart_cap: usize,
) -> Result<Graph> {
    check_parameters(n, k)?;
    for attempt in 0..=restart_cap {
        let mut rng = seed.substream(attempt as u64);
        if let Some(adj) = pair_points(n, k, &mut rng) {
            let g = Graph { n, k, adj };
            if g.is_connected() {
                return Ok(g);
            }
        }
    }
    Err(Error::GenerationExhausted {
        n,
        k,
        restarts: restart_cap,
    })
}

fn pair_points<R: Rng>(n: usize, k: usize, rng: &mut R) -> Option<Vec<VertexSet>> {
    // Each entry is the vertex owning one unmatched point.
    let mut points: Vec<usize> = (0..n * k).map(|p| p / k).collect();
    let mut adj = vec![0u64; n];
    let mut misses = 0;
    while !points.is_empty() {
        let len = points.len();
        let i = rng.gen_range(0..len);
        let mut j = rng.gen_range(0..len - 1);
        if j >= i {
            j += 1;
        }
        let (u, v) = (points[i], points[j]);
        if u != v && adj[u] & bit(v) == 0 {
            adj[u] |= bit(v);
            adj[v] |= bit(u);
            points.swap_remove(i.max(j));
            points.swap_remove(i.min(j));
            misses = 0;
        } else {
            misses += 1;
            if misses >= MISS_SCAN_INTERVAL {
                if !has_legal_pair(&points, &adj) {
                    return None;
                }
                misses = 0;
            }
        }
    }
    Some(adj)
}

fn has_legal_pair(points: &[usize], adj: &[VertexSet]) -> bool {
    let open = points.iter().fold(0u64, |acc, &v| acc | bit(v));
    members(open).any(|u| open & !adj[u] & !bit(u) != 0)
}
