//! Adjacency spectra via cyclic Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;

/// Absolute tolerance of the trace, Frobenius and Perron checks.
pub const CHECK_TOLERANCE: f64 = 1e-8;

/// Eigenvalues of a symmetric matrix, sorted in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` descending. Ties keep their input order.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `m` largest eigenvalues, λ0 first.
    pub fn top(&self, m: usize) -> &[f64] {
        &self.values[..m.min(self.values.len())]
    }

    pub fn lambda1(&self) -> Option<f64> {
        self.values.get(1).copied()
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    /// Consistency checks for the spectrum of a connected k-regular graph:
    /// zero trace, `Σλ² = n·k`, `λ0 = k`, and `|λi| ≤ k`.
    pub fn regular_violations(&self, k: usize) -> Vec<String> {
        let n = self.values.len() as f64;
        let k = k as f64;
        let mut out = Vec::new();
        let trace = self.trace();
        if trace.abs() > CHECK_TOLERANCE * n {
            out.push(format!("trace {trace:e} is not zero"));
        }
        let sq = self.sum_of_squares();
        if (sq - n * k).abs() > CHECK_TOLERANCE * n * n {
            out.push(format!("sum of squares {sq} differs from n*k = {}", n * k));
        }
        match self.values.first() {
            Some(&l0) if (l0 - k).abs() <= CHECK_TOLERANCE => {}
            Some(&l0) => out.push(format!("largest eigenvalue {l0} differs from k = {k}")),
            None => out.push("empty spectrum".to_string()),
        }
        if let Some(&x) = self.values.iter().find(|x| x.abs() > k + CHECK_TOLERANCE) {
            out.push(format!("eigenvalue {x} exceeds k = {k} in magnitude"));
        }
        out
    }
}

/// Full adjacency spectrum of `g`, iterating Jacobi sweeps until the
/// off-diagonal Frobenius norm drops below `tol`.
pub fn spectrum(g: &Graph, tol: f64) -> Result<Spectrum> {
    let n = g.n();
    let values = symmetric_eigenvalues(g.adjacency_matrix(), n, tol)?;
    Ok(Spectrum::from_values(values))
}

/// `k − λ1`.
pub fn spectral_gap(s: &Spectrum, k: usize) -> Result<f64> {
    match s.lambda1() {
        Some(l1) => Ok(k as f64 - l1),
        None => Err(Error::DegenerateSpectrum(s.len())),
    }
}

/// Eigenvalues (unsorted) of the symmetric `n × n` row-major matrix `a`.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    assert!(tol > 0.0, "tolerance must be positive");
    for _ in 0..=MAX_SWEEPS {
        if off_diagonal_norm(&a, n) < tol {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        sweep(&mut a, n);
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[i * n + j] * a[i * n + j];
        }
    }
    (2.0 * s).sqrt()
}

fn sweep(a: &mut [f64], n: usize) {
    for p in 0..n {
        for q in (p + 1)..n {
            let apq = a[p * n + q];
            if apq == 0.0 {
                continue;
            }
            let app = a[p * n + p];
            let aqq = a[q * n + q];
            // Smaller-angle root of t² + 2θt − 1 = 0.
            let theta = (aqq - app) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for r in 0..n {
                if r == p || r == q {
                    continue;
                }
                let arp = a[r * n + p];
                let arq = a[r * n + q];
                let new_rp = c * arp - s * arq;
                let new_rq = s * arp + c * arq;
                a[r * n + p] = new_rp;
                a[p * n + r] = new_rp;
                a[r * n + q] = new_rq;
                a[q * n + r] = new_rq;
            }
            a[p * n + p] = app - t * apq;
            a[q * n + q] = aqq + t * apq;
            a[p * n + q] = 0.0;
            a[q * n + p] = 0.0;
        }
    }
}
