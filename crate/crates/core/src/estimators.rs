//! Closed-form estimators of the Cheeger constant: spectral bounds, the
//! relative deviation metric, and least-squares fits on the top eigenvalues.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking `|λ1| ≤ k`.
const SPECTRUM_SLACK: f64 = 1e-9;
/// Relative pivot threshold below which the normal equations are singular.
const RANK_TOLERANCE: f64 = 1e-12;

/// Spectral lower and upper bounds on `h(G)` for a connected k-regular graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    /// `(k − λ1)/2`
    pub lower: f64,
    /// `√(2k(k − λ1))`
    pub upper_gap: f64,
    /// `(k/2)·n/(n−1)` for even n, `(k/2)·(n+1)/(n−1)` for odd n.
    pub upper_mohar_size: f64,
    /// `√(k² − λ1²)`; `None` for n = 3, where it does not apply.
    pub upper_mohar_spec: Option<f64>,
    /// Smallest applicable upper bound.
    pub upper: f64,
}

pub fn bounds(k: usize, n: usize, lambda1: f64) -> Result<BoundSet> {
    if k < 2 || k >= n {
        return Err(Error::InvalidParameters(format!("k={k} outside 2..{n}")));
    }
    let kf = k as f64;
    if !lambda1.is_finite() || lambda1.abs() > kf + SPECTRUM_SLACK {
        return Err(Error::InvalidSpectrum { k, lambda1 });
    }
    let l1 = lambda1.clamp(-kf, kf);
    let nf = n as f64;
    let lower = (kf - l1) / 2.0;
    let upper_gap = (2.0 * kf * (kf - l1)).sqrt();
    let upper_mohar_size = if n.is_multiple_of(2) {
        kf / 2.0 * (nf / (nf - 1.0))
    } else {
        kf / 2.0 * ((nf + 1.0) / (nf - 1.0))
    };
    // K3 is the only simple regular graph on three vertices.
    let upper_mohar_spec = (n > 3).then(|| (kf * kf - l1 * l1).sqrt());
    let upper = upper_mohar_spec
        .into_iter()
        .fold(upper_gap.min(upper_mohar_size), f64::min);
    Ok(BoundSet {
        lower,
        upper_gap,
        upper_mohar_size,
        upper_mohar_spec,
        upper,
    })
}

/// Relative deviation `|h_est − h_true| / h_true`.
pub fn deviation(h_est: f64, h_true: f64) -> Result<f64> {
    if !(h_true > 0.0) {
        return Err(Error::DivisionByZero(h_true));
    }
    Ok(((h_est - h_true) / h_true).abs())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by N).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// One training example: the leading eigenvalues and the exact `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Sample { features, target }
    }
}

/// `h ≈ Σ coeffs[i]·λi + intercept` over the `m` largest eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coeffs: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(coeffs: Vec<f64>, intercept: f64) -> Self {
        LinearModel { coeffs, intercept }
    }

    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        predict_linear(self, features)
    }

    /// Plain-text `key = value` form with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# cheeger linear model v1\n");
        let _ = writeln!(out, "m = {}", self.m());
        let coeffs: Vec<String> = self.coeffs.iter().map(|c| format!("{c:.16e}")).collect();
        let _ = writeln!(out, "coeffs = {}", coeffs.join(" "));
        let _ = writeln!(out, "intercept = {:.16e}", self.intercept);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = None;
        let mut coeffs = None;
        let mut intercept = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected `key = value`, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "m" => {
                    m = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| Error::Parse(e.to_string()))?,
                    )
                }
                "coeffs" => coeffs = Some(parse_reals(value)?),
                "intercept" => intercept = Some(parse_real(value)?),
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        let (m, coeffs, intercept) = match (m, coeffs, intercept) {
            (Some(m), Some(c), Some(i)) => (m, c, i),
            _ => {
                return Err(Error::Parse(
                    "linear model needs m, coeffs and intercept".into(),
                ))
            }
        };
        if coeffs.len() != m {
            return Err(Error::Parse(format!(
                "m = {m} but {} coefficients",
                coeffs.len()
            )));
        }
        Ok(LinearModel { coeffs, intercept })
    }
}

pub(crate) fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

pub(crate) fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(parse_real).collect()
}

pub fn predict_linear(model: &LinearModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.m() {
        return Err(Error::ArityMismatch {
            expected: model.m(),
            found: features.len(),
        });
    }
    Ok(model
        .coeffs
        .iter()
        .zip(features)
        .fold(model.intercept, |acc, (c, x)| acc + c * x))
}

/// Ordinary least squares with intercept. The normal equations are formed on
/// mean-centred columns and solved by Gaussian elimination with partial
/// pivoting.
pub fn fit_linear(samples: &[Sample]) -> Result<LinearModel> {
    let m = samples.first().map_or(0, |s| s.features.len());
    if m == 0 {
        return Err(Error::InsufficientData("no features".into()));
    }
    if samples.len() < m + 2 {
        return Err(Error::InsufficientData(format!(
            "{} samples for {m} features; need at least {}",
            samples.len(),
            m + 2
        )));
    }
    if let Some(bad) = samples.iter().find(|s| s.features.len() != m) {
        return Err(Error::ArityMismatch {
            expected: m,
            found: bad.features.len(),
        });
    }

    let count = samples.len() as f64;
    let x_mean: Vec<f64> = (0..m)
        .map(|j| samples.iter().map(|s| s.features[j]).sum::<f64>() / count)
        .collect();
    let y_mean = samples.iter().map(|s| s.target).sum::<f64>() / count;

    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for s in samples {
        let y = s.target - y_mean;
        for i in 0..m {
            let xi = s.features[i] - x_mean[i];
            rhs[i] += xi * y;
            for j in 0..m {
                gram[i * m + j] += xi * (s.features[j] - x_mean[j]);
            }
        }
    }
    let coeffs = solve_symmetric(gram, rhs, m)?;
    let intercept = y_mean - coeffs.iter().zip(&x_mean).map(|(c, x)| c * x).sum::<f64>();
    Ok(LinearModel { coeffs, intercept })
}

fn solve_symmetric(mut a: Vec<f64>, mut b: Vec<f64>, m: usize) -> Result<Vec<f64>> {
    let scale = (0..m).map(|i| a[i * m + i].abs()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::RankDeficient);
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r, &s| a[r * m + col].abs().total_cmp(&a[s * m + col].abs()))
            .unwrap();
        if a[pivot * m + col].abs() <= RANK_TOLERANCE * scale {
            return Err(Error::RankDeficient);
        }
        if pivot != col {
            for j in 0..m {
                a.swap(pivot * m + j, col * m + j);
            }
            b.swap(pivot, col);
        }
        for r in (col + 1)..m {
            let f = a[r * m + col] / a[col * m + col];
            for j in col..m {
                a[r * m + j] -= f * a[col * m + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = ((r + 1)..m).map(|j| a[r * m + j] * x[j]).sum();
        x[r] = (b[r] - tail) / a[r * m + r];
    }
    Ok(x)
}
