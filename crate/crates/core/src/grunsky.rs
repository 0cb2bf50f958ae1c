//! Grunsky coefficients, the truncated Grunsky matrix and its norm.
//!
//! For `F(z) = z + b_0 + b_1/z + ...` put `u = 1/z`, `v = 1/ζ`. Then
//!
//! ```text
//! (F(z) - F(ζ)) / (z - ζ) = 1 - Σ_{p,q ≥ 1} b_{p+q-1} u^p v^q
//! ```
//!
//! and `α_mn` is minus the `u^m v^n` coefficient of its logarithm. The log is
//! taken with the usual recurrence in `u`, each coefficient being a
//! truncated series in `v`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::series::TruncatedSeries;

/// `B_mn = √(mn) α_mn`, `1 ≤ m, n ≤ N`, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GrunskyMatrix {
    entries: DMatrix<Complex64>,
}

impl GrunskyMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::OutOfRange(format!(
                "Grunsky matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `B_mn` with one-based indices.
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m - 1, n - 1)]
    }

    /// `α_mn = B_mn / √(mn)`.
    pub fn alpha(&self, m: usize, n: usize) -> Complex64 {
        self.get(m, n) / ((m * n) as f64).sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).norm());
            }
        }
        worst
    }

    /// Leading principal `n × n` block.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n());
        Self {
            entries: self.entries.view((0, 0), (n, n)).into_owned(),
        }
    }
}

/// Builds `B` from the Laurent series of a `Σ⁰` map (`coeff(-1) = 1`,
/// `coeff(k) = b_k`). Needs `b_1 .. b_{2N-1}`.
pub fn grunsky_matrix(b: &TruncatedSeries, n: usize) -> Result<GrunskyMatrix> {
    if n == 0 {
        return Ok(GrunskyMatrix::zeros(0));
    }
    let needed = 2 * n as i64 - 1;
    if b.hi() < needed {
        return Err(Error::InsufficientOrder {
            needed: needed as usize,
            available: b.hi().max(0) as usize,
        });
    }
    let lead = b.coeff(-1);
    if (lead - 1.0).norm() > 1e-10 || b.lo() < -1 {
        return Err(Error::InvalidNormalization(lead.to_string()));
    }

    let top = n as i64;
    // Q_p(v) = -Σ_q b_{p+q-1} v^q
    let q: Vec<TruncatedSeries> = (0..=n)
        .map(|p| {
            let mut s = TruncatedSeries::zeros(0, top)?;
            if p == 0 {
                s.set_coeff(0, Complex64::new(1.0, 0.0))?;
            } else {
                for qq in 1..=top {
                    s.set_coeff(qq, -b.coeff(p as i64 + qq - 1))?;
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    // p L_p = p Q_p - Σ_{j<p} j L_j Q_{p-j}
    let mut logs: Vec<TruncatedSeries> = vec![TruncatedSeries::zeros(0, top)?];
    for p in 1..=n {
        let mut acc = q[p].scale(Complex64::new(p as f64, 0.0));
        for j in 1..p {
            let term = logs[j].mul(&q[p - j], 0, top)?;
            acc = acc.sub(&term.scale(Complex64::new(j as f64, 0.0)));
        }
        logs.push(acc.scale(Complex64::new(1.0 / p as f64, 0.0)));
    }

    let mut entries = DMatrix::zeros(n, n);
    for m in 1..=n {
        for k in 1..=n {
            let alpha = -logs[m].coeff(k as i64);
            entries[(m - 1, k - 1)] = alpha * ((m * k) as f64).sqrt();
        }
    }
    // symmetric in exact arithmetic; remove rounding asymmetry
    let sym = (&entries + entries.transpose()) * Complex64::new(0.5, 0.0);
    Ok(GrunskyMatrix { entries: sym })
}

/// `κ_N = σ_max(B) = sup_{‖x‖=1} |xᵀBx|` (Takagi).
pub fn grunsky_norm(b: &GrunskyMatrix) -> f64 {
    linalg::spectral_norm(&b.entries)
}

/// A maximizing unit direction for [`grunsky_norm`].
pub fn grunsky_direction(b: &GrunskyMatrix) -> Vec<Complex64> {
    linalg::takagi_vector(&b.entries).iter().cloned().collect()
}

/// `h_x = xᵀBx` for a unit vector `x`; shorter `x` are padded with zeros.
pub fn h_x(b: &GrunskyMatrix, x: &[Complex64]) -> Result<Complex64> {
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitVector(norm));
    }
    if x.len() > b.n() {
        return Err(Error::InsufficientOrder {
            needed: x.len(),
            available: b.n(),
        });
    }
    let padded = DVector::from_iterator(
        b.n(),
        x.iter()
            .cloned()
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(b.n()),
    );
    Ok(linalg::bilinear(&b.entries, &padded))
}

/// Upper bound on the Grunsky norm of a map with extremal dilatation `k`
/// whose extremal coefficient has infinitesimal Grunsky norm `alpha ≤ k`.
///
/// `alpha` enters relative to `k`: with `a = alpha / k` the bound reads
/// `k (k + a) / (1 + a k) = (k² + alpha) / (1 + alpha)`, which is `k` exactly
/// when `alpha = k` and `k²` when `alpha = 0`.
pub fn lemma1_bound(k: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::OutOfRange(format!("k = {k} must lie in [0, 1)")));
    }
    if !(alpha >= 0.0 && alpha <= k) {
        return Err(Error::OutOfRange(format!(
            "alpha = {alpha} must lie in [0, k = {k}]"
        )));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let a = alpha / k;
    Ok(k * (k + a) / (1.0 + a * k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "kappa_N")]
    pub kappa_n: f64,
    /// Increment over the previous row (0 for the first).
    pub delta: f64,
}

/// `κ_N` over a list of truncations with a limit estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub monotone: bool,
    pub below_one: bool,
    pub extrapolated: f64,
    pub uncertainty: f64,
}

/// Computes `κ_N` for every `N` in `n_list` (sorted ascending).
pub fn convergence_report(b: &TruncatedSeries, n_list: &[usize]) -> Result<ConvergenceReport> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let max_n = ns.last().copied().unwrap_or(0);
    let full = grunsky_matrix(b, max_n)?;
    let kappas: Vec<f64> = ns
        .par_iter()
        .map(|&n| grunsky_norm(&full.truncated(n)))
        .collect();

    let rows: Vec<ConvergenceRow> = ns
        .iter()
        .zip(&kappas)
        .enumerate()
        .map(|(i, (&n, &kappa_n))| ConvergenceRow {
            n,
            kappa_n,
            delta: if i == 0 { 0.0 } else { kappa_n - kappas[i - 1] },
        })
        .collect();
    // principal blocks can only grow σ_max; allow rounding
    let monotone = rows.iter().skip(1).all(|r| r.delta >= -1e-12);
    let below_one = kappas.iter().all(|&k| k < 1.0);
    let last = kappas.last().copied().unwrap_or(0.0);
    let uncertainty = rows.last().map(|r| r.delta.abs()).unwrap_or(0.0);
    let extrapolated = extrapolate(&kappas).unwrap_or(last);
    Ok(ConvergenceReport {
        rows,
        monotone,
        below_one,
        extrapolated,
        uncertainty,
    })
}

/// Aitken's Δ² on the last three terms when the increments shrink geometrically.
fn extrapolate(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (values[n - 3], values[n - 2], values[n - 1]);
    let (d1, d2) = (b - a, c - b);
    if d1 <= 0.0 || d2 <= 0.0 || d2 >= d1 {
        return None;
    }
    Some((c + d2 * d2 / (d1 - d2)).min(1.0))
}
