//! Truncated Laurent series over a fixed exponent window.
//!
//! A [`TruncatedSeries`] stores the coefficients `c_lo, ..., c_hi` of
//! `Σ c_k w^k` densely. Every operation that can grow the window takes the
//! result window from the caller, so truncation is always explicit.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest number of coefficients a single series may hold.
pub const MAX_WINDOW: usize = 1 << 20;

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    lo: i64,
    coeffs: Vec<Complex64>,
}

fn check_window(lo: i64, hi: i64) -> Result<usize> {
    if hi < lo {
        return Err(Error::WindowOverflow { lo, hi });
    }
    let len = (hi as i128 - lo as i128 + 1) as u128;
    if len > MAX_WINDOW as u128 || lo.checked_sub(1).is_none() || hi.checked_add(1).is_none() {
        return Err(Error::WindowOverflow { lo, hi });
    }
    Ok(len as usize)
}

impl TruncatedSeries {
    /// Series with coefficients `coeffs[i]` at exponent `lo + i`.
    pub fn new(lo: i64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::WindowOverflow { lo, hi: lo - 1 });
        }
        check_window(lo, lo + coeffs.len() as i64 - 1)?;
        Ok(Self { lo, coeffs })
    }

    /// Convenience constructor for real coefficients.
    pub fn from_real(lo: i64, coeffs: &[f64]) -> Result<Self> {
        Self::new(lo, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zeros(lo: i64, hi: i64) -> Result<Self> {
        let len = check_window(lo, hi)?;
        Ok(Self {
            lo,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    /// `c · w^k` as a one-term series.
    pub fn monomial(k: i64, c: Complex64) -> Self {
        Self {
            lo: k,
            coeffs: vec![c],
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at exponent `k`; zero outside the window.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k < self.lo || k > self.hi() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k - self.lo) as usize]
        }
    }

    pub fn set_coeff(&mut self, k: i64, c: Complex64) -> Result<()> {
        if k < self.lo || k > self.hi() {
            return Err(Error::WindowOverflow { lo: k, hi: k });
        }
        let idx = (k - self.lo) as usize;
        self.coeffs[idx] = c;
        Ok(())
    }

    /// Re-window: keeps the coefficients inside `[lo, hi]`, zero-fills the rest.
    pub fn truncate(&self, lo: i64, hi: i64) -> Result<Self> {
        let len = check_window(lo, hi)?;
        let coeffs = (0..len as i64).map(|i| self.coeff(lo + i)).collect();
        Ok(Self { lo, coeffs })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Sum over the union of both windows.
    pub fn add(&self, other: &Self) -> Self {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Self { lo, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Cauchy product restricted to the window `[lo, hi]`.
    pub fn mul(&self, other: &Self, lo: i64, hi: i64) -> Result<Self> {
        let len = check_window(lo, hi)?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ea = self.lo + i as i64;
            // exponents of `other` that land inside the window
            let first = (lo - ea).max(other.lo);
            let last = (hi - ea).min(other.hi());
            for eb in first..=last {
                let b = other.coeffs[(eb - other.lo) as usize];
                coeffs[(ea + eb - lo) as usize] += a * b;
            }
        }
        Ok(Self { lo, coeffs })
    }

    /// Principal logarithm of a series `1 + a_1 w + a_2 w^2 + ...`, on `[0, hi]`.
    ///
    /// Uses the recurrence from `a · (log a)' = a'`:
    /// `k L_k = k a_k - Σ_{j=1}^{k-1} j L_j a_{k-j}`.
    pub fn log_unit(&self) -> Result<Self> {
        self.check_unit_constant()?;
        let hi = self.hi().max(0);
        let n = hi as usize;
        let a: Vec<Complex64> = (0..=hi).map(|k| self.coeff(k)).collect();
        let mut l = vec![Complex64::new(0.0, 0.0); n + 1];
        for k in 1..=n {
            let mut acc = a[k] * k as f64;
            for j in 1..k {
                acc -= l[j] * a[k - j] * j as f64;
            }
            l[k] = acc / k as f64;
        }
        Self::new(0, l)
    }

    /// Exponential of a power series (no negative exponents), on `[0, hi]`.
    ///
    /// `E' = a' E` gives `k E_k = Σ_{j=1}^{k} j a_j E_{k-j}`.
    pub fn exp(&self) -> Result<Self> {
        self.check_no_negative_powers()?;
        let hi = self.hi().max(0);
        let n = hi as usize;
        let a: Vec<Complex64> = (0..=hi).map(|k| self.coeff(k)).collect();
        let mut e = vec![Complex64::new(0.0, 0.0); n + 1];
        e[0] = a[0].exp();
        for k in 1..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                acc += a[j] * e[k - j] * j as f64;
            }
            e[k] = acc / k as f64;
        }
        Self::new(0, e)
    }

    /// Termwise derivative; the window shifts down by one.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * (self.lo + i as i64) as f64)
            .collect();
        Self {
            lo: self.lo - 1,
            coeffs,
        }
    }

    /// Termwise antiderivative with zero constant of integration.
    ///
    /// Fails when the `w^-1` coefficient is nonzero.
    pub fn antiderivative(&self) -> Result<Self> {
        let residue = self.coeff(-1);
        if residue != Complex64::new(0.0, 0.0) {
            return Err(Error::LogarithmicTerm(residue.to_string()));
        }
        check_window(self.lo + 1, self.hi() + 1)?;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = self.lo + i as i64;
                if k == -1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c / (k + 1) as f64
                }
            })
            .collect();
        Ok(Self {
            lo: self.lo + 1,
            coeffs,
        })
    }

    /// Evaluates the truncated sum at `w` (Horner on both halves).
    pub fn eval(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        if self.lo >= 0 {
            acc * w.powi(self.lo as i32)
        } else {
            acc / w.powi((-self.lo) as i32)
        }
    }

    fn check_no_negative_powers(&self) -> Result<()> {
        for k in self.lo..0 {
            if self.coeff(k) != Complex64::new(0.0, 0.0) {
                return Err(Error::InvalidNormalization(format!(
                    "nonzero coefficient at exponent {k}"
                )));
            }
        }
        Ok(())
    }

    fn check_unit_constant(&self) -> Result<()> {
        self.check_no_negative_powers()?;
        let c0 = self.coeff(0);
        if (c0 - Complex64::new(1.0, 0.0)).norm() > UNIT_TOLERANCE {
            return Err(Error::InvalidNormalization(c0.to_string()));
        }
        Ok(())
    }
}
