//! Quadratic differentials on the disk: the squares `ψ_x = ω_x²` built from
//! `l²` vectors, polynomial differentials and concentrating Cauchy kernels.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::beltrami::BeltramiField;
use crate::error::{Error, Result};
use crate::quadrature::PolarGrid;

/// Doubling check tolerance for [`a1_norm`], relative.
pub const A1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum QuadForm {
    /// `ψ = ω²`, `ω = π^{-1/2} Σ √n x_n z^{n-1}`; `coeffs` holds ψ expanded.
    Abelian {
        x: Vec<Complex64>,
        coeffs: Vec<Complex64>,
    },
    /// `Σ p_k z^k`, not necessarily a square.
    Polynomial { coeffs: Vec<Complex64> },
    /// `c (1 - r z̄0 z)^{-4}`.
    Kernel { z0: Complex64, r: f64, c: f64 },
}

/// A holomorphic quadratic differential `ψ(z) dz²` on the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadDifferential {
    form: QuadForm,
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

impl QuadDifferential {
    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        Self {
            form: QuadForm::Polynomial { coeffs },
        }
    }

    pub fn form(&self) -> &QuadForm {
        &self.form
    }

    /// Defining vector for `ψ_x`.
    pub fn x(&self) -> Option<&[Complex64]> {
        match &self.form {
            QuadForm::Abelian { x, .. } => Some(x),
            _ => None,
        }
    }

    /// Polynomial coefficients, when `ψ` is a polynomial.
    pub fn coefficients(&self) -> Option<&[Complex64]> {
        match &self.form {
            QuadForm::Abelian { coeffs, .. } | QuadForm::Polynomial { coeffs } => Some(coeffs),
            QuadForm::Kernel { .. } => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.form {
            QuadForm::Abelian { coeffs, .. } | QuadForm::Polynomial { coeffs } => horner(coeffs, z),
            QuadForm::Kernel { z0, r, c } => {
                let d = Complex64::new(1.0, 0.0) - z0.conj() * z * *r;
                let d2 = d * d;
                *c / (d2 * d2)
            }
        }
    }

    /// A holomorphic square root `ω` with `ω² = ψ`, when one is known.
    pub fn omega(&self, z: Complex64) -> Option<Complex64> {
        match &self.form {
            QuadForm::Abelian { x, .. } => {
                let coeffs: Vec<Complex64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &xn)| xn * ((i + 1) as f64 / PI).sqrt())
                    .collect();
                Some(horner(&coeffs, z))
            }
            QuadForm::Kernel { z0, r, c } => {
                let d = Complex64::new(1.0, 0.0) - z0.conj() * z * *r;
                Some(c.sqrt() / (d * d))
            }
            QuadForm::Polynomial { .. } => None,
        }
    }

    /// Grid on which `|ψ|` is resolved: uniform for polynomials, graded
    /// toward `z0` for kernels. `order` is the radial node count of the
    /// uniform grid, or an extra refinement level for kernels.
    pub fn natural_grid(&self, order: usize) -> PolarGrid {
        match &self.form {
            QuadForm::Kernel { z0, r, .. } => {
                let level = (-(1.0 - r).log2()).round() as u32;
                PolarGrid::concentrated(z0.arg(), level + order as u32)
            }
            _ => PolarGrid::uniform(order, 4 * order),
        }
    }
}

/// `ψ_x(z) = π⁻¹ Σ_{m,n} √(mn) x_m x_n z^{m+n-2}`, summed over ordered pairs.
pub fn psi_from_x(x: &[Complex64]) -> Result<QuadDifferential> {
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::OutOfRange("direction vector must be nonzero".into()));
    }
    let n = x.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for (i, &xm) in x.iter().enumerate() {
        for (j, &xn) in x.iter().enumerate() {
            let w = (((i + 1) * (j + 1)) as f64).sqrt() / PI;
            coeffs[i + j] += xm * xn * w;
        }
    }
    Ok(QuadDifferential {
        form: QuadForm::Abelian {
            x: x.to_vec(),
            coeffs,
        },
    })
}

/// `‖ψ‖_{A₁} = ∬_𝔻 |ψ|`, checked under doubling of the quadrature order.
pub fn a1_norm(psi: &QuadDifferential, quad_order: usize) -> Result<f64> {
    let order = quad_order.max(4);
    let coarse = integrate_abs(psi, &psi.natural_grid(order));
    let fine_order = match psi.form {
        QuadForm::Kernel { .. } => order + 2,
        _ => 2 * order,
    };
    let fine = integrate_abs(psi, &psi.natural_grid(fine_order));
    if (fine - coarse).abs() > A1_TOL * fine.max(1e-300) {
        return Err(Error::QuadratureDiverged((fine - coarse).abs()));
    }
    Ok(fine)
}

fn integrate_abs(psi: &QuadDifferential, grid: &PolarGrid) -> f64 {
    grid.points()
        .zip(grid.weights())
        .map(|(z, w)| psi.eval(z).norm() * w)
        .sum()
}

/// `ψ_p = c_p (1 - r_p z̄0 z)^{-4}` with `r_p = 1 - 2^{-p}` and unit `A₁` norm.
///
/// `∬ |1 - r z̄0 z|^{-4} = π / (1 - r²)²`, so `c_p = (1 - r_p²)² / π`.
pub fn concentrating_sequence(z0: Complex64, p: u32) -> Result<QuadDifferential> {
    if (z0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange(format!("|z0| = {} must be 1", z0.norm())));
    }
    if p == 0 || p > 48 {
        return Err(Error::OutOfRange(format!("p = {p} must lie in 1..=48")));
    }
    let r = 1.0 - 0.5f64.powi(p as i32);
    let c = (1.0 - r * r).powi(2) / PI;
    Ok(QuadDifferential {
        form: QuadForm::Kernel { z0, r, c },
    })
}

/// `k |ψ| / ψ` sampled on `grid`.
pub fn teichmuller_beltrami(
    psi: &QuadDifferential,
    k: f64,
    grid: &PolarGrid,
) -> Result<BeltramiField> {
    BeltramiField::teichmuller(psi.clone(), k, grid)
}
