//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Unit vector `x` with `|xᵀ A x| = σ_max(A)` for complex symmetric `A`.
///
/// With `A = U Σ Vᴴ` and `A` symmetric, the top right singular vector is a
/// phase multiple of `conj(u_1)`, so `v_1ᵀ A v_1 = σ_1 e^{iφ}`.
pub fn takagi_vector(a: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = a.ncols();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (top, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &s)| {
                if s > best.1 {
                    (i, s)
                } else {
                    best
                }
            });
    // rows of Vᴴ are conjugated right singular vectors
    DVector::from_iterator(n, v_t.row(top).iter().map(|z| z.conj()))
}

/// `xᵀ A x` without conjugation.
pub fn bilinear(a: &DMatrix<Complex64>, x: &DVector<Complex64>) -> Complex64 {
    (x.transpose() * a * x)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn takagi_vector_attains_norm() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(0.3, 0.1),
                Complex64::new(0.0, 0.2),
                Complex64::new(-0.1, 0.0),
                Complex64::new(0.0, 0.2),
                Complex64::new(0.1, -0.4),
                Complex64::new(0.05, 0.05),
                Complex64::new(-0.1, 0.0),
                Complex64::new(0.05, 0.05),
                Complex64::new(0.2, 0.0),
            ],
        );
        let x = takagi_vector(&a);
        assert!((x.norm() - 1.0).abs() < 1e-12);
        assert!((bilinear(&a, &x).norm() - spectral_norm(&a)).abs() < 1e-12);
    }
}
