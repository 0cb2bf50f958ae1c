//! Fixtures shared by the benchmarks.

use grunsky_core::{
    BeltramiField, Complex64, ExteriorMapSpec, PolarGrid, PolygonSpec, QuadDifferential,
};

/// The solved exterior map of the unit square.
pub fn square_map() -> ExteriorMapSpec {
    ExteriorMapSpec::solve(&PolygonSpec::unit_square(), 1e-12)
        .expect("the square solves")
        .0
}

/// A Teichmüller coefficient `k |ψ|/ψ` for a small polynomial `ψ`.
pub fn teichmuller_field(k: f64, grid: &PolarGrid) -> BeltramiField {
    let psi = QuadDifferential::polynomial(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.5),
        Complex64::new(0.25, 0.0),
    ]);
    BeltramiField::teichmuller(psi, k, grid).expect("k < 1")
}
