use std::f64::consts::TAU;
use std::sync::Arc;

use grunsky_core::beltrami::{
    ahlfors_weill, boundary_probe, infinitesimal_grunsky, pairing, teich_norm_bracket,
};
use grunsky_core::quaddiff::{a1_norm, psi_from_x};
use grunsky_core::scmap::b_norm;
use grunsky_core::{
    BeltramiField, BracketOptions, Complex64, EllipseMap, PolarGrid, QuadDifferential,
};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn arb_complex(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

fn arb_x() -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec(arb_complex(1.0), 1..=6)
        .prop_filter("nonzero", |v| v.iter().any(|z| z.norm() > 1e-3))
}

/// Fields with closed forms: constants, Teichmüller coefficients of small
/// polynomials, and a smooth non-extremal `t z̄ (1 - |z|²)`.
fn arb_field() -> impl Strategy<Value = BeltramiField> {
    let grid = PolarGrid::uniform(24, 64);
    let g1 = grid.clone();
    let g2 = grid.clone();
    prop_oneof![
        arb_complex(0.6).prop_map(move |t| BeltramiField::constant(t, &grid).unwrap()),
        (
            proptest::collection::vec(arb_complex(1.0), 1..=3),
            0.05f64..0.9
        )
            .prop_filter("nonzero", |(p, _)| p[0].norm() > 0.1)
            .prop_map(move |(p, k)| BeltramiField::teichmuller(
                QuadDifferential::polynomial(p),
                k,
                &g1
            )
            .unwrap()),
        arb_complex(0.6).prop_map(move |t| {
            let samples = g2
                .points()
                .map(|z| t * z.conj() * (1.0 - z.norm_sqr()))
                .collect();
            BeltramiField::sampled(&g2, samples).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn pairing_obeys_holder(mu in arb_field(), x in arb_x()) {
        let psi = psi_from_x(&x).unwrap();
        let bound = mu.sup_norm() * a1_norm(&psi, 32).unwrap();
        prop_assert!(pairing(&mu, &psi).norm() <= bound * (1.0 + 1e-9) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn grunsky_functional_below_sup_norm(mu in arb_field()) {
        let alpha = infinitesimal_grunsky(&mu, 8);
        let bracket = teich_norm_bracket(&mu, 4, &BracketOptions { restarts: 4, iterations: 200, seed: 1 });
        prop_assert!(bracket.lower <= bracket.upper + 1e-12);
        prop_assert!(alpha <= bracket.upper + 1e-9, "{} > {}", alpha, bracket.upper);
        if bracket.maximizer_in_a2 {
            prop_assert!(alpha <= bracket.lower + 1e-6);
        }
    }

    #[test]
    fn ahlfors_weill_stays_below_half_the_norm(b in 0.01f64..0.5, arg in 0.0f64..TAU, scale in 0.1f64..1.0) {
        let map = Arc::new(EllipseMap::new(Complex64::from_polar(b, arg)).unwrap());
        let phi_norm = b_norm(map.as_ref(), 64).unwrap().best();
        match ahlfors_weill(map, scale, &PolarGrid::uniform(16, 32)) {
            Ok(nu) => prop_assert!(nu.sup_norm() <= 0.5 * scale * phi_norm * (1.0 + 1e-6)),
            Err(_) => prop_assert!(scale * phi_norm >= 2.0),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn teichmuller_probes_die_out(p in proptest::collection::vec(arb_complex(1.0), 1..=3), k in 0.1f64..0.9, theta in 0.0f64..TAU) {
        prop_assume!(p[0].norm() > 0.1);
        let mu = BeltramiField::teichmuller(QuadDifferential::polynomial(p), k, &PolarGrid::standard()).unwrap();
        let report = boundary_probe(&mu, Complex64::from_polar(1.0, theta), 12).unwrap();
        prop_assert!(report.values.last().unwrap().value < 0.05 * k);
    }
}

#[test]
fn zero_field_probes_are_zero() {
    let mu = BeltramiField::zero(&PolarGrid::standard());
    let report = boundary_probe(&mu, c(0.0, 1.0), 8).unwrap();
    assert!(report.values.iter().all(|v| v.value == 0.0));
    assert_eq!(report.limit, 0.0);
}
