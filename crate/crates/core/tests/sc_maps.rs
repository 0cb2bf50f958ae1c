use std::f64::consts::PI;

use grunsky_core::grunsky::{grunsky_matrix, grunsky_norm};
use grunsky_core::{Complex64, ExteriorMap, ExteriorMapSpec, PolygonSpec};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Tanh-sinh rule on `[a, b]`; copes with the square-root endpoint behaviour.
fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let h = 1.0 / 64.0;
    let mut sum = 0.0;
    for k in -448i32..=448 {
        let t = k as f64 * h;
        let u = PI / 2.0 * t.sinh();
        let x = u.tanh();
        let w = PI / 2.0 * t.cosh() / u.cosh().powi(2);
        if 1.0 - x.abs() < 1e-300 {
            continue;
        }
        sum += w * f(mid + half * x);
    }
    sum * h * half
}

/// Length of the side over the arc `(lo, hi)` for a rectangle's prevertices
/// `±g/2, π ± g/2`, up to the common factor `|d₁|`.
fn side(g: f64, lo: f64, hi: f64) -> f64 {
    let angles = [g / 2.0, PI - g / 2.0, PI + g / 2.0, -g / 2.0];
    tanh_sinh(
        |phi| {
            angles
                .iter()
                .map(|&a| (2.0 * ((phi - a) / 2.0).sin()).abs().sqrt())
                .product::<f64>()
        },
        lo,
        hi,
    )
}

/// Arc between the prevertices of a side of length `aspect` (the other side 1).
fn rectangle_gap(aspect: f64) -> f64 {
    let ratio = |g: f64| side(g, -g / 2.0, g / 2.0) / side(g, g / 2.0, PI - g / 2.0) - aspect;
    let (mut lo, mut hi) = (1e-6, PI - 1e-6);
    for _ in 0..80 {
        let m = (lo + hi) / 2.0;
        if ratio(m) > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    (lo + hi) / 2.0
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let s = ((p - a) * d.conj()).re / d.norm_sqr();
    (p - (a + d * s.clamp(0.0, 1.0))).norm()
}

fn boundary_deviation(map: &ExteriorMapSpec, vertices: &[Complex64; 4], samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let w = map
                .evaluate(Complex64::from_polar(
                    1.0,
                    2.0 * PI * k as f64 / samples as f64,
                ))
                .unwrap();
            (0..4)
                .map(|j| segment_distance(w, vertices[j], vertices[(j + 1) % 4]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn aspect_two_rectangle_matches_bisection() {
    let gap = rectangle_gap(2.0);
    let (map, report) =
        ExteriorMapSpec::solve(&PolygonSpec::rectangle(2.0, 1.0).unwrap(), 1e-12).unwrap();
    assert!(report.residual < 1e-8, "{report:?}");
    let mut gaps = map.prevertex_gaps();
    gaps.sort_by(f64::total_cmp);
    let mut expected = [gap, gap, PI - gap, PI - gap];
    expected.sort_by(f64::total_cmp);
    for (g, e) in gaps.iter().zip(expected) {
        assert!((g - e).abs() < 1e-8, "{gaps:?} vs {expected:?}");
    }
}

#[test]
fn unit_aspect_gives_equal_arcs() {
    assert!((rectangle_gap(1.0) - PI / 2.0).abs() < 1e-12);
}

#[test]
fn general_quadrilateral_traces_its_boundary() {
    let v = [c(0.0, 0.0), c(2.0, 0.0), c(2.5, 1.5), c(0.3, 1.2)];
    let (map, _) = ExteriorMapSpec::solve(&PolygonSpec::new(v).unwrap(), 1e-12).unwrap();
    assert!(boundary_deviation(&map, &v, 256) < 1e-6);
    for (e, a) in map.prevertices().iter().zip(&v) {
        assert!((e.norm() - 1.0).abs() < 1e-12);
        assert!((map.evaluate(*e).unwrap() - a).norm() < 1e-9);
    }
    let laurent = map.laurent_coeffs(8).unwrap();
    assert!((laurent.coeff(-1) - 1.0).norm() < 1e-10);
}

#[test]
fn rectangle_grunsky_matrix_is_even() {
    // F(-z) = -F(z) for a centred rectangle, so B_mn = 0 unless m + n is even.
    let (map, _) =
        ExteriorMapSpec::solve(&PolygonSpec::rectangle(2.0, 1.0).unwrap(), 1e-12).unwrap();
    let b = grunsky_matrix(&map.laurent_coeffs(32).unwrap(), 16).unwrap();
    for m in 1..=16 {
        for n in 1..=16 {
            if (m + n) % 2 == 1 {
                assert!(b.get(m, n).norm() < 1e-10, "B_{m}{n} = {}", b.get(m, n));
            }
        }
    }
    let kappa = grunsky_norm(&b);
    assert!(kappa > 0.0 && kappa < 1.0);
}

#[test]
fn square_grunsky_matrix_has_fourfold_pattern() {
    let (map, _) = ExteriorMapSpec::solve(&PolygonSpec::unit_square(), 1e-12).unwrap();
    let b = grunsky_matrix(&map.laurent_coeffs(32).unwrap(), 16).unwrap();
    for m in 1..=16 {
        for n in 1..=16 {
            if (m + n) % 4 != 0 {
                assert!(b.get(m, n).norm() < 1e-10);
            }
        }
    }
}

fn convex_quad() -> impl Strategy<Value = [Complex64; 4]> {
    // Perturbed corners of the square stay convex for offsets below 0.2.
    proptest::array::uniform4((-0.15f64..0.15, -0.15f64..0.15)).prop_map(|d| {
        let base = [c(0.5, 0.5), c(-0.5, 0.5), c(-0.5, -0.5), c(0.5, -0.5)];
        std::array::from_fn(|j| base[j] + c(d[j].0, d[j].1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn boundary_images_lie_on_the_polygon(v in convex_quad()) {
        let (map, _) = ExteriorMapSpec::solve(&PolygonSpec::new(v).unwrap(), 1e-12).unwrap();
        prop_assert!(boundary_deviation(&map, &v, 256) < 1e-6);
        let b = grunsky_matrix(&map.laurent_coeffs(16).unwrap(), 8).unwrap();
        prop_assert!(grunsky_norm(&b) < 1.0);
        prop_assert!(b.max_asymmetry() == 0.0);
    }
}
