//! Quadrature rules and polar grids on the unit disk.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Nodes and weights of a rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pairs: Vec<(f64, f64)>,
    alpha: f64,
    beta: f64,
}

impl Rule {
    pub fn legendre(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        let quad = GaussLegendre::new(n);
        Self {
            pairs: quad.as_node_weight_pairs().to_vec(),
            alpha: 0.0,
            beta: 0.0,
        }
    }

    /// Rule for `∫ (1-x)^alpha (1+x)^beta f(x) dx` on `[-1, 1]`.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Self {
        if alpha == 0.0 && beta == 0.0 {
            return Self::legendre(n);
        }
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        let a = FiniteAboveNegOneF64::new(alpha).expect("jacobi exponent must exceed -1");
        let b = FiniteAboveNegOneF64::new(beta).expect("jacobi exponent must exceed -1");
        let quad = GaussJacobi::new(n, a, b);
        Self {
            pairs: quad.as_node_weight_pairs().to_vec(),
            alpha,
            beta,
        }
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `∫_a^b (b-t)^alpha (t-a)^beta f(t) dt` where `f` is the smooth factor.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, w) in &self.pairs {
            acc += f(mid + half * x) * w;
        }
        let scale = half.abs().powf(self.alpha + self.beta) * half;
        acc * scale
    }
}

fn gl10() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::legendre(10))
}

fn gl20() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::legendre(20))
}

/// Adaptive Gauss–Legendre on `[a, b]` for smooth (or mildly singular at an
/// endpoint) integrands. Accepts a piece once the 10- and 20-point rules agree
/// to `tol` scaled by the piece length.
pub fn adaptive<F>(f: &F, a: f64, b: f64, tol: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    adaptive_inner(f, a, b, tol / (b - a).abs().max(f64::MIN_POSITIVE), 0)
}

fn adaptive_inner<F>(f: &F, a: f64, b: f64, density: f64, depth: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let coarse = gl10().integrate(a, b, f);
    let fine = gl20().integrate(a, b, f);
    let allowed = density * (b - a).abs();
    if (fine - coarse).norm() <= allowed.max(1e-15 * fine.norm()) || depth >= 40 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive_inner(f, a, m, density, depth + 1) + adaptive_inner(f, m, b, density, depth + 1)
}

/// Identifies how a polar grid was built; pairings require equal kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// Gauss–Legendre in `r` times the trapezoid rule in `θ`.
    Uniform { radial: usize, angular: usize },
    /// Composite rules graded geometrically toward `e^{iθ0}` down to `2^-level`.
    Concentrated { theta0: f64, level: u32 },
}

/// Tensor-product quadrature on the unit disk: `∬ f dxdy ≈ Σ w_r w_θ f(r e^{iθ})`,
/// with the polar Jacobian folded into the radial weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    kind: GridKind,
    radial: Vec<(f64, f64)>,
    angular: Vec<(f64, f64)>,
}

impl PolarGrid {
    pub fn uniform(radial: usize, angular: usize) -> Self {
        let rule = Rule::legendre(radial);
        let radial_nodes = rule
            .pairs()
            .iter()
            .map(|&(x, w)| {
                let r = 0.5 * (x + 1.0);
                (r, 0.5 * w * r)
            })
            .collect();
        let h = 2.0 * PI / angular as f64;
        let angular_nodes = (0..angular).map(|j| (h * j as f64, h)).collect();
        Self {
            kind: GridKind::Uniform { radial, angular },
            radial: radial_nodes,
            angular: angular_nodes,
        }
    }

    /// Default resolution: 64 radial Gauss nodes by 256 angles.
    pub fn standard() -> Self {
        Self::uniform(64, 256)
    }

    /// Grid resolving features of size `2^-level` near the boundary point `e^{iθ0}`.
    pub fn concentrated(theta0: f64, level: u32) -> Self {
        const PER_PIECE: usize = 10;
        let rule = Rule::legendre(PER_PIECE);
        let depth = level as i32 + 6;

        let mut radial = Vec::new();
        let mut lo = 0.0;
        for j in 1..=depth {
            let hi = 1.0 - 0.5f64.powi(j);
            push_piece(&rule, lo, hi, &mut radial);
            lo = hi;
        }
        push_piece(&rule, lo, 1.0, &mut radial);
        for node in radial.iter_mut() {
            node.1 *= node.0;
        }

        // offsets graded toward 0 on both sides, then the far arc
        let mut offsets = Vec::new();
        let mut breaks = vec![0.0];
        for j in (0..=depth).rev() {
            breaks.push(0.5f64.powi(j));
        }
        breaks.push(PI);
        for w in breaks.windows(2) {
            push_piece(&rule, w[0], w[1], &mut offsets);
            push_piece(&rule, -w[1], -w[0], &mut offsets);
        }
        let angular = offsets.into_iter().map(|(t, w)| (theta0 + t, w)).collect();

        Self {
            kind: GridKind::Concentrated { theta0, level },
            radial,
            angular,
        }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radial(&self) -> &[(f64, f64)] {
        &self.radial
    }

    pub fn angular(&self) -> &[(f64, f64)] {
        &self.angular
    }

    /// Sample points in row-major order (radius outer, angle inner).
    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.radial.iter().flat_map(move |&(r, _)| {
            self.angular
                .iter()
                .map(move |&(t, _)| Complex64::from_polar(r, t))
        })
    }

    /// Quadrature weights aligned with [`PolarGrid::points`].
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.radial
            .iter()
            .flat_map(move |&(_, wr)| self.angular.iter().map(move |&(_, wt)| wr * wt))
    }

    /// `∬_𝔻 f dxdy`.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(Complex64) -> Complex64,
    {
        self.points()
            .zip(self.weights())
            .fold(Complex64::new(0.0, 0.0), |acc, (z, w)| acc + f(z) * w)
    }

    /// `∬_𝔻 f dxdy` against precomputed samples.
    pub fn integrate_samples(&self, samples: &[Complex64]) -> Complex64 {
        debug_assert_eq!(samples.len(), self.len());
        samples
            .iter()
            .zip(self.weights())
            .fold(Complex64::new(0.0, 0.0), |acc, (&s, w)| acc + s * w)
    }
}

fn push_piece(rule: &Rule, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    out.extend(
        rule.pairs()
            .iter()
            .map(|&(x, w)| (mid + half * x, w * half)),
    );
}
