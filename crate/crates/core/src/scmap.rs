//! Exterior Schwarz–Christoffel maps of convex quadrilateral complements.
//!
//! The map from `|z| > 1` onto the outside of a convex quadrilateral is
//!
//! ```text
//! F(z) = d0 + d1 ∫_{e_1}^{z} Π_j (1 - e_j/ζ)^{α_j - 1} dζ
//! ```
//!
//! which is the classical `ζ^-2 Π (ζ - e_j)^{α_j-1}` integrand with the
//! branch fixed by `(1 - e_j/ζ)^{α_j-1} → 1` at infinity. The integration
//! starts at the prevertex `e_1`, so `d0 = F(e_1) = A_1`. The integrand is
//! single valued on `|z| > 1` because `Σ(α_j - 1) = 2` and the residue
//! `-Σ(α_j - 1) e_j` vanishes at a solved parameter set.
//!
//! Endpoint singularities `|θ - θ_j|^{α_j-1}` along the unit circle and
//! `(r - 1)^{α_j-1}` along prevertex rays are integrated with Gauss–Jacobi
//! rules; everything away from the prevertices uses adaptive Gauss–Legendre.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, Rule};
use crate::series::TruncatedSeries;

const JACOBI_NODES: usize = 32;
const ADAPTIVE_TOL: f64 = 1e-15;
/// Beyond this modulus the pre-Schwarzian is summed from its expansion at ∞.
const FAR_FIELD_RADIUS: f64 = 4.0;
const FAR_FIELD_TERMS: usize = 64;

/// Contour radii and sample count used to cross-check Laurent coefficients.
pub const CONTOUR_RADII: [f64; 2] = [1.2, 1.5];
pub const CONTOUR_SAMPLES: usize = 1 << 10;
pub const CONTOUR_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Wraps an angle into `(-π, π]`.
fn wrap(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Conformal maps of `{|z| > 1}` normalized as `F(z) = d z + O(1)` at infinity.
pub trait ExteriorMap: Send + Sync {
    fn evaluate(&self, z: Complex64) -> Result<Complex64>;

    /// `F''/F'`.
    fn pre_schwarzian(&self, z: Complex64) -> Result<Complex64>;

    /// `S_F = (F''/F')' - (F''/F')^2 / 2`.
    fn schwarzian(&self, z: Complex64) -> Result<Complex64>;

    /// `lim z^4 S_F(z)` as `z → ∞`.
    fn schwarzian_tail(&self) -> Complex64;

    /// Laurent coefficients of the `Σ⁰`-normalized map `z + b_0 + b_1/z + ...`,
    /// as a series in `w = 1/z` on the window `[-1, n]` (so `coeff(k) = b_k`).
    fn laurent_coeffs(&self, n: usize) -> Result<TruncatedSeries>;

    /// Boundary angles where `S_F` blows up; sampled exactly by [`b_norm`].
    fn singular_angles(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// JSON shape of a polygon: `{"vertices": [[x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonInput {
    pub vertices: Vec<[f64; 2]>,
}

/// A convex quadrilateral with vertices in counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSpec {
    vertices: [Complex64; 4],
    turning: [f64; 4],
}

impl PolygonSpec {
    pub fn new(vertices: [Complex64; 4]) -> Result<Self> {
        let scale = vertices.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for i in 0..4 {
            for j in i + 1..4 {
                if (vertices[i] - vertices[j]).norm() <= 1e-12 * scale {
                    return Err(Error::InvalidPolygon(format!(
                        "vertices {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(Error::InvalidPolygon(format!(
                "vertices must be in positive orientation (signed area {area:.3e})"
            )));
        }
        let mut turning = [0.0; 4];
        for j in 0..4 {
            let incoming = vertices[j] - vertices[(j + 3) % 4];
            let outgoing = vertices[(j + 1) % 4] - vertices[j];
            turning[j] = (outgoing / incoming).arg();
        }
        const MARGIN: f64 = 1e-9;
        if let Some(j) = turning
            .iter()
            .position(|&t| t <= MARGIN || t >= PI - MARGIN)
        {
            return Err(Error::InvalidPolygon(format!(
                "not strictly convex at vertex {} (turning angle {:.3e})",
                j + 1,
                turning[j]
            )));
        }
        let total: f64 = turning.iter().sum();
        if (total - TAU).abs() > 1e-9 {
            return Err(Error::InvalidPolygon(format!(
                "boundary winds {:.3} times",
                total / TAU
            )));
        }
        Ok(Self { vertices, turning })
    }

    pub fn from_input(input: &PolygonInput) -> Result<Self> {
        if input.vertices.len() != 4 {
            return Err(Error::InvalidPolygon(format!(
                "expected 4 vertices, got {}",
                input.vertices.len()
            )));
        }
        let mut v = [c(0.0, 0.0); 4];
        for (slot, p) in v.iter_mut().zip(&input.vertices) {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidPolygon("non-finite coordinate".into()));
            }
            *slot = c(p[0], p[1]);
        }
        Self::new(v)
    }

    pub fn to_input(&self) -> PolygonInput {
        PolygonInput {
            vertices: self.vertices.iter().map(|v| [v.re, v.im]).collect(),
        }
    }

    /// Axis-aligned rectangle centered at 0 with `A_1` in the first quadrant.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        let (x, y) = (0.5 * width, 0.5 * height);
        Self::new([c(x, y), c(-x, y), c(-x, -y), c(x, -y)])
    }

    /// Unit square centered at the origin.
    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0).expect("unit square is valid")
    }

    pub fn vertices(&self) -> &[Complex64; 4] {
        &self.vertices
    }

    /// `α_j`: interior angle of the complement at `A_j`, divided by `π`.
    pub fn exponents(&self) -> [f64; 4] {
        self.turning.map(|t| 1.0 + t / PI)
    }

    /// `|A_{j+1} - A_j|`.
    pub fn side_lengths(&self) -> [f64; 4] {
        std::array::from_fn(|j| (self.vertices[(j + 1) % 4] - self.vertices[j]).norm())
    }

    /// Euclidean distance from `w` to the polygon's boundary.
    pub fn boundary_distance(&self, w: Complex64) -> f64 {
        (0..4)
            .map(|j| {
                let (a, b) = (self.vertices[j], self.vertices[(j + 1) % 4]);
                let d = b - a;
                let s = ((w - a).re * d.re + (w - a).im * d.im) / d.norm_sqr();
                (w - (a + d * s.clamp(0.0, 1.0))).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn signed_area(v: &[Complex64; 4]) -> f64 {
    0.5 * (0..4)
        .map(|j| {
            let (a, b) = (v[j], v[(j + 1) % 4]);
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
}

/// Solved parameters of an exterior Schwarz–Christoffel map.
#[derive(Debug, Clone)]
pub struct ExteriorMapSpec {
    angles: [f64; 4],
    prevertices: [Complex64; 4],
    exponents: [f64; 4],
    d0: Complex64,
    d1: Complex64,
    vertex_images: [Complex64; 4],
    kernel: Kernel,
}

/// Diagnostics of the prevertex solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub max_side_error: f64,
}

/// The integrand `Π (1 - e_k/ζ)^{a_k}` with its Jacobi rules.
#[derive(Debug, Clone)]
struct Kernel {
    angles: [f64; 4],
    prevertices: [Complex64; 4],
    a: [f64; 4],
    side_rules: Vec<Rule>,
    start_rules: Vec<Rule>,
    end_rules: Vec<Rule>,
}

impl Kernel {
    fn new(angles: [f64; 4], a: [f64; 4]) -> Self {
        let side_rules = (0..4)
            .map(|j| Rule::jacobi(JACOBI_NODES, a[(j + 1) % 4], a[j]))
            .collect();
        let start_rules = (0..4)
            .map(|j| Rule::jacobi(JACOBI_NODES, 0.0, a[j]))
            .collect();
        let end_rules = (0..4)
            .map(|j| Rule::jacobi(JACOBI_NODES, a[j], 0.0))
            .collect();
        Self {
            angles,
            prevertices: angles.map(|t| Complex64::from_polar(1.0, t)),
            a,
            side_rules,
            start_rules,
            end_rules,
        }
    }

    fn with_angles(&self, angles: [f64; 4]) -> Self {
        Self {
            angles,
            prevertices: angles.map(|t| Complex64::from_polar(1.0, t)),
            ..self.clone()
        }
    }

    /// `log g(e^{iθ})` minus `a_k log(dist_k)` for each excluded `(k, dist_k)`.
    fn log_boundary(&self, theta: f64, excluded: &[(usize, f64)]) -> Complex64 {
        let mut acc = c(0.0, 0.0);
        for k in 0..4 {
            let delta = wrap(theta - self.angles[k]);
            let imag = delta.signum() * 0.5 * PI - 0.5 * delta;
            let two_sin = 2.0 * (0.5 * delta).sin().abs();
            let real = match excluded.iter().find(|(e, _)| *e == k) {
                Some(&(_, dist)) => (two_sin / dist).ln(),
                None => two_sin.ln(),
            };
            acc += c(real, imag) * self.a[k];
        }
        acc
    }

    fn log_general(&self, zeta: Complex64) -> Complex64 {
        self.prevertices
            .iter()
            .zip(&self.a)
            .map(|(&e, &a)| ((zeta - e) / zeta).ln() * a)
            .sum()
    }

    fn integrand(&self, zeta: Complex64) -> Complex64 {
        self.log_general(zeta).exp()
    }

    /// Image of the arc `e_j → e_{j+1}` under `∫ g dζ`.
    fn side_vector(&self, j: usize) -> Complex64 {
        let next = (j + 1) % 4;
        let lo = self.angles[j];
        let mut hi = self.angles[next];
        if hi <= lo {
            hi += TAU;
        }
        let rule = &self.side_rules[j];
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = c(0.0, 0.0);
        for &(x, w) in rule.pairs() {
            let theta = mid + half * x;
            let from_lo = half * (1.0 + x);
            let to_hi = half * (1.0 - x);
            let log = self.log_boundary(theta, &[(j, from_lo), (next, to_hi)]);
            acc += (log.exp() * c(0.0, 1.0) * Complex64::from_polar(1.0, theta)) * w;
        }
        acc * half.powf(self.a[j] + self.a[next] + 1.0)
    }

    fn side_vectors(&self) -> [Complex64; 4] {
        std::array::from_fn(|j| self.side_vector(j))
    }

    /// `∫` along the unit circle from `e_j` to `e^{i(θ_j + dphi)}`, `|dphi| ≤ π`.
    fn boundary_from(&self, j: usize, dphi: f64) -> Complex64 {
        if dphi == 0.0 {
            return c(0.0, 0.0);
        }
        let t0 = self.angles[j];
        let aj = self.a[j];
        let len = dphi.abs();
        let half = 0.5 * len;
        let (rule, sign) = if dphi > 0.0 {
            (&self.start_rules[j], 1.0)
        } else {
            (&self.end_rules[j], -1.0)
        };
        let mut acc = c(0.0, 0.0);
        for &(x, w) in rule.pairs() {
            // distance from the prevertex along the arc
            let dist = if dphi > 0.0 {
                half * (1.0 + x)
            } else {
                half * (1.0 - x)
            };
            let theta = t0 + sign * dist;
            let log = self.log_boundary(theta, &[(j, dist)]);
            acc += (log.exp() * c(0.0, 1.0) * Complex64::from_polar(1.0, theta)) * w;
        }
        acc * half.powf(aj + 1.0) * sign
    }

    /// `∫` along the ray through `e_j` from radius 1 to `rho`.
    fn radial_from(&self, j: usize, rho: f64) -> Complex64 {
        if rho <= 1.0 {
            return c(0.0, 0.0);
        }
        let e = self.prevertices[j];
        let clearance = (0..4)
            .filter(|&k| k != j)
            .map(|k| (self.prevertices[k] - e).norm())
            .fold(f64::INFINITY, f64::min);
        let r1 = rho.min(1.0 + 0.5 * clearance);
        let aj = self.a[j];
        let half = 0.5 * (r1 - 1.0);
        let mut acc = c(0.0, 0.0);
        for &(x, w) in self.start_rules[j].pairs() {
            let r = 1.0 + half * (1.0 + x);
            let zeta = e * r;
            let mut log = c(-aj * r.ln(), 0.0);
            for k in (0..4).filter(|&k| k != j) {
                log += ((zeta - self.prevertices[k]) / zeta).ln() * self.a[k];
            }
            acc += log.exp() * w;
        }
        acc = acc * e * half.powf(aj + 1.0);
        if rho > r1 {
            acc += self.ray(self.angles[j], r1, rho);
        }
        acc
    }

    /// `∫` along the ray at angle `theta` between radii `r0, r1 > 1`.
    fn ray(&self, theta: f64, r0: f64, r1: f64) -> Complex64 {
        let dir = Complex64::from_polar(1.0, theta);
        let f = |r: f64| self.integrand(dir * r) * dir;
        // dyadic pieces keep long rays well conditioned
        let mut acc = c(0.0, 0.0);
        let (lo, hi, sign) = if r0 <= r1 {
            (r0, r1, 1.0)
        } else {
            (r1, r0, -1.0)
        };
        let mut a = lo;
        while a < hi {
            let b = (2.0 * a).min(hi);
            acc += adaptive(&f, a, b, ADAPTIVE_TOL);
            a = b;
        }
        acc * sign
    }

    /// `∫` along `|ζ| = rho > 1` from angle `t0` to `t1`.
    fn arc(&self, rho: f64, t0: f64, t1: f64) -> Complex64 {
        let f = |t: f64| {
            let zeta = Complex64::from_polar(rho, t);
            self.integrand(zeta) * zeta * c(0.0, 1.0)
        };
        adaptive(&f, t0, t1, ADAPTIVE_TOL)
    }

    fn nearest(&self, phi: f64) -> (usize, f64) {
        (0..4)
            .map(|k| (k, wrap(phi - self.angles[k])))
            .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap()
    }

    /// `m_k = Σ a_j e_j^k`.
    fn moment(&self, k: usize) -> Complex64 {
        self.prevertices
            .iter()
            .zip(&self.a)
            .map(|(&e, &a)| e.powu(k as u32) * a)
            .sum()
    }
}

impl ExteriorMapSpec {
    /// Solves the prevertex problem for `poly` with `e_1 = 1`.
    ///
    /// Unknowns are three gap logits (`gap_k = 2π softmax(0, y)_k`); the
    /// residual stacks the vanishing-residue condition `Σ a_j e_j = 0` with
    /// the side-length log-ratios `log(L_j/L_1)`. Levenberg–Marquardt damping
    /// with a central-difference Jacobian.
    pub fn solve(poly: &PolygonSpec, tol: f64) -> Result<(Self, SolveReport)> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        const MAX_ITER: usize = 200;
        let exponents = poly.exponents();
        let a = exponents.map(|x| x - 1.0);
        let targets = poly.side_lengths();
        let base = Kernel::new([0.0, 0.5 * PI, PI, 1.5 * PI], a);

        let residual = |y: &[f64; 3]| -> [f64; 5] {
            let kernel = base.with_angles(angles_from_logits(y));
            let sides = kernel.side_vectors();
            let res = kernel.moment(1);
            let len1 = sides[0].norm();
            [
                res.re,
                res.im,
                (sides[1].norm() / len1).ln() - (targets[1] / targets[0]).ln(),
                (sides[2].norm() / len1).ln() - (targets[2] / targets[0]).ln(),
                (sides[3].norm() / len1).ln() - (targets[3] / targets[0]).ln(),
            ]
        };
        let norm = |r: &[f64; 5]| r.iter().map(|x| x * x).sum::<f64>().sqrt();

        let mut y = [0.0; 3];
        let mut r = residual(&y);
        let mut lambda = 1e-3;
        let mut iterations = 0;
        while norm(&r) > 1e-14 && iterations < MAX_ITER {
            iterations += 1;
            let mut jac = [[0.0; 3]; 5];
            for p in 0..3 {
                let h = 1e-6;
                let (mut yp, mut ym) = (y, y);
                yp[p] += h;
                ym[p] -= h;
                let (rp, rm) = (residual(&yp), residual(&ym));
                for i in 0..5 {
                    jac[i][p] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let mut improved = false;
            for _ in 0..30 {
                let step = lm_step(&jac, &r, lambda);
                let trial: [f64; 3] = std::array::from_fn(|p| y[p] + step[p]);
                let rt = residual(&trial);
                if norm(&rt) < norm(&r) {
                    y = trial;
                    r = rt;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }

        let kernel = base.with_angles(angles_from_logits(&y));
        let sides = kernel.side_vectors();
        let edges: [Complex64; 4] =
            std::array::from_fn(|j| poly.vertices[(j + 1) % 4] - poly.vertices[j]);
        let num: Complex64 = sides.iter().zip(&edges).map(|(v, e)| v.conj() * e).sum();
        let den: f64 = sides.iter().map(|v| v.norm_sqr()).sum();
        let d1 = num / den;
        let d0 = poly.vertices[0];

        let scale = targets.iter().cloned().fold(0.0, f64::max);
        let max_side_error = sides
            .iter()
            .zip(&edges)
            .map(|(v, e)| (d1 * v - e).norm() / scale)
            .fold(0.0, f64::max);
        let report = SolveReport {
            iterations,
            residual: norm(&r),
            max_side_error,
        };
        if max_side_error > tol || kernel.moment(1).norm() > tol {
            return Err(Error::SolverDiverged {
                iterations,
                residual: norm(&r).max(max_side_error),
            });
        }

        let mut vertex_images = [d0; 4];
        for j in 1..4 {
            vertex_images[j] = vertex_images[j - 1] + d1 * sides[j - 1];
        }
        let spec = Self {
            angles: kernel.angles,
            prevertices: kernel.prevertices,
            exponents,
            d0,
            d1,
            vertex_images,
            kernel,
        };
        Ok((spec, report))
    }

    pub fn prevertices(&self) -> &[Complex64; 4] {
        &self.prevertices
    }

    /// Prevertex arguments, `θ_1 = 0 < θ_2 < θ_3 < θ_4 < 2π`.
    pub fn prevertex_angles(&self) -> &[f64; 4] {
        &self.angles
    }

    pub fn exponents(&self) -> &[f64; 4] {
        &self.exponents
    }

    pub fn d0(&self) -> Complex64 {
        self.d0
    }

    pub fn d1(&self) -> Complex64 {
        self.d1
    }

    /// Images of the prevertices computed by integrating the sides.
    pub fn vertex_images(&self) -> &[Complex64; 4] {
        &self.vertex_images
    }

    /// Arc lengths between consecutive prevertices.
    pub fn prevertex_gaps(&self) -> [f64; 4] {
        std::array::from_fn(|j| {
            let g = self.angles[(j + 1) % 4] - self.angles[j];
            if g <= 0.0 {
                g + TAU
            } else {
                g
            }
        })
    }

    /// `F'(z) = d1 Π (1 - e_j/z)^{α_j - 1}` for `|z| > 1`.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() <= 1.0 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        Ok(self.d1 * self.kernel.integrand(z))
    }

    /// `d/dθ F(e^{iθ})`.
    pub fn boundary_tangent(&self, theta: f64) -> Complex64 {
        let zeta = Complex64::from_polar(1.0, theta);
        let log = self.kernel.log_boundary(theta, &[]);
        self.d1 * log.exp() * zeta * c(0.0, 1.0)
    }

    /// Evaluates `F` along a different homotopic route: out along the ray of
    /// `e_base` to `via_radius`, around `|ζ| = via_radius` (the long way when
    /// `long_way`), then along the ray of `z`.
    pub fn evaluate_along(
        &self,
        z: Complex64,
        base: usize,
        via_radius: f64,
        long_way: bool,
    ) -> Result<Complex64> {
        if z.norm() <= 1.0 || via_radius <= 1.0 || base >= 4 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        let t0 = self.angles[base];
        let mut dphi = wrap(z.arg() - t0);
        if long_way {
            dphi -= dphi.signum() * TAU;
        }
        let k = &self.kernel;
        let path = k.radial_from(base, via_radius)
            + k.arc(via_radius, t0, t0 + dphi)
            + k.ray(z.arg(), via_radius, z.norm());
        Ok(self.vertex_images[base] + self.d1 * path)
    }

    /// Laurent coefficients of `F/d1` from the contour `|z| = rho`, as
    /// `(b_{-1}, b_0, b_1, ...)` up to `b_n`.
    pub fn contour_coeffs(&self, rho: f64, n: usize) -> Result<Vec<Complex64>> {
        let m = CONTOUR_SAMPLES;
        let samples: Vec<Complex64> = (0..m)
            .into_par_iter()
            .map(|k| self.evaluate(Complex64::from_polar(rho, TAU * k as f64 / m as f64)))
            .collect::<Result<_>>()?;
        let mut buf = samples;
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let mut out = Vec::with_capacity(n + 2);
        // F(ρω^m) = Σ β_n ρ^{-n} ω^{-nm}, so β_n ρ^{-n} sits in bin -n mod M
        out.push(buf[1] / (m as f64 * rho) / self.d1);
        for k in 0..=n {
            out.push(buf[(m - k % m) % m] * rho.powi(k as i32) / m as f64 / self.d1);
        }
        Ok(out)
    }

    /// Laurent coefficients `b_n = -g_{n+1}/n` from the expansion of the
    /// integrand `g(1/w) = exp(-Σ_k m_k w^k / k)`, `m_k = Σ a_j e_j^k`.
    fn series_coeffs(&self, n: usize) -> Result<Vec<Complex64>> {
        let top = n as i64 + 1;
        let mut log_g = TruncatedSeries::zeros(0, top)?;
        for k in 1..=top {
            log_g.set_coeff(k, -self.kernel.moment(k as usize) / k as f64)?;
        }
        let g = log_g.exp()?;
        Ok((1..=n).map(|k| -g.coeff(k as i64 + 1) / k as f64).collect())
    }

    fn far_field_pre_schwarzian(&self, z: Complex64) -> (Complex64, Complex64) {
        // b = Σ_k μ_k u^{k+1}, μ_0 = m_0 - 2, μ_k = m_k; u = 1/z
        let u = z.inv();
        let mut b = c(0.0, 0.0);
        let mut db = c(0.0, 0.0);
        let mut upow = u;
        for k in 0..FAR_FIELD_TERMS {
            let mut mu = self.kernel.moment(k);
            if k == 0 {
                mu -= 2.0;
            }
            b += mu * upow;
            db -= mu * upow * u * (k + 1) as f64;
            upow *= u;
        }
        (b, db)
    }

    fn pre_schwarzian_pair(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if z.norm() < 1.0 - 1e-12 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        if self.prevertices.iter().any(|&e| (z - e).norm() < 1e-14) {
            return Err(Error::AtPrevertex);
        }
        if z.norm() >= FAR_FIELD_RADIUS {
            return Ok(self.far_field_pre_schwarzian(z));
        }
        let mut b = c(-2.0, 0.0) / z;
        let mut db = c(2.0, 0.0) / (z * z);
        for (&e, &a) in self.prevertices.iter().zip(&self.kernel.a) {
            let d = (z - e).inv();
            b += d * a;
            db -= d * d * a;
        }
        Ok((b, db))
    }
}

fn angles_from_logits(y: &[f64; 3]) -> [f64; 4] {
    let logits = [0.0, y[0], y[1], y[2]];
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w = logits.map(|l| (l - max).exp());
    let total: f64 = w.iter().sum();
    let mut angles = [0.0; 4];
    for j in 1..4 {
        angles[j] = angles[j - 1] + TAU * w[j - 1] / total;
    }
    angles
}

/// Solves `(JᵀJ + λ diag(JᵀJ)) δ = -Jᵀr` for the 3-parameter problem.
fn lm_step(jac: &[[f64; 3]; 5], r: &[f64; 5], lambda: f64) -> [f64; 3] {
    let mut a = nalgebra::Matrix3::<f64>::zeros();
    let mut g = nalgebra::Vector3::<f64>::zeros();
    for i in 0..5 {
        for p in 0..3 {
            g[p] -= jac[i][p] * r[i];
            for q in 0..3 {
                a[(p, q)] += jac[i][p] * jac[i][q];
            }
        }
    }
    for p in 0..3 {
        a[(p, p)] *= 1.0 + lambda;
        a[(p, p)] += 1e-300;
    }
    match a.lu().solve(&g) {
        Some(s) => [s[0], s[1], s[2]],
        None => [0.0; 3],
    }
}

impl ExteriorMap for ExteriorMapSpec {
    fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let rho = z.norm();
        if rho < 1.0 - 1e-12 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        let (j, dphi) = self.kernel.nearest(z.arg());
        if (z - self.prevertices[j]).norm() < 1e-15 {
            return Ok(self.vertex_images[j]);
        }
        let path = if rho <= 1.0 + 1e-13 {
            self.kernel.boundary_from(j, dphi)
        } else {
            let t0 = self.angles[j];
            self.kernel.radial_from(j, rho) + self.kernel.arc(rho, t0, t0 + dphi)
        };
        Ok(self.vertex_images[j] + self.d1 * path)
    }

    fn pre_schwarzian(&self, z: Complex64) -> Result<Complex64> {
        self.pre_schwarzian_pair(z).map(|(b, _)| b)
    }

    fn schwarzian(&self, z: Complex64) -> Result<Complex64> {
        let (b, db) = self.pre_schwarzian_pair(z)?;
        Ok(db - 0.5 * b * b)
    }

    fn schwarzian_tail(&self) -> Complex64 {
        // with Σa_j = 2 and Σa_j e_j = 0, b ~ m_2/z^3 and S ~ -3 m_2 / z^4
        -3.0 * self.kernel.moment(2)
    }

    fn laurent_coeffs(&self, n: usize) -> Result<TruncatedSeries> {
        if n == 0 {
            return Err(Error::OutOfRange(
                "need at least one Laurent coefficient".into(),
            ));
        }
        let series = self.series_coeffs(n)?;
        let mut b0 = None;
        for &rho in &CONTOUR_RADII {
            // orders where ρ^n amplification stays below the tolerance
            let checked = ((1e4f64).ln() / rho.ln()).floor() as usize;
            let checked = checked.min(n);
            let contour = self.contour_coeffs(rho, checked)?;
            let lead = (contour[0] - 1.0).norm();
            if lead > 1e-10 {
                return Err(Error::QuadratureMismatch {
                    order: 0,
                    discrepancy: lead,
                });
            }
            for k in 1..=checked {
                let d = (contour[k + 1] - series[k - 1]).norm();
                if d > CONTOUR_TOL {
                    return Err(Error::QuadratureMismatch {
                        order: k,
                        discrepancy: d,
                    });
                }
            }
            match b0 {
                None => b0 = Some(contour[1]),
                Some(prev) => {
                    let d = (contour[1] - prev).norm();
                    if d > CONTOUR_TOL {
                        return Err(Error::QuadratureMismatch {
                            order: 0,
                            discrepancy: d,
                        });
                    }
                }
            }
        }
        let mut coeffs = Vec::with_capacity(n + 2);
        coeffs.push(c(1.0, 0.0));
        coeffs.push(b0.unwrap());
        coeffs.extend(series);
        TruncatedSeries::new(-1, coeffs)
    }

    fn singular_angles(&self) -> Vec<f64> {
        self.angles.to_vec()
    }
}

/// `F(z) = z + b/z`: the exterior map onto the outside of an ellipse, built
/// in closed form. `b = 0` is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseMap {
    b: Complex64,
}

impl EllipseMap {
    pub fn new(b: Complex64) -> Result<Self> {
        if b.norm().is_nan() || b.norm() >= 1.0 {
            return Err(Error::OutOfRange(format!(
                "ellipse parameter |b| = {} must be < 1",
                b.norm()
            )));
        }
        Ok(Self { b })
    }

    pub fn real(b: f64) -> Result<Self> {
        Self::new(c(b, 0.0))
    }

    pub fn identity() -> Self {
        Self { b: c(0.0, 0.0) }
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }
}

impl ExteriorMap for EllipseMap {
    fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() < 1.0 - 1e-12 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        Ok(z + self.b / z)
    }

    fn pre_schwarzian(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() < 1.0 - 1e-12 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        Ok(2.0 * self.b / (z * (z * z - self.b)))
    }

    fn schwarzian(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() < 1.0 - 1e-12 {
            return Err(Error::InsideDisk(z.to_string()));
        }
        let b = self.b;
        let q = z * z - b;
        Ok(-6.0 * b / (z * z * q) - 6.0 * b * b / (z * z * q * q))
    }

    fn schwarzian_tail(&self) -> Complex64 {
        -6.0 * self.b
    }

    fn laurent_coeffs(&self, n: usize) -> Result<TruncatedSeries> {
        let mut s = TruncatedSeries::zeros(-1, n as i64)?;
        s.set_coeff(-1, c(1.0, 0.0))?;
        if n >= 1 {
            s.set_coeff(1, self.b)?;
        }
        Ok(s)
    }
}

/// Estimate of `‖S_F‖_B = sup_{|z|>1} (|z|² - 1)² |S_F(z)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BNormEstimate {
    /// Grid maximum at the requested resolution, a lower bound.
    pub value: f64,
    /// Same on a doubled grid.
    pub refined: f64,
    /// `lim_{z→∞} |z^4 S_F(z)|`, the value at the point at infinity.
    pub tail: f64,
}

impl BNormEstimate {
    pub fn best(&self) -> f64 {
        self.value.max(self.refined).max(self.tail)
    }

    pub fn grid_change(&self) -> f64 {
        (self.refined - self.value).abs()
    }
}

/// Samples `(|z|² - 1)² |S_F(z)|` on `|z| = 1 + s` with `grid` log-spaced
/// offsets `s ∈ [1e-8, 1e4]` and `4·grid` angles (plus any singular angles),
/// then repeats on the doubled grid.
pub fn b_norm<M: ExteriorMap + ?Sized>(map: &M, grid: usize) -> Result<BNormEstimate> {
    let value = b_norm_grid(map, grid.max(2))?;
    let refined = b_norm_grid(map, 2 * grid.max(2))?;
    Ok(BNormEstimate {
        value,
        refined,
        tail: map.schwarzian_tail().norm(),
    })
}

fn b_norm_grid<M: ExteriorMap + ?Sized>(map: &M, grid: usize) -> Result<f64> {
    let mut angles: Vec<f64> = (0..4 * grid)
        .map(|k| TAU * k as f64 / (4 * grid) as f64)
        .collect();
    angles.extend(map.singular_angles());
    let offsets: Vec<f64> = (0..grid)
        .map(|i| 10f64.powf(-8.0 + 12.0 * i as f64 / (grid - 1) as f64))
        .collect();
    let values: Vec<f64> = angles
        .par_iter()
        .map(|&t| {
            let mut best = 0.0f64;
            for &s in &offsets {
                let z = Complex64::from_polar(1.0 + s, t);
                let weight = (s * (2.0 + s)).powi(2);
                if let Ok(sz) = map.schwarzian(z) {
                    best = best.max(weight * sz.norm());
                }
            }
            best
        })
        .collect();
    Ok(values.into_iter().fold(0.0, f64::max))
}
