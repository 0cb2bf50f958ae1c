//! Conformal metrics on a disk of deformation parameters `t`: pullbacks of
//! the hyperbolic metric under holomorphic probes `h: {|t| < r} → 𝔻`, their
//! envelope, a discrete generalized Laplacian and curvature certificates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::beltrami::{moment_matrix, moments, teich_norm_bracket, BeltramiField, BracketOptions};
use crate::error::{Error, Result};
use crate::grunsky::{grunsky_matrix, h_x};
use crate::linalg;
use crate::scmap::{EllipseMap, ExteriorMap};

/// Radii of the circle means behind [`generalized_laplacian`].
pub const DEFAULT_RADII: [f64; 3] = [0.04, 0.02, 0.01];
/// Nodes where the metric falls below this are left out of certificates.
pub const LAMBDA_FLOOR: f64 = 1e-8;
const CIRCLE_POINTS: usize = 64;

/// Square lattice of spacing `h` restricted to `|t| ≤ r_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeformationGrid {
    r_max: f64,
    spacing: f64,
    half: usize,
}

impl DeformationGrid {
    pub fn new(r_max: f64, spacing: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(Error::OutOfRange(format!(
                "r_max = {r_max} must lie in (0, 1)"
            )));
        }
        if !(spacing > 0.0 && spacing < r_max) {
            return Err(Error::OutOfRange(format!(
                "spacing = {spacing} must lie in (0, r_max)"
            )));
        }
        let half = (r_max / spacing + 1e-9).floor() as usize;
        Ok(Self {
            r_max,
            spacing,
            half,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nodes per side.
    pub fn side(&self) -> usize {
        2 * self.half + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major index, `iy` outer.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side() + ix
    }

    pub fn node(&self, i: usize) -> Complex64 {
        let (ix, iy) = (i % self.side(), i / self.side());
        let h = self.spacing;
        Complex64::new(
            (ix as f64 - self.half as f64) * h,
            (iy as f64 - self.half as f64) * h,
        )
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn inside(&self, i: usize) -> bool {
        self.node(i).norm() <= self.r_max + 1e-12
    }

    /// Index of the node nearest to `t`.
    pub fn nearest(&self, t: Complex64) -> usize {
        let clamp = |v: f64| -> usize {
            let k = (v / self.spacing).round() + self.half as f64;
            k.clamp(0.0, (self.side() - 1) as f64) as usize
        };
        self.index(clamp(t.re), clamp(t.im))
    }

    /// `f` at the nodes inside the disk, NaN outside.
    pub fn sample<F>(&self, f: F) -> Vec<Complex64>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        (0..self.len())
            .into_par_iter()
            .map(|i| if self.inside(i) { f(self.node(i)) } else { nan })
            .collect()
    }

    fn neighbours(&self, i: usize) -> Option<[usize; 4]> {
        let (ix, iy) = (i % self.side(), i / self.side());
        if ix == 0 || iy == 0 || ix + 1 == self.side() || iy + 1 == self.side() {
            return None;
        }
        Some([
            self.index(ix + 1, iy),
            self.index(ix - 1, iy),
            self.index(ix, iy + 1),
            self.index(ix, iy - 1),
        ])
    }
}

/// `λ` per node (NaN where no centred stencil exists) with the difference
/// derivative `h'` and the holomorphy residual `|∂h/∂t̄|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSamples {
    pub lambda: Vec<f64>,
    #[serde(skip)]
    pub derivative: Vec<Complex64>,
    pub residual: Vec<f64>,
}

impl MetricSamples {
    pub fn max_residual(&self) -> f64 {
        self.residual
            .iter()
            .filter(|r| r.is_finite())
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// `λ = |h'| / (1 - |h|²)` with `h' = (h_x - i h_y)/2` from centred differences.
pub fn pullback_metric(grid: &DeformationGrid, h: &[Complex64]) -> Result<MetricSamples> {
    if h.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            h.len(),
            grid.len()
        )));
    }
    if let Some(i) = h.iter().position(|v| v.norm() >= 1.0) {
        return Err(Error::NotInDisk(i));
    }
    let step = 2.0 * grid.spacing();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut lambda = vec![f64::NAN; grid.len()];
    let mut derivative = vec![nan; grid.len()];
    let mut residual = vec![f64::NAN; grid.len()];
    for i in 0..grid.len() {
        let hi = h[i];
        let nb = grid
            .neighbours(i)
            .filter(|nb| hi.is_finite() && nb.iter().all(|&j| h[j].is_finite()));
        if let Some([e, w, n, s]) = nb {
            let hx = (h[e] - h[w]) / step;
            let hy = (h[n] - h[s]) / step;
            let i_unit = Complex64::new(0.0, 1.0);
            let dh = (hx - i_unit * hy) * 0.5;
            derivative[i] = dh;
            residual[i] = (hx + i_unit * hy).norm() * 0.5;
            lambda[i] = dh.norm() / (1.0 - hi.norm_sqr());
        }
    }
    Ok(MetricSamples {
        lambda,
        derivative,
        residual,
    })
}

/// Pointwise maximum of several metrics and its one-pass 3×3 neighbourhood
/// maximum (an approximation of the upper-semicontinuous regularization).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub lambda: Vec<f64>,
    pub regularized: Vec<f64>,
}

pub fn envelope(grid: &DeformationGrid, sets: &[&[f64]]) -> Result<Envelope> {
    if sets.is_empty() {
        return Err(Error::GridMismatch("envelope of an empty family".into()));
    }
    if let Some(bad) = sets.iter().find(|s| s.len() != grid.len()) {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            bad.len(),
            grid.len()
        )));
    }
    let lambda: Vec<f64> = (0..grid.len())
        .map(|i| sets.iter().map(|s| s[i]).fold(f64::NAN, f64::max))
        .collect();
    let side = grid.side();
    let regularized = (0..grid.len())
        .map(|i| {
            if !lambda[i].is_finite() {
                return f64::NAN;
            }
            let (ix, iy) = ((i % side) as isize, (i / side) as isize);
            let mut m = lambda[i];
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (ix + dx, iy + dy);
                    if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
                        m = m.max(lambda[grid.index(x as usize, y as usize)]);
                    }
                }
            }
            m
        })
        .collect();
    Ok(Envelope {
        lambda,
        regularized,
    })
}

/// Keys cubic convolution weights (`a = -1/2`) for nodes `i-1 .. i+2`.
fn keys_weights(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Bicubic interpolation of `u` at `t`; `None` when the stencil leaves the
/// grid or touches a non-finite value.
fn interpolate(grid: &DeformationGrid, u: &[f64], t: Complex64) -> Option<f64> {
    let gx = t.re / grid.spacing() + grid.half as f64;
    let gy = t.im / grid.spacing() + grid.half as f64;
    let (ix, iy) = (gx.floor(), gy.floor());
    let (wx, wy) = (keys_weights(gx - ix), keys_weights(gy - iy));
    let (ix, iy) = (ix as isize, iy as isize);
    let side = grid.side() as isize;
    if ix < 1 || iy < 1 || ix + 2 >= side || iy + 2 >= side {
        return None;
    }
    let mut acc = 0.0;
    for (a, wya) in wy.iter().enumerate() {
        for (b, wxb) in wx.iter().enumerate() {
            let v = u[grid.index(
                (ix - 1 + b as isize) as usize,
                (iy - 1 + a as isize) as usize,
            )];
            if !v.is_finite() {
                return None;
            }
            acc += wya * wxb * v;
        }
    }
    Some(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianEstimate {
    /// `min_r 4 (mean_r - u) / r²`.
    pub value: f64,
    pub per_radius: Vec<f64>,
    /// Extrapolation `r → 0` from the two smallest radii.
    pub richardson: f64,
}

/// `Δu ≈ 4 (mean over |t - t_i| = r of u  -  u(t_i)) / r²`, minimized over `radii`.
pub fn generalized_laplacian(
    grid: &DeformationGrid,
    u: &[f64],
    node: usize,
    radii: &[f64],
) -> Result<LaplacianEstimate> {
    if u.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            u.len(),
            grid.len()
        )));
    }
    if radii.is_empty() || !u[node].is_finite() {
        return Err(Error::InsufficientClearance(node));
    }
    let centre = grid.node(node);
    let mut per_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sum = 0.0;
        for k in 0..CIRCLE_POINTS {
            let p = centre + Complex64::from_polar(r, 2.0 * PI * k as f64 / CIRCLE_POINTS as f64);
            sum += interpolate(grid, u, p).ok_or(Error::InsufficientClearance(node))?;
        }
        per_radius.push(4.0 * (sum / CIRCLE_POINTS as f64 - u[node]) / (r * r));
    }
    let value = per_radius.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let richardson = if order.len() >= 2 {
        let (s, l) = (order[0], order[1]);
        let (rs, rl) = (radii[s] * radii[s], radii[l] * radii[l]);
        (rl * per_radius[s] - rs * per_radius[l]) / (rl - rs)
    } else {
        per_radius[0]
    };
    Ok(LaplacianEstimate {
        value,
        per_radius,
        richardson,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureCertificate {
    pub min_margin: f64,
    /// Node attaining the minimum margin.
    pub argmin: Option<[f64; 2]>,
    pub violations: usize,
    pub tested: usize,
    /// Below the metric floor, on a zero of `h'`, or without clearance.
    pub excluded: usize,
    /// Zeros of `h'` whose logarithmic singularity was subtracted.
    pub subtracted_zeros: usize,
    pub tolerance: f64,
    /// `Δ log λ - 4λ²` per tested node, NaN elsewhere.
    #[serde(skip)]
    pub margins: Vec<f64>,
}

impl CurvatureCertificate {
    pub fn passes(&self) -> bool {
        self.min_margin > -self.tolerance
    }
}

/// A zero of the probe derivative `h'` and its order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeZero {
    pub t: [f64; 2],
    pub order: u32,
}

/// Cubic fit of `h'` on the 4×4 block around node `(ix, iy)`, then Newton
/// for a nearby zero. The order is the winding number of the fit on a
/// circle of radius `h/2` around the zero.
fn refine_zero(
    grid: &DeformationGrid,
    dh: &[Complex64],
    ix: usize,
    iy: usize,
) -> Option<(Complex64, u32)> {
    let side = grid.side();
    if ix < 1 || iy < 1 || ix + 2 >= side || iy + 2 >= side {
        return None;
    }
    let s = grid.spacing();
    let centre = grid.node(grid.index(ix, iy));
    let mut a = DMatrix::<Complex64>::zeros(16, 4);
    let mut b = DMatrix::<Complex64>::zeros(16, 1);
    for row in 0..16 {
        let idx = grid.index(ix - 1 + row % 4, iy - 1 + row / 4);
        if !dh[idx].is_finite() {
            return None;
        }
        let w = (grid.node(idx) - centre) / s;
        let mut p = Complex64::new(1.0, 0.0);
        for col in 0..4 {
            a[(row, col)] = p;
            p *= w;
        }
        b[(row, 0)] = dh[idx];
    }
    let c = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let poly = |w: Complex64| c[(0, 0)] + w * (c[(1, 0)] + w * (c[(2, 0)] + w * c[(3, 0)]));
    let dpoly = |w: Complex64| c[(1, 0)] + w * (2.0 * c[(2, 0)] + w * 3.0 * c[(3, 0)]);
    let newton = |mut w: Complex64, k: f64| -> Option<Complex64> {
        for _ in 0..100 {
            let (p, dp) = (poly(w), dpoly(w));
            if p.norm() == 0.0 {
                break;
            }
            if dp.norm() == 0.0 {
                return None;
            }
            let step = p / dp * k;
            w -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        Some(w)
    };
    let w = newton(Complex64::new(0.0, 0.0), 1.0)?;
    if w.norm() > 1.5 {
        return None;
    }
    let samples: Vec<Complex64> = (0..32)
        .map(|j| poly(w + Complex64::from_polar(0.5, 2.0 * PI * j as f64 / 32.0)))
        .collect();
    if samples.iter().any(|v| v.norm() == 0.0) {
        return None;
    }
    let turn: f64 = (0..32)
        .map(|j| (samples[(j + 1) % 32] / samples[j]).arg())
        .sum();
    let order = (turn / (2.0 * PI)).round();
    if order < 1.0 {
        return None;
    }
    let w = newton(w, order)?;
    Some((centre + w * s, order as u32))
}

/// Zeros of the difference derivative inside the grid. By the minimum
/// modulus principle `|h'|` has local minima only near zeros; each discrete
/// minimum is refined on a local cubic fit.
pub fn derivative_zeros(grid: &DeformationGrid, samples: &MetricSamples) -> Vec<DerivativeZero> {
    let dh = &samples.derivative;
    let side = grid.side();
    let mut zeros: Vec<(Complex64, u32)> = Vec::new();
    for iy in 1..side - 1 {
        for ix in 1..side - 1 {
            let v = dh[grid.index(ix, iy)];
            if !v.is_finite() {
                continue;
            }
            let mut ring = [
                (1, 0),
                (1, 1),
                (0, 1),
                (-1, 1),
                (-1, 0),
                (-1, -1),
                (0, -1),
                (1, -1),
            ]
            .iter()
            .map(|&(dx, dy): &(isize, isize)| {
                dh[grid.index((ix as isize + dx) as usize, (iy as isize + dy) as usize)]
            });
            let mut strict = false;
            let minimum = ring.all(|r| {
                strict |= r.norm() > v.norm();
                r.is_finite() && r.norm() >= v.norm()
            });
            if !(minimum && strict) {
                continue;
            }
            match refine_zero(grid, dh, ix, iy) {
                Some((z, k))
                    if !zeros
                        .iter()
                        .any(|(w, _)| (w - z).norm() < 0.25 * grid.spacing()) =>
                {
                    zeros.push((z, k))
                }
                Some(_) => {}
                None => log::debug!("no zero of h' near {}", grid.node(grid.index(ix, iy))),
            }
        }
    }
    zeros
        .into_iter()
        .map(|(z, order)| DerivativeZero {
            t: [z.re, z.im],
            order,
        })
        .collect()
}

/// Checks `Δ log λ ≥ 4 λ²` at the nodes with `|t| ≤ region`.
pub fn curvature_certificate(
    grid: &DeformationGrid,
    lambda: &[f64],
    region: f64,
    radii: &[f64],
    tolerance: f64,
) -> Result<CurvatureCertificate> {
    if lambda.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            lambda.len(),
            grid.len()
        )));
    }
    let u: Vec<f64> = lambda
        .iter()
        .map(|&l| {
            if l.is_finite() && l >= LAMBDA_FLOOR {
                l.ln()
            } else {
                f64::NAN
            }
        })
        .collect();
    certify(grid, lambda, &u, &[], region, radii, tolerance, 0)
}

/// [`curvature_certificate`] for a pullback metric. Near a zero `z_j` of
/// order `k_j` of `h'`, `log λ` behaves like `k_j log|t - z_j|`, which cubic
/// interpolation cannot follow. The harmonic terms `k_j log|t - z_j|` are
/// subtracted before the circle means; away from the zeros they do not
/// change the Laplacian. Nodes within `h/2` of a zero are filled from the
/// fourth-order stencil and left untested.
pub fn pullback_certificate(
    grid: &DeformationGrid,
    samples: &MetricSamples,
    region: f64,
    radii: &[f64],
    tolerance: f64,
) -> Result<CurvatureCertificate> {
    let lambda = &samples.lambda;
    if lambda.len() != grid.len() || samples.derivative.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            lambda.len(),
            grid.len()
        )));
    }
    let zeros = derivative_zeros(grid, samples);
    let s = grid.spacing();
    let singular = |t: Complex64| -> f64 {
        zeros
            .iter()
            .map(|z| z.order as f64 * (t - Complex64::new(z.t[0], z.t[1])).norm().ln())
            .sum()
    };
    let near_zero = |t: Complex64| {
        zeros
            .iter()
            .any(|z| (t - Complex64::new(z.t[0], z.t[1])).norm() < 0.5 * s)
    };
    let mut u: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (l, t) = (lambda[i], grid.node(i));
            if near_zero(t) || !(l.is_finite() && l > 0.0) {
                f64::NAN
            } else {
                l.ln() - singular(t)
            }
        })
        .collect();
    let side = grid.side() as isize;
    let mut filled = Vec::new();
    for (i, l) in lambda.iter().enumerate() {
        if !near_zero(grid.node(i)) || !l.is_finite() {
            continue;
        }
        // Δu = (16 Σ u_{±1} - Σ u_{±2} - 60 u) / (12 h²) with Δu = 4λ²
        let (ix, iy) = ((i % grid.side()) as isize, (i / grid.side()) as isize);
        let mut near = 0.0;
        let mut far = 0.0;
        let mut ok = true;
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            for (d, acc) in [(1, &mut near), (2, &mut far)] {
                let (x, y) = (ix + d * dx, iy + d * dy);
                if x < 0 || y < 0 || x >= side || y >= side {
                    ok = false;
                    continue;
                }
                let v = u[grid.index(x as usize, y as usize)];
                ok &= v.is_finite();
                *acc += v;
            }
        }
        if ok {
            let l = lambda[i];
            filled.push((i, (16.0 * near - far - 48.0 * s * s * l * l) / 60.0));
        }
    }
    let untested: Vec<usize> = (0..grid.len())
        .filter(|&i| near_zero(grid.node(i)))
        .collect();
    for (i, v) in filled {
        u[i] = v;
    }
    certify(
        grid,
        lambda,
        &u,
        &untested,
        region,
        radii,
        tolerance,
        zeros.len(),
    )
}

#[allow(clippy::too_many_arguments)]
fn certify(
    grid: &DeformationGrid,
    lambda: &[f64],
    u: &[f64],
    untested: &[usize],
    region: f64,
    radii: &[f64],
    tolerance: f64,
    subtracted_zeros: usize,
) -> Result<CurvatureCertificate> {
    let results: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if grid.node(i).norm() > region + 1e-12 {
                return None;
            }
            let l = lambda[i];
            if !(l.is_finite() && l >= LAMBDA_FLOOR) || untested.contains(&i) {
                return Some(f64::NAN);
            }
            match generalized_laplacian(grid, u, i, radii) {
                Ok(est) => Some(est.value - 4.0 * l * l),
                Err(_) => Some(f64::NAN),
            }
        })
        .collect();
    let mut margins = vec![f64::NAN; grid.len()];
    let (mut tested, mut excluded, mut violations) = (0, 0, 0);
    let mut min_margin = f64::INFINITY;
    let mut argmin = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            None => {}
            Some(m) if m.is_nan() => excluded += 1,
            Some(m) => {
                tested += 1;
                margins[i] = m;
                if m < -tolerance {
                    violations += 1;
                }
                if m < min_margin {
                    min_margin = m;
                    let t = grid.node(i);
                    argmin = Some([t.re, t.im]);
                }
            }
        }
    }
    if tested == 0 {
        return Err(Error::AllNodesExcluded);
    }
    Ok(CurvatureCertificate {
        min_margin,
        argmin,
        violations,
        tested,
        excluded,
        subtracted_zeros,
        tolerance,
        margins,
    })
}

/// The direction of a holomorphic disk `t ↦ [tμ]` together with the probe
/// maps `h_x` pulled back along it.
#[derive(Debug, Clone)]
pub enum ProbeCatalogue {
    /// `μ ≡ b`: the maps `z + bt/z`, probes `h_x(t) = xᵀ B(z + bt/z) x`.
    Ellipse { b: Complex64 },
    /// First-order slice for a general direction: `h_x(t) = t xᵀHx`, `H` the
    /// moment matrix of `μ`.
    FirstOrder { mu: BeltramiField },
    /// The synthetic probe `h(t) = t`, a direction of unit norm.
    Identity,
}

impl ProbeCatalogue {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ellipse { .. } => "ellipse",
            Self::FirstOrder { .. } => "first-order",
            Self::Identity => "identity",
        }
    }

    /// `‖μ‖_∞` of the direction.
    pub fn direction_norm(&self) -> f64 {
        match self {
            Self::Ellipse { b } => b.norm(),
            Self::FirstOrder { mu } => mu.sup_norm(),
            Self::Identity => 1.0,
        }
    }
}

/// Options of [`metric_comparison`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonOptions {
    /// Truncation of the Grunsky and moment matrices.
    pub n: usize,
    /// Random unit vectors added to `λ_κ`'s supremum.
    pub random_directions: usize,
    pub seed: u64,
    /// Polynomial degree of the Teichmüller-norm lower bound.
    pub bracket_degree: usize,
    pub tolerance: f64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            n: 8,
            random_directions: 32,
            seed: 0,
            bracket_degree: 6,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub t: [f64; 2],
    pub lambda_inf: f64,
    pub lambda_kappa: f64,
    pub lambda_k_lower: f64,
    pub lambda_k_upper: f64,
}

impl ComparisonRow {
    /// Largest violation of `λ_∞ ≤ λ_κ ≤ upper` (≤ 0 when the chain holds).
    pub fn violation(&self) -> f64 {
        (self.lambda_inf - self.lambda_kappa).max(self.lambda_kappa - self.lambda_k_upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub catalogue: String,
    pub direction_norm: f64,
    /// Lower end of the Teichmüller-norm bracket of the direction at `t = 0`.
    pub bracket_lower: f64,
    pub rows: Vec<ComparisonRow>,
    pub max_violation: f64,
    pub chain_holds: bool,
    pub origin: Option<ComparisonRow>,
    /// `max(λ) - min(λ)` over the three metrics at `t = 0`.
    pub origin_spread: Option<f64>,
    #[serde(skip)]
    pub envelope: Vec<f64>,
    #[serde(skip)]
    pub probe_metrics: Vec<MetricSamples>,
}

/// Catalogue vectors used for `λ_∞`: `e_1, e_2, e_3, (e_1 ± i e_2)/√2`.
pub fn catalogue_vectors(n: usize) -> Vec<Vec<Complex64>> {
    let s = 0.5f64.sqrt();
    let mut out = Vec::new();
    let unit = |k: usize| {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        v
    };
    for k in 0..n.min(3) {
        out.push(unit(k));
    }
    if n >= 2 {
        for sign in [1.0, -1.0] {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[0] = Complex64::new(s, 0.0);
            v[1] = Complex64::new(0.0, sign * s);
            out.push(v);
        }
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Probe values `h_x(t)` for one catalogue and direction vector on the grid.
pub fn probe_values(
    grid: &DeformationGrid,
    catalogue: &ProbeCatalogue,
    x: &[Complex64],
    n: usize,
) -> Result<Vec<Complex64>> {
    Ok(probe_family(grid, catalogue, std::slice::from_ref(&x.to_vec()), n)?.remove(0))
}

/// [`probe_values`] for several vectors, sharing the per-node matrices.
pub fn probe_family(
    grid: &DeformationGrid,
    catalogue: &ProbeCatalogue,
    xs: &[Vec<Complex64>],
    n: usize,
) -> Result<Vec<Vec<Complex64>>> {
    match catalogue {
        ProbeCatalogue::Ellipse { b } => {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            let per_node: Vec<Result<Vec<Complex64>>> = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    if !grid.inside(i) {
                        return Ok(vec![nan; xs.len()]);
                    }
                    let series = EllipseMap::new(*b * grid.node(i))?.laurent_coeffs(2 * n)?;
                    let m = grunsky_matrix(&series, n)?;
                    xs.iter().map(|x| h_x(&m, x)).collect()
                })
                .collect();
            let per_node: Vec<Vec<Complex64>> = per_node.into_iter().collect::<Result<_>>()?;
            Ok((0..xs.len())
                .map(|k| per_node.iter().map(|v| v[k]).collect())
                .collect())
        }
        ProbeCatalogue::FirstOrder { mu } => {
            let h = first_order_matrix(mu, n)?;
            Ok(xs
                .iter()
                .map(|x| {
                    let a = linalg::bilinear(&h, &nalgebra::DVector::from_column_slice(&pad(x, n)));
                    grid.sample(|t| a * t)
                })
                .collect())
        }
        ProbeCatalogue::Identity => Ok(vec![grid.sample(|t| t); xs.len()]),
    }
}

fn pad(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut v = x.to_vec();
    v.resize(n, Complex64::new(0.0, 0.0));
    v
}

fn first_order_matrix(mu: &BeltramiField, n: usize) -> Result<DMatrix<Complex64>> {
    moment_matrix(&moments(mu, 2 * n - 2), n)
}

/// The chain `λ_∞ ≤ λ_κ ≤ λ_K` along a catalogue's disk.
///
/// `λ_∞` is the envelope of the catalogue probes, `λ_κ` the supremum over
/// those, seeded random unit vectors and the maximizing direction of the
/// derivative at `t = 0`. `λ_K` is bracketed by `ℓ/(1 - |t|²ℓ²)` with `ℓ` the
/// Teichmüller-norm lower bound (upper end: `ℓ = ‖μ‖_∞`), the Schwarz–Pick
/// scaling of the disk `{|t| < 1/‖μ‖_∞}`.
pub fn metric_comparison(
    grid: &DeformationGrid,
    catalogue: &ProbeCatalogue,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    let n = opts.n.max(1);
    let norm = catalogue.direction_norm();
    let (bracket_lower, takagi) = match catalogue {
        ProbeCatalogue::Ellipse { b } => {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[0] = Complex64::new(1.0, 0.0);
            (b.norm(), v)
        }
        ProbeCatalogue::FirstOrder { mu } => {
            let bopts = BracketOptions {
                seed: opts.seed,
                ..Default::default()
            };
            let bracket = teich_norm_bracket(mu, opts.bracket_degree, &bopts);
            let h = first_order_matrix(mu, n)?;
            let v: Vec<Complex64> = linalg::takagi_vector(&h).iter().cloned().collect();
            (bracket.lower, v)
        }
        ProbeCatalogue::Identity => {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[0] = Complex64::new(1.0, 0.0);
            (1.0, v)
        }
    };

    let catalogue_x = catalogue_vectors(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut extra: Vec<Vec<Complex64>> = (0..opts.random_directions)
        .map(|_| random_unit(&mut rng, n))
        .collect();
    extra.push(takagi);

    let n_catalogue = catalogue_x.len();
    let mut all_x = catalogue_x;
    all_x.extend(extra);
    let mut metrics: Vec<MetricSamples> = probe_family(grid, catalogue, &all_x, n)?
        .iter()
        .map(|h| pullback_metric(grid, h))
        .collect::<Result<_>>()?;
    let extra_metrics: Vec<Vec<f64>> = metrics
        .split_off(n_catalogue)
        .into_iter()
        .map(|m| m.lambda)
        .collect();
    let probe_metrics = metrics;
    let refs: Vec<&[f64]> = probe_metrics.iter().map(|v| v.lambda.as_slice()).collect();
    let env = envelope(grid, &refs)?;

    let mut rows = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let lambda_inf = env.lambda[i];
        if !lambda_inf.is_finite() {
            continue;
        }
        let lambda_kappa = extra_metrics
            .iter()
            .map(|m| m[i])
            .fold(lambda_inf, f64::max);
        let t = grid.node(i);
        let r2 = t.norm_sqr();
        let lambda_k_upper = norm / (1.0 - r2 * norm * norm);
        let lambda_k_lower = bracket_lower / (1.0 - r2 * bracket_lower * bracket_lower);
        if lambda_k_lower > lambda_k_upper + opts.tolerance {
            return Err(Error::BracketInversion {
                node: i,
                lower: lambda_k_lower,
                upper: lambda_k_upper,
            });
        }
        let row = ComparisonRow {
            t: [t.re, t.im],
            lambda_inf,
            lambda_kappa,
            lambda_k_lower,
            lambda_k_upper,
        };
        max_violation = max_violation.max(row.violation());
        rows.push(row);
    }
    let origin_index = grid.nearest(Complex64::new(0.0, 0.0));
    let origin = rows
        .iter()
        .find(|r| r.t == [grid.node(origin_index).re, grid.node(origin_index).im])
        .copied();
    let origin_spread = origin.map(|r| {
        let v = [
            r.lambda_inf,
            r.lambda_kappa,
            r.lambda_k_lower,
            r.lambda_k_upper,
        ];
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    Ok(ComparisonReport {
        catalogue: catalogue.name().to_string(),
        direction_norm: norm,
        bracket_lower,
        chain_holds: max_violation <= opts.tolerance,
        max_violation,
        rows,
        origin,
        origin_spread,
        envelope: env.lambda,
        probe_metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> DeformationGrid {
        DeformationGrid::new(0.6, 1.0 / 64.0).unwrap()
    }

    fn real(grid: &DeformationGrid, f: impl Fn(Complex64) -> f64 + Sync) -> Vec<f64> {
        grid.sample(|t| Complex64::new(f(t), 0.0))
            .iter()
            .map(|v| v.re)
            .collect()
    }

    #[test]
    fn hyperbolic_metric_from_identity() {
        let g = DeformationGrid::new(0.6, 1.0 / 128.0).unwrap();
        let m = pullback_metric(&g, &g.sample(|t| t)).unwrap();
        for (i, l) in m.lambda.iter().enumerate() {
            if l.is_finite() {
                let t = g.node(i);
                assert!((l - 1.0 / (1.0 - t.norm_sqr())).abs() < 1e-6);
            }
        }
        assert!(m.max_residual() < 1e-12);
    }

    #[test]
    fn constant_probe_has_zero_metric() {
        let g = grid();
        let m = pullback_metric(&g, &g.sample(|_| Complex64::new(0.2, 0.1))).unwrap();
        assert!(m.lambda.iter().filter(|l| l.is_finite()).all(|&l| l == 0.0));
    }

    #[test]
    fn rejects_values_outside_disk() {
        let g = grid();
        assert!(matches!(
            pullback_metric(&g, &g.sample(|t| t * 2.0)),
            Err(Error::NotInDisk(_))
        ));
    }

    #[test]
    fn envelope_examples() {
        let g = grid();
        let a = pullback_metric(&g, &g.sample(|t| t * 0.3)).unwrap().lambda;
        let b = pullback_metric(&g, &g.sample(|t| t * 0.5)).unwrap().lambda;
        let single = envelope(&g, &[&a]).unwrap();
        assert!(single
            .lambda
            .iter()
            .zip(&a)
            .all(|(x, y)| x == y || (x.is_nan() && y.is_nan())));
        let both = envelope(&g, &[&a, &b]).unwrap();
        assert!(both
            .lambda
            .iter()
            .zip(&b)
            .all(|(x, y)| x == y || (x.is_nan() && y.is_nan())));
        let zero = vec![0.0; g.len()];
        let with_zero = envelope(&g, &[&zero, &a]).unwrap();
        assert!(with_zero
            .lambda
            .iter()
            .zip(&a)
            .all(|(x, y)| x.is_nan() || (y.is_nan() && *x == 0.0) || x == y));
        assert!(both
            .regularized
            .iter()
            .zip(&both.lambda)
            .all(|(r, l)| r >= l || l.is_nan()));
        assert!(envelope(&g, &[&a[1..]]).is_err());
    }

    #[test]
    fn laplacian_exact_on_quadratics_and_harmonics() {
        let g = grid();
        let quad = real(&g, |t| {
            3.0 * t.re * t.re - t.re * t.im + 2.0 * t.im * t.im + t.re
        });
        let harm = real(&g, |t| t.re + (t * t).re);
        for t in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.2, -0.31),
            Complex64::new(-0.4, 0.1),
        ] {
            let i = g.nearest(t);
            let q = generalized_laplacian(&g, &quad, i, &DEFAULT_RADII).unwrap();
            assert!((q.value - 10.0).abs() < 1e-10, "{q:?}");
            let h = generalized_laplacian(&g, &harm, i, &DEFAULT_RADII).unwrap();
            assert!(h.value.abs() < 1e-10, "{h:?}");
        }
    }

    #[test]
    fn laplacian_of_log_hyperbolic_density() {
        let g = DeformationGrid::new(0.6, 1.0 / 128.0).unwrap();
        let u = real(&g, |t| -(1.0 - t.norm_sqr()).ln());
        for t in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.3, 0.3),
            Complex64::new(0.0, -0.5),
        ] {
            let i = g.nearest(t);
            let est = generalized_laplacian(&g, &u, i, &[0.01]).unwrap();
            let exact = 4.0 / (1.0 - g.node(i).norm_sqr()).powi(2);
            assert!(
                (est.value - exact).abs() < 1e-3,
                "{t}: {} vs {exact}",
                est.value
            );
        }
    }

    #[test]
    fn laplacian_needs_clearance() {
        let g = grid();
        let u = real(&g, |t| t.re);
        let edge = g.nearest(Complex64::new(0.59, 0.0));
        assert!(matches!(
            generalized_laplacian(&g, &u, edge, &DEFAULT_RADII),
            Err(Error::InsufficientClearance(_))
        ));
    }

    #[test]
    fn certificates_for_hyperbolic_and_scaled_probes() {
        let g = grid();
        for b in [1.0, 0.5] {
            let m = pullback_metric(&g, &g.sample(|t| t * b)).unwrap();
            let cert = curvature_certificate(&g, &m.lambda, 0.5, &DEFAULT_RADII, 1e-2).unwrap();
            assert!(cert.passes(), "b = {b}: {cert:?}");
            assert!(cert.min_margin.abs() < 1e-2);
            assert_eq!(cert.excluded, 0);
        }
        let zero = vec![0.0; g.len()];
        assert!(matches!(
            curvature_certificate(&g, &zero, 0.5, &DEFAULT_RADII, 1e-2),
            Err(Error::AllNodesExcluded)
        ));
    }

    #[test]
    fn derivative_zeros_are_located() {
        let g = DeformationGrid::new(0.6, 1.0 / 128.0).unwrap();
        let z0 = Complex64::new(0.2, -0.137);
        let m = pullback_metric(&g, &g.sample(|t| (t - z0).powi(3) * 0.3)).unwrap();
        let zeros = derivative_zeros(&g, &m);
        assert_eq!(zeros.len(), 1, "{zeros:?}");
        assert_eq!(zeros[0].order, 2);
        let err = (Complex64::new(zeros[0].t[0], zeros[0].t[1]) - z0).norm();
        assert!(err < 1e-8, "{err}");
        let m = pullback_metric(&g, &g.sample(|t| t * t * 0.3)).unwrap();
        let zeros = derivative_zeros(&g, &m);
        assert_eq!(zeros.len(), 1);
        assert_eq!(zeros[0].order, 1);
        assert!(zeros[0].t[0].abs() < 1e-14 && zeros[0].t[1].abs() < 1e-14);
        let m = pullback_metric(&g, &g.sample(|t| t * 0.3)).unwrap();
        assert!(derivative_zeros(&g, &m).is_empty());
    }

    #[test]
    fn pullback_certificate_handles_zeros_of_derivative() {
        let g = DeformationGrid::new(0.6, 1.0 / 128.0).unwrap();
        for z0 in [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(-0.13, 0.31),
        ] {
            for k in [2, 3] {
                let m = pullback_metric(&g, &g.sample(|t| (t - z0).powi(k) * 0.2)).unwrap();
                let plain =
                    curvature_certificate(&g, &m.lambda, 0.5, &DEFAULT_RADII, 1e-2).unwrap();
                let cert = pullback_certificate(&g, &m, 0.5, &DEFAULT_RADII, 1e-2).unwrap();
                assert!(!plain.passes());
                assert!(
                    cert.passes() && cert.subtracted_zeros == 1,
                    "{z0} {k}: {}",
                    cert.min_margin
                );
                assert!(
                    cert.min_margin.abs() < 5e-3,
                    "{z0} {k}: {}",
                    cert.min_margin
                );
            }
        }
        // a metric of curvature -1 is a genuine violation
        let lambda = real(&g, |t| 2.0 / (1.0 - t.norm_sqr()));
        let cert = curvature_certificate(&g, &lambda, 0.5, &DEFAULT_RADII, 1e-2).unwrap();
        assert!(!cert.passes() && cert.violations == cert.tested);
        // Δ log λ - 4λ² = -12 / (1 - |t|²)², worst on |t| = 1/2
        assert!(
            (cert.min_margin + 12.0 / 0.5625).abs() < 1e-2,
            "{}",
            cert.min_margin
        );
    }

    #[test]
    fn ellipse_chain_has_equality_at_origin() {
        let g = DeformationGrid::new(0.5, 1.0 / 32.0).unwrap();
        let cat = ProbeCatalogue::Ellipse {
            b: Complex64::new(0.5, 0.0),
        };
        let rep = metric_comparison(&g, &cat, &ComparisonOptions::default()).unwrap();
        assert!(rep.chain_holds, "violation {}", rep.max_violation);
        assert!(rep.origin_spread.unwrap() < 1e-4);
        assert!((rep.origin.unwrap().lambda_inf - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_gives_zero_metrics() {
        let g = DeformationGrid::new(0.5, 1.0 / 16.0).unwrap();
        let cat = ProbeCatalogue::Ellipse {
            b: Complex64::new(0.0, 0.0),
        };
        let rep = metric_comparison(&g, &cat, &ComparisonOptions::default()).unwrap();
        assert!(rep
            .rows
            .iter()
            .all(|r| r.lambda_inf == 0.0 && r.lambda_kappa == 0.0 && r.lambda_k_upper == 0.0));
    }
}
