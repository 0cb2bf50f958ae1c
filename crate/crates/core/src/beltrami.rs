//! Beltrami coefficients on the unit disk and the functionals built on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quaddiff::{concentrating_sequence, QuadDifferential};
use crate::quadrature::PolarGrid;
use crate::scmap::{b_norm, ExteriorMap, ExteriorMapSpec};
use crate::series::TruncatedSeries;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// How a field is defined pointwise. Every form except `Sampled` can be
/// re-evaluated on another grid.
#[derive(Clone)]
pub enum FieldForm {
    Constant(Complex64),
    /// `k |ψ| / ψ`.
    Teichmuller {
        psi: QuadDifferential,
        k: f64,
    },
    /// `½ (1 - |z|²)² s φ(1/z̄) / z̄⁴` with `φ = S_F`.
    AhlforsWeill {
        map: Arc<dyn ExteriorMap>,
        scale: f64,
    },
    /// Coefficient of the reflection extension of an SC map.
    Reflection(Arc<ReflectionExtension>),
    /// Coefficient of `w^μ ∘ A` for the affine `A(z) = s (z + ν z̄)`, `s > 0`.
    Composed {
        nu: Complex64,
        scale: f64,
        inner: Box<FieldForm>,
    },
    Sampled(Arc<SampledField>),
}

impl fmt::Debug for FieldForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(t) => write!(f, "Constant({t})"),
            Self::Teichmuller { psi, k } => write!(f, "Teichmuller({:?}, {k})", psi.form()),
            Self::AhlforsWeill { scale, .. } => write!(f, "AhlforsWeill(scale = {scale})"),
            Self::Reflection(r) => write!(f, "Reflection(center = {})", r.center),
            Self::Composed { nu, scale, inner } => write!(f, "Composed({nu}, {scale}, {inner:?})"),
            Self::Sampled(s) => write!(f, "Sampled({} samples)", s.samples.len()),
        }
    }
}

/// Raw samples with nearest-node lookup.
#[derive(Debug, Clone)]
pub struct SampledField {
    grid: PolarGrid,
    samples: Vec<Complex64>,
}

impl SampledField {
    fn lookup(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        let radial = self.grid.radial();
        let angular = self.grid.angular();
        let outer = radial.iter().map(|n| n.0).fold(0.0, f64::max);
        if r > outer + 1e-9 {
            log::warn!(
                "point {z} outside the sampled region (max radius {outer}); using nearest sample"
            );
        }
        let i = nearest(radial.iter().map(|n| n.0), |x| (x - r).abs());
        let t = z.arg();
        let j = nearest(angular.iter().map(|n| n.0), |x| {
            let d = (x - t).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        });
        self.samples[i * angular.len() + j]
    }
}

fn nearest(values: impl Iterator<Item = f64>, dist: impl Fn(f64) -> f64) -> usize {
    values
        .enumerate()
        .map(|(i, v)| (i, dist(v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

impl FieldForm {
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match self {
            Self::Constant(t) => Ok(*t),
            Self::Teichmuller { psi, k } => {
                let mut v = psi.eval(z);
                if v == c(0.0, 0.0) {
                    let moved = if z == c(0.0, 0.0) {
                        c(1e-12, 0.0)
                    } else {
                        z * (1.0 + 1e-12)
                    };
                    log::warn!("ψ vanishes at {z}; sampling the Teichmüller field at {moved}");
                    v = psi.eval(moved);
                }
                if v == c(0.0, 0.0) {
                    return Ok(c(*k, 0.0));
                }
                Ok(v.conj() / v.norm() * *k)
            }
            Self::AhlforsWeill { map, scale } => {
                let r2 = z.norm_sqr();
                if r2 < 1e-16 {
                    return Ok(0.5 * *scale * map.schwarzian_tail());
                }
                let zeta = z.conj().inv();
                let phi = map.schwarzian(zeta)?;
                Ok(0.5 * *scale * (1.0 - r2).powi(2) * phi * zeta.powi(4))
            }
            Self::Reflection(ext) => ext.mu(z),
            Self::Composed { nu, scale, inner } => {
                let w = (z + *nu * z.conj()) * *scale;
                let m = inner.eval(w)?;
                // A_z = s > 0, so the frame factor conj(A_z)/A_z is 1
                Ok((*nu + m) / (1.0 + nu.conj() * m))
            }
            Self::Sampled(s) => Ok(s.lookup(z)),
        }
    }
}

/// A measurable coefficient on 𝔻 sampled on a polar grid.
#[derive(Debug, Clone)]
pub struct BeltramiField {
    form: FieldForm,
    grid: PolarGrid,
    samples: Vec<Complex64>,
    sup_norm: f64,
}

impl BeltramiField {
    pub fn new(form: FieldForm, grid: &PolarGrid) -> Result<Self> {
        let points: Vec<Complex64> = grid.points().collect();
        let samples = points
            .par_iter()
            .map(|&z| form.eval(z))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(form, grid.clone(), samples)
    }

    fn from_parts(form: FieldForm, grid: PolarGrid, samples: Vec<Complex64>) -> Result<Self> {
        let sup_norm = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if sup_norm.is_nan() || sup_norm >= 1.0 {
            return Err(Error::OutOfRange(format!(
                "Beltrami coefficient has sup norm {sup_norm} ≥ 1"
            )));
        }
        Ok(Self {
            form,
            grid,
            samples,
            sup_norm,
        })
    }

    pub fn constant(t: Complex64, grid: &PolarGrid) -> Result<Self> {
        Self::new(FieldForm::Constant(t), grid)
    }

    pub fn zero(grid: &PolarGrid) -> Self {
        Self::constant(c(0.0, 0.0), grid).expect("zero field is valid")
    }

    pub fn teichmuller(psi: QuadDifferential, k: f64, grid: &PolarGrid) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::OutOfRange(format!("k = {k} must lie in (0, 1)")));
        }
        Self::new(FieldForm::Teichmuller { psi, k }, grid)
    }

    /// A field given only by samples on `grid`.
    pub fn sampled(grid: &PolarGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        let form = FieldForm::Sampled(Arc::new(SampledField {
            grid: grid.clone(),
            samples: samples.clone(),
        }));
        Self::from_parts(form, grid.clone(), samples)
    }

    pub fn form(&self) -> &FieldForm {
        &self.form
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Grid maximum of `|μ|`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// The same coefficient on another grid.
    pub fn resample(&self, grid: &PolarGrid) -> Result<Self> {
        if grid == &self.grid {
            return Ok(self.clone());
        }
        Self::new(self.form.clone(), grid)
    }
}

/// `⟨μ, ψ⟩ = ∬_𝔻 μ ψ dxdy` on the field's grid.
pub fn pairing(mu: &BeltramiField, psi: &QuadDifferential) -> Complex64 {
    mu.grid
        .points()
        .zip(mu.grid.weights())
        .zip(&mu.samples)
        .fold(c(0.0, 0.0), |acc, ((z, w), &m)| acc + m * psi.eval(z) * w)
}

/// `∬ μ ν` for two fields sampled on the same grid.
pub fn pairing_fields(mu: &BeltramiField, other: &BeltramiField) -> Result<Complex64> {
    if mu.grid != other.grid {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            mu.grid.kind(),
            other.grid.kind()
        )));
    }
    Ok(mu.grid.integrate_samples(
        &mu.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    ))
}

/// `c_k = π⁻¹ ∬ μ z^k`, `k = 0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    pub c: Vec<Complex64>,
}

pub fn moments(mu: &BeltramiField, k_max: usize) -> MomentVector {
    let mut acc = vec![c(0.0, 0.0); k_max + 1];
    for ((z, w), &m) in mu.grid.points().zip(mu.grid.weights()).zip(&mu.samples) {
        let mut term = m * w / PI;
        for slot in acc.iter_mut() {
            *slot += term;
            term *= z;
        }
    }
    for (k, ck) in acc.iter().enumerate() {
        let bound = mu.sup_norm * 2.0 / (k as f64 + 2.0);
        if ck.norm() > bound * (1.0 + 1e-9) + 1e-15 {
            log::warn!("moment c_{k} = {ck} exceeds the Hölder bound {bound}");
        }
    }
    MomentVector { c: acc }
}

/// `H_mn = √(mn) c_{m+n-2}`, so that `⟨μ, ψ_x⟩ = xᵀHx`.
pub fn moment_matrix(m: &MomentVector, n: usize) -> Result<DMatrix<Complex64>> {
    if n > 0 && m.c.len() < 2 * n - 1 {
        return Err(Error::InsufficientOrder {
            needed: 2 * n - 2,
            available: m.c.len().saturating_sub(1),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        m.c[i + j] * (((i + 1) * (j + 1)) as f64).sqrt()
    }))
}

/// Truncated `α(μ) = sup_{ψ ∈ A₁², ‖ψ‖=1} |⟨μ, ψ⟩| = σ_max(H)`.
pub fn infinitesimal_grunsky(mu: &BeltramiField, n: usize) -> f64 {
    let m = moments(mu, 2 * n.max(1) - 2);
    linalg::spectral_norm(&moment_matrix(&m, n).expect("moments cover 2N-2"))
}

/// Settings of the polynomial ascent behind [`teich_norm_bracket`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeichBracket {
    /// Best `|⟨μ, ψ⟩|` over unit-norm polynomials of degree ≤ M.
    pub lower: f64,
    /// `‖μ‖_∞` on the grid.
    pub upper: f64,
    /// Coefficients of the best polynomial, normalized in `A₁`.
    pub maximizer: Vec<Complex64>,
    /// Whether the maximizer is (numerically) a square, i.e. lies in `A₁²`.
    pub maximizer_in_a2: bool,
    pub warnings: Vec<String>,
}

impl TeichBracket {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

struct AscentProblem<'a> {
    a: Vec<Complex64>,
    rows: Vec<Vec<Complex64>>,
    weights: &'a [f64],
}

impl AscentProblem<'_> {
    fn values(&self, p: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(p).map(|(v, q)| v * q).sum())
            .collect()
    }

    fn norm(&self, vals: &[Complex64]) -> f64 {
        vals.iter()
            .zip(self.weights)
            .map(|(v, w)| v.norm() * w)
            .sum()
    }

    fn pairing(&self, p: &[Complex64]) -> Complex64 {
        self.a.iter().zip(p).map(|(a, q)| a * q).sum()
    }

    /// Ratio `|a·p| / ‖p‖_{A₁}` and the normalized copy of `p`.
    fn evaluate(&self, p: &[Complex64]) -> Option<(f64, Vec<Complex64>, Vec<Complex64>)> {
        let vals = self.values(p);
        let n = self.norm(&vals);
        if n.is_nan() || n <= 0.0 || !n.is_finite() {
            return None;
        }
        let p: Vec<Complex64> = p.iter().map(|q| q / n).collect();
        let vals: Vec<Complex64> = vals.iter().map(|v| v / n).collect();
        Some((self.pairing(&p).norm(), p, vals))
    }

    /// Wirtinger ascent direction of the ratio at a normalized `p`.
    fn gradient(&self, p: &[Complex64], vals: &[Complex64]) -> Vec<Complex64> {
        let s = self.pairing(p);
        let phase = if s.norm() > 0.0 {
            s / s.norm()
        } else {
            c(0.0, 0.0)
        };
        let mut g: Vec<Complex64> = self.a.iter().map(|a| a.conj() * phase).collect();
        let mag = s.norm();
        for ((row, v), w) in self.rows.iter().zip(vals).zip(self.weights) {
            if v.norm() == 0.0 {
                continue;
            }
            let ph = v / v.norm() * (mag * w);
            for (gk, rk) in g.iter_mut().zip(row) {
                *gk -= rk.conj() * ph;
            }
        }
        g
    }

    fn ascend(&self, start: Vec<Complex64>, iterations: usize) -> Option<(f64, Vec<Complex64>)> {
        let (mut best, mut p, mut vals) = self.evaluate(&start)?;
        let mut step = 1.0;
        for _ in 0..iterations {
            let g = self.gradient(&p, &vals);
            let mut accepted = false;
            while step > 1e-14 {
                let trial: Vec<Complex64> = p.iter().zip(&g).map(|(q, d)| q + d * step).collect();
                match self.evaluate(&trial) {
                    Some((r, tp, tv)) if r > best => {
                        let gain = r - best;
                        best = r;
                        p = tp;
                        vals = tv;
                        step *= 1.5;
                        accepted = gain > 1e-15 * best.max(1e-300);
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !accepted {
                break;
            }
        }
        Some((best, p))
    }
}

/// Brackets the infinitesimal Teichmüller norm of `μ`: the lower end is
/// the best `|⟨μ, ψ⟩|` found over `A₁`-normalized polynomials of degree
/// `≤ degree` (projected gradient ascent from seeded random starts), the
/// upper end is `‖μ‖_∞`.
pub fn teich_norm_bracket(
    mu: &BeltramiField,
    degree: usize,
    opts: &BracketOptions,
) -> TeichBracket {
    let upper = mu.sup_norm;
    let dim = degree + 1;
    let moments = moments(mu, degree);
    let a: Vec<Complex64> = moments.c.iter().map(|ck| ck * PI).collect();
    if a.iter().all(|x| x.norm() == 0.0) {
        let mut maximizer = vec![c(0.0, 0.0); dim];
        maximizer[0] = c(1.0 / PI, 0.0);
        return TeichBracket {
            lower: 0.0,
            upper,
            maximizer,
            maximizer_in_a2: true,
            warnings: Vec::new(),
        };
    }
    let rows: Vec<Vec<Complex64>> = mu
        .grid
        .points()
        .map(|z| {
            let mut row = Vec::with_capacity(dim);
            let mut zk = c(1.0, 0.0);
            for _ in 0..dim {
                row.push(zk);
                zk *= z;
            }
            row
        })
        .collect();
    let weights: Vec<f64> = mu.grid.weights().collect();
    let problem = AscentProblem {
        a: a.clone(),
        rows,
        weights: &weights,
    };

    let starts: Vec<Vec<Complex64>> = (0..opts.restarts.max(1))
        .map(|i| {
            if i == 0 {
                // Cauchy–Schwarz direction for the numerator
                a.iter().map(|x| x.conj()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
                (0..dim)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            }
        })
        .collect();
    let results: Vec<Option<(f64, Vec<Complex64>)>> = starts
        .into_par_iter()
        .map(|s| problem.ascend(s, opts.iterations))
        .collect();

    let mut warnings = Vec::new();
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some((v, p)) => {
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, p));
                }
            }
            None => warnings.push(format!("restart {i} started from a zero polynomial")),
        }
    }
    let (lower, maximizer) = best.unwrap_or((0.0, vec![c(0.0, 0.0); dim]));
    if lower > upper * (1.0 + 1e-12) {
        warnings.push(format!("lower {lower} exceeds grid sup {upper}"));
    }
    let maximizer_in_a2 = is_square(&maximizer);
    TeichBracket {
        lower: lower.min(upper),
        upper,
        maximizer,
        maximizer_in_a2,
        warnings,
    }
}

/// Whether a polynomial is a square of a polynomial, to relative `1e-6`.
fn is_square(p: &[Complex64]) -> bool {
    let scale = p.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let Some(lead) = p.iter().position(|x| x.norm() > 1e-9 * scale) else {
        return true;
    };
    if lead % 2 == 1 {
        return false;
    }
    let rest: Vec<Complex64> = p[lead..].iter().map(|x| x / p[lead]).collect();
    let deg = rest.len() - 1;
    let half = deg / 2;
    let check = || -> Result<bool> {
        let s = TruncatedSeries::new(0, rest.clone())?;
        let root = s
            .log_unit()?
            .scale(c(0.5, 0.0))
            .exp()?
            .truncate(0, half as i64)?;
        let sq = root.mul(&root, 0, deg as i64)?;
        let err = (0..=deg as i64)
            .map(|k| (sq.coeff(k) - s.coeff(k)).norm())
            .fold(0.0, f64::max);
        Ok(err < 1e-6)
    };
    check().unwrap_or(false)
}

/// `σ_ν(μ)`: coefficient of `w^μ ∘ w^ν` with the normalized affine map
/// `w^ν(z) = (z + ν z̄) / (1 + |ν|)`, which maps 𝔻 into itself.
pub fn chain_rule(nu: Complex64, mu: &BeltramiField) -> Result<BeltramiField> {
    if nu.norm().is_nan() || nu.norm() >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "|ν| = {} must be < 1",
            nu.norm()
        )));
    }
    compose_affine(nu, 1.0 / (1.0 + nu.norm()), mu)
}

/// Coefficient of `w^μ ∘ A` for `A(z) = scale (z + ν z̄)`.
pub fn compose_affine(nu: Complex64, scale: f64, mu: &BeltramiField) -> Result<BeltramiField> {
    if nu.norm().is_nan() || nu.norm() >= 1.0 || scale.is_nan() || scale <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "affine map (ν = {nu}, scale = {scale}) is degenerate"
        )));
    }
    let form = FieldForm::Composed {
        nu,
        scale,
        inner: Box::new(mu.form.clone()),
    };
    BeltramiField::new(form, &mu.grid)
}

/// Inverse of [`chain_rule`]'s affine map: `u ↦ (u - ν ū) / (1 - |ν|)`.
pub fn chain_rule_inverse(nu: Complex64, mu: &BeltramiField) -> Result<BeltramiField> {
    compose_affine(-nu, 1.0 / (1.0 - nu.norm()), mu)
}

/// Harmonic Ahlfors–Weill coefficient of `scale · S_F`; needs `‖scale · S_F‖_B < 2`.
pub fn ahlfors_weill(
    map: Arc<dyn ExteriorMap>,
    scale: f64,
    grid: &PolarGrid,
) -> Result<BeltramiField> {
    let norm = b_norm(map.as_ref(), 64)?.best() * scale.abs();
    if norm >= 2.0 {
        return Err(Error::OutOfRange(format!(
            "Schwarzian norm {norm:.4} is not below 2; no Ahlfors–Weill extension"
        )));
    }
    BeltramiField::new(FieldForm::AhlforsWeill { map, scale }, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeValue {
    pub p: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub z0: [f64; 2],
    pub values: Vec<ProbeValue>,
    /// Aitken Δ² estimate of the limit (last value when not applicable).
    pub limit: f64,
    pub max_value: f64,
}

/// `|⟨μ, ψ_p⟩|` for the concentrating sequence at `z0`, `p = 1..=p_max`,
/// each on a grid graded toward `z0` at level `p`.
pub fn boundary_probe(mu: &BeltramiField, z0: Complex64, p_max: u32) -> Result<ProbeReport> {
    let values = (1..=p_max)
        .into_par_iter()
        .map(|p| {
            let psi = concentrating_sequence(z0, p)?;
            let grid = PolarGrid::concentrated(z0.arg(), p);
            let field = mu.resample(&grid)?;
            Ok(ProbeValue {
                p,
                value: pairing(&field, &psi).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seq: Vec<f64> = values.iter().map(|v| v.value).collect();
    let last = seq.last().copied().unwrap_or(0.0);
    let limit = aitken(&seq).unwrap_or(last);
    Ok(ProbeReport {
        z0: [z0.re, z0.im],
        max_value: seq.iter().cloned().fold(0.0, f64::max),
        values,
        limit,
    })
}

fn aitken(seq: &[f64]) -> Option<f64> {
    let n = seq.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (seq[n - 3], seq[n - 2], seq[n - 1]);
    let denom = c - 2.0 * b + a;
    if denom.abs() <= 1e-14 * (a.abs() + b.abs() + c.abs()).max(1e-300) {
        return None;
    }
    let est = c - (c - b).powi(2) / denom;
    let (lo, hi) = (0.0, a.max(b).max(c) * 2.0);
    (est.is_finite() && est >= lo && est <= hi).then_some(est)
}

/// `w = t₁ z + t₂ z̄`: constant coefficient `t = t₂/t₁` with dilatation `|t|`.
pub fn affine_family(t1: f64, t2: f64, grid: &PolarGrid) -> Result<(BeltramiField, f64)> {
    if t1 == 0.0 || !(t2 / t1).is_finite() || (t2 / t1).abs() >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "|t₂/t₁| must be < 1 (t₁ = {t1}, t₂ = {t2})"
        )));
    }
    let t = t2 / t1;
    Ok((BeltramiField::constant(c(t, 0.0), grid)?, t.abs()))
}

/// Quasiconformal extension of an exterior SC map into the disk:
/// `W = ρ ∘ F ∘ (z ↦ 1/z̄)` with `ρ(c + s e^{iφ}) = c + R(φ)² e^{iφ} / s`
/// the polar reflection across the polygon boundary about its vertex centroid.
#[derive(Debug, Clone)]
pub struct ReflectionExtension {
    map: ExteriorMapSpec,
    center: Complex64,
    /// Outward normal angle and distance from the center, per side.
    sides: Vec<(f64, f64)>,
    vertex_angles: Vec<f64>,
}

impl ReflectionExtension {
    pub fn new(map: ExteriorMapSpec) -> Self {
        let v = *map.vertex_images();
        let center = v.iter().sum::<Complex64>() / 4.0;
        let sides = (0..4)
            .map(|j| {
                let (a, b) = (v[j] - center, v[(j + 1) % 4] - center);
                let edge = b - a;
                // counterclockwise polygon: outward normal is edge rotated by -90°
                let normal = edge * c(0.0, -1.0) / edge.norm();
                let dist = (a * normal.conj()).re;
                (normal.arg(), dist)
            })
            .collect();
        let vertex_angles = v.iter().map(|a| (a - center).arg()).collect();
        Self {
            map,
            center,
            sides,
            vertex_angles,
        }
    }

    pub fn map(&self) -> &ExteriorMapSpec {
        &self.map
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    /// Side hit by the ray from the center at angle `phi`.
    fn side(&self, phi: f64) -> usize {
        (0..4)
            .filter(|&n| (phi - self.sides[n].0).cos() > 1e-12)
            .min_by(|&a, &b| {
                let ra = self.sides[a].1 / (phi - self.sides[a].0).cos();
                let rb = self.sides[b].1 / (phi - self.sides[b].0).cos();
                ra.total_cmp(&rb)
            })
            .expect("center lies inside a convex polygon")
    }

    /// Exact `sup |μ_W| = max |sin(φ_v - φ_n)|` over vertices and adjacent sides.
    pub fn dilatation(&self) -> f64 {
        let mut k = 0.0f64;
        for j in 0..4 {
            let phi = self.vertex_angles[j];
            for n in [(j + 3) % 4, j] {
                k = k.max((phi - self.sides[n].0).sin().abs());
            }
        }
        k
    }

    /// `ρ(w)` for `w` outside the polygon.
    pub fn reflect(&self, w: Complex64) -> Complex64 {
        let d = w - self.center;
        let (s, phi) = (d.norm(), d.arg());
        let (phin, dist) = self.sides[self.side(phi)];
        let r = dist / (phi - phin).cos();
        self.center + Complex64::from_polar(r * r / s, phi)
    }

    /// `W(z)` for `0 < |z| ≤ 1`.
    pub fn extend(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "{z} lies outside the closed disk"
            )));
        }
        if z == c(0.0, 0.0) {
            return Ok(self.center);
        }
        Ok(self.reflect(self.map.evaluate(z.conj().inv())?))
    }

    /// `μ_W(z) = (f_ζ/f_ζ̄) · conj(w-c)/(w-c) · A_z̄/conj(A_z̄)` with `w = F(1/z̄)`,
    /// `A_z̄ = -F'(1/z̄)/z̄²`, `f_ζ = -iL'`, `f_ζ̄ = -1 + iL'`, `L' = tan(φ - φ_n)`.
    pub fn mu(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() >= 1.0 {
            return Err(Error::OutOfRange(format!("{z} lies outside the open disk")));
        }
        let zb = z.conj();
        let (phi, frame) = if z.norm() < 1e-12 {
            // w - c ~ d1/z̄ and A_z̄ ~ -d1/z̄², so the frames combine to z/z̄
            let u = if z == c(0.0, 0.0) {
                c(1.0, 0.0)
            } else {
                z / z.norm()
            };
            ((self.map.d1() * u).arg(), u / u.conj())
        } else {
            let u = zb.inv();
            let d = self.map.evaluate(u)? - self.center;
            let a = -self.map.derivative(u)? / (zb * zb);
            (d.arg(), (d.conj() / d) * (a / a.conj()))
        };
        let lp = (phi - self.sides[self.side(phi)].0).tan();
        let ratio = c(0.0, -lp) / c(-1.0, lp);
        Ok(ratio * frame)
    }

    /// The extension's coefficient on `grid`.
    pub fn field(self: &Arc<Self>, grid: &PolarGrid) -> Result<BeltramiField> {
        BeltramiField::new(FieldForm::Reflection(self.clone()), grid)
    }
}
