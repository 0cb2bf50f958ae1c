use std::collections::BTreeMap;
use std::f64::consts::PI;

use grunsky_core::beltrami::{boundary_probe, infinitesimal_grunsky, teich_norm_bracket};
use grunsky_core::grunsky::{convergence_report, grunsky_matrix};
use grunsky_core::metrics::{self, pullback_metric, MetricSamples, DEFAULT_RADII};
use grunsky_core::scmap::PolygonInput;
use grunsky_core::{
    BracketOptions, ComparisonOptions, ComparisonReport, Complex64, ConvergenceReport,
    CurvatureCertificate, DeformationGrid, Error, ExteriorMap, PolarGrid, ProbeReport,
    TeichBracket,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Report, RunConfig};
use crate::inputs::{read_json, solve_polygon, DirectionSpec, MapInput, MuSpec};
use crate::Failure;

/// Degree of the polynomial space behind the norm bracket.
const BRACKET_DEGREE: usize = 8;
/// Probe limits below this fraction of `‖μ‖_∞` count as non-substantial.
const PROBE_FRACTION: f64 = 0.05;
const DEFORM_RADIUS: f64 = 0.75;
const CERTIFICATE_REGION: f64 = 0.5;
const CHAIN_TOL: f64 = 1e-9;

pub struct Table {
    pub file: &'static str,
    pub header: Vec<&'static str>,
    /// Columns printed as integers.
    pub integer_columns: &'static [usize],
    pub rows: Vec<Vec<f64>>,
}

pub struct Outputs {
    pub report_file: &'static str,
    pub report: Value,
    pub tables: Vec<Table>,
}

fn report<T: Serialize>(
    cfg: &RunConfig,
    tolerances: BTreeMap<&'static str, f64>,
    result: T,
) -> Value {
    serde_json::to_value(Report::new(cfg, tolerances, result)).expect("reports serialize")
}

#[derive(Serialize)]
struct MapResult {
    prevertices: Vec<[f64; 2]>,
    prevertex_angles: Vec<f64>,
    /// Angular gaps between consecutive prevertices.
    prevertex_arcs: Vec<f64>,
    d0: [f64; 2],
    d1: [f64; 2],
    solver_iterations: usize,
    solver_residual: f64,
    max_side_error: f64,
    boundary_residual: f64,
    boundary_samples: usize,
}

pub fn map(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let input: PolygonInput = read_json(cfg.input.as_ref())?;
    let (poly, map, solve) = solve_polygon(&input, cfg.tol)?;
    let samples = cfg.grid;
    let mut trace = Vec::with_capacity(samples);
    let mut boundary_residual = 0.0f64;
    for k in 0..samples {
        let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / samples as f64);
        let w = map.evaluate(z)?;
        boundary_residual = boundary_residual.max(poly.boundary_distance(w));
        trace.push(vec![z.re, z.im, w.re, w.im]);
    }
    let laurent = map.laurent_coeffs(cfg.n[0])?;
    let coeffs = (laurent.lo()..=laurent.hi())
        .map(|k| {
            let b = laurent.coeff(k);
            vec![k as f64, b.re, b.im]
        })
        .collect();
    let pair = |c: Complex64| [c.re, c.im];
    let result = MapResult {
        prevertices: map.prevertices().iter().map(|&z| pair(z)).collect(),
        prevertex_angles: map.prevertex_angles().to_vec(),
        prevertex_arcs: map.prevertex_gaps().to_vec(),
        d0: pair(map.d0()),
        d1: pair(map.d1()),
        solver_iterations: solve.iterations,
        solver_residual: solve.residual,
        max_side_error: solve.max_side_error,
        boundary_residual,
        boundary_samples: samples,
    };
    let tol = BTreeMap::from([
        ("solver", cfg.tol),
        ("laurent_cross_check", grunsky_core::scmap::CONTOUR_TOL),
    ]);
    Ok(Outputs {
        report_file: "map_report.json",
        report: report(cfg, tol, result),
        tables: vec![
            Table {
                file: "boundary.csv",
                header: vec!["z_re", "z_im", "w_re", "w_im"],
                integer_columns: &[],
                rows: trace,
            },
            Table {
                file: "laurent.csv",
                header: vec!["n", "b_re", "b_im"],
                integer_columns: &[0],
                rows: coeffs,
            },
        ],
    })
}

#[derive(Serialize)]
struct Sparsity {
    /// Residues mod 4 of the indices `n ≥ 1` with `|b_n|` above the threshold.
    laurent_support_mod_4: Vec<usize>,
    /// Share of Grunsky entries above the threshold at the largest `N`.
    nonzero_fraction: f64,
    max_offdiagonal: f64,
}

#[derive(Serialize)]
struct GrunskyResult {
    convergence: ConvergenceReport,
    sparsity: Sparsity,
}

pub fn grunsky(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let input: MapInput = read_json(cfg.input.as_ref())?;
    let map = input.build(1e-12)?;
    let n_max = *cfg.n.iter().max().expect("at least one N");
    let laurent = map.laurent_coeffs(2 * n_max)?;
    let convergence = convergence_report(&laurent, &cfg.n)?;

    let mut residues: Vec<usize> = (1..=laurent.hi())
        .filter(|&k| laurent.coeff(k).norm() > cfg.tol)
        .map(|k| (k % 4) as usize)
        .collect();
    residues.sort_unstable();
    residues.dedup();
    let b = grunsky_matrix(&laurent, n_max)?;
    let entries = b.entries();
    let nonzero = entries.iter().filter(|v| v.norm() > cfg.tol).count();
    let mut max_offdiagonal = 0.0f64;
    for i in 0..n_max {
        for j in 0..n_max {
            if i != j {
                max_offdiagonal = max_offdiagonal.max(entries[(i, j)].norm());
            }
        }
    }
    let rows = convergence
        .rows
        .iter()
        .map(|r| vec![r.n as f64, r.kappa_n, r.delta])
        .collect();
    let result = GrunskyResult {
        convergence,
        sparsity: Sparsity {
            laurent_support_mod_4: residues,
            nonzero_fraction: nonzero as f64 / (n_max * n_max) as f64,
            max_offdiagonal,
        },
    };
    let tol = BTreeMap::from([
        ("sparsity", cfg.tol),
        ("laurent_cross_check", grunsky_core::scmap::CONTOUR_TOL),
        ("solver", 1e-12),
    ]);
    Ok(Outputs {
        report_file: "grunsky_report.json",
        report: report(cfg, tol, result),
        tables: vec![Table {
            file: "convergence.csv",
            header: vec!["N", "kappa_N", "delta"],
            integer_columns: &[0],
            rows,
        }],
    })
}

#[derive(Serialize)]
struct ExtremalityResult {
    sup_norm: f64,
    #[serde(rename = "alpha_N")]
    alpha_n: f64,
    bracket: TeichBracket,
    probes: Vec<ProbeReport>,
    max_probe_limit: f64,
    /// The bracket closes: `α` reaches `‖μ‖_∞` within `tol`.
    extremal_flag: bool,
    /// Extremal and without substantial boundary points.
    teichmuller_flag: bool,
    warnings: Vec<String>,
}

pub fn extremality(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let spec: MuSpec = read_json(cfg.input.as_ref())?;
    let mu = spec.build(&PolarGrid::standard())?;
    let sup_norm = mu.sup_norm();
    let alpha_n = infinitesimal_grunsky(&mu, cfg.n[0]);
    let opts = BracketOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let bracket = teich_norm_bracket(&mu, BRACKET_DEGREE, &opts);
    let probes: Vec<ProbeReport> = (0..cfg.probe_points)
        .map(|j| {
            let z0 = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / cfg.probe_points as f64);
            boundary_probe(&mu, z0, cfg.p_max)
        })
        .collect::<Result<_, Error>>()?;
    let max_probe_limit = probes.iter().map(|p| p.limit).fold(0.0, f64::max);
    let extremal_flag = bracket.lower >= sup_norm - cfg.tol;
    let teichmuller_flag = extremal_flag && max_probe_limit <= PROBE_FRACTION * sup_norm;
    let warnings = bracket.warnings.clone();
    for w in &warnings {
        log::warn!("{w}");
    }
    let rows = probes
        .iter()
        .flat_map(|p| {
            p.values
                .iter()
                .map(move |v| vec![p.z0[0], p.z0[1], v.p as f64, v.value])
        })
        .collect();
    let result = ExtremalityResult {
        sup_norm,
        alpha_n,
        bracket,
        probes,
        max_probe_limit,
        extremal_flag,
        teichmuller_flag,
        warnings,
    };
    let tol = BTreeMap::from([
        ("extremal_gap", cfg.tol),
        ("probe_fraction", PROBE_FRACTION),
        ("bracket_degree", BRACKET_DEGREE as f64),
        ("a1_doubling", grunsky_core::quaddiff::A1_TOL),
    ]);
    Ok(Outputs {
        report_file: "extremality_report.json",
        report: report(cfg, tol, result),
        tables: vec![Table {
            file: "probes.csv",
            header: vec!["z0_re", "z0_im", "p", "value"],
            integer_columns: &[2],
            rows,
        }],
    })
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
enum Certificate {
    Tested(CurvatureCertificate),
    AllExcluded,
}

impl Certificate {
    fn wrap(c: Result<CurvatureCertificate, Error>) -> Result<Self, Error> {
        match c {
            Ok(c) => Ok(Self::Tested(c)),
            Err(Error::AllNodesExcluded) => Ok(Self::AllExcluded),
            Err(e) => Err(e),
        }
    }

    fn of(grid: &DeformationGrid, lambda: &[f64], tol: f64) -> Result<Self, Error> {
        Self::wrap(metrics::curvature_certificate(
            grid,
            lambda,
            CERTIFICATE_REGION,
            &DEFAULT_RADII,
            tol,
        ))
    }

    fn of_pullback(
        grid: &DeformationGrid,
        samples: &MetricSamples,
        tol: f64,
    ) -> Result<Self, Error> {
        Self::wrap(metrics::pullback_certificate(
            grid,
            samples,
            CERTIFICATE_REGION,
            &DEFAULT_RADII,
            tol,
        ))
    }

    fn passes(&self) -> bool {
        match self {
            Self::Tested(c) => c.passes(),
            Self::AllExcluded => true,
        }
    }
}

#[derive(Serialize)]
struct Certificates {
    envelope: Certificate,
    hyperbolic: Certificate,
    probes: Vec<Certificate>,
    all_pass: bool,
}

#[derive(Serialize)]
struct DeformResult {
    catalogue: String,
    direction_norm: f64,
    bracket_lower: f64,
    chain_holds: bool,
    max_violation: f64,
    origin: Option<metrics::ComparisonRow>,
    origin_spread: Option<f64>,
    nodes: usize,
    certificates: Certificates,
}

pub fn deform(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let spec: DirectionSpec = read_json(cfg.input.as_ref())?;
    let catalogue = spec.catalogue(&PolarGrid::standard())?;
    let grid = DeformationGrid::new(DEFORM_RADIUS, 1.0 / cfg.grid as f64)?;
    let opts = ComparisonOptions {
        n: cfg.n[0],
        seed: cfg.seed,
        tolerance: CHAIN_TOL,
        ..Default::default()
    };
    let cmp: ComparisonReport = metrics::metric_comparison(&grid, &catalogue, &opts)?;

    let envelope = Certificate::of(&grid, &cmp.envelope, cfg.tol)?;
    let hyperbolic = Certificate::of_pullback(
        &grid,
        &pullback_metric(&grid, &grid.sample(|t| t))?,
        cfg.tol,
    )?;
    let probes = cmp
        .probe_metrics
        .iter()
        .map(|m| Certificate::of_pullback(&grid, m, cfg.tol))
        .collect::<Result<Vec<_>, _>>()?;
    let margins = match &envelope {
        Certificate::Tested(c) => c.margins.clone(),
        Certificate::AllExcluded => vec![f64::NAN; grid.len()],
    };
    let all_pass =
        envelope.passes() && hyperbolic.passes() && probes.iter().all(Certificate::passes);

    let metric_rows = (0..grid.len())
        .filter(|&i| cmp.envelope[i].is_finite())
        .map(|i| {
            let t = grid.node(i);
            vec![t.re, t.im, cmp.envelope[i], margins[i]]
        })
        .collect();
    let comparison_rows = cmp
        .rows
        .iter()
        .map(|r| {
            vec![
                r.t[0],
                r.t[1],
                r.lambda_inf,
                r.lambda_kappa,
                r.lambda_k_lower,
                r.lambda_k_upper,
            ]
        })
        .collect();
    let result = DeformResult {
        catalogue: cmp.catalogue.clone(),
        direction_norm: cmp.direction_norm,
        bracket_lower: cmp.bracket_lower,
        chain_holds: cmp.chain_holds,
        max_violation: cmp.max_violation,
        origin: cmp.origin,
        origin_spread: cmp.origin_spread,
        nodes: cmp.rows.len(),
        certificates: Certificates {
            envelope,
            hyperbolic,
            probes,
            all_pass,
        },
    };
    let tol = BTreeMap::from([
        ("certificate_margin", cfg.tol),
        ("chain", CHAIN_TOL),
        ("lambda_floor", metrics::LAMBDA_FLOOR),
        ("grid_radius", DEFORM_RADIUS),
        ("certificate_region", CERTIFICATE_REGION),
    ]);
    Ok(Outputs {
        report_file: "deform_report.json",
        report: report(cfg, tol, result),
        tables: vec![
            Table {
                file: "metric.csv",
                header: vec!["t_re", "t_im", "lambda", "margin"],
                integer_columns: &[],
                rows: metric_rows,
            },
            Table {
                file: "comparison.csv",
                header: vec![
                    "t_re",
                    "t_im",
                    "lambda_inf",
                    "lambda_kappa",
                    "lambda_k_lower",
                    "lambda_k_upper",
                ],
                integer_columns: &[],
                rows: comparison_rows,
            },
        ],
    })
}
