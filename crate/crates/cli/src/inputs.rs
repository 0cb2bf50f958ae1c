use std::path::Path;
use std::sync::Arc;

use grunsky_core::scmap::PolygonInput;
use grunsky_core::{
    beltrami, BeltramiField, Complex64, EllipseMap, ExteriorMap, ExteriorMapSpec, PolarGrid,
    PolygonSpec, ProbeCatalogue, QuadDifferential,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Default Ahlfors–Weill scale. Scale 1 is the classical coefficient, but the
/// square's Schwarzian norm is about 2.5, so scales above about 0.8 are refused.
pub const DEFAULT_AW_SCALE: f64 = 0.5;

/// A complex number written as `0.3` or `[0.3, 0.1]`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ComplexIn {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexIn> for Complex64 {
    fn from(c: ComplexIn) -> Self {
        match c {
            ComplexIn::Real(re) => Complex64::new(re, 0.0),
            ComplexIn::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "oracle", rename_all = "kebab-case")]
pub enum Oracle {
    Ellipse { b: ComplexIn },
    Identity,
}

/// Input of `grunsky`: a polygon or a closed-form map.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MapInput {
    Polygon(PolygonInput),
    Oracle(Oracle),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MuSpec {
    Zero,
    Constant {
        t: ComplexIn,
    },
    /// `k |ψ| / ψ` for the polynomial `ψ = Σ psi[j] z^j`.
    Teichmuller {
        psi: Vec<ComplexIn>,
        k: f64,
    },
    AhlforsWeill {
        vertices: Vec<[f64; 2]>,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

fn default_scale() -> f64 {
    DEFAULT_AW_SCALE
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionSpec {
    Zero,
    Ellipse { b: ComplexIn },
    Identity,
    FirstOrder { mu: MuSpec },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("invalid input {}: {e}", path.display())))
}

pub fn solve_polygon(
    input: &PolygonInput,
    tol: f64,
) -> Result<
    (
        PolygonSpec,
        ExteriorMapSpec,
        grunsky_core::scmap::SolveReport,
    ),
    Failure,
> {
    let poly = PolygonSpec::from_input(input)?;
    let (map, report) = ExteriorMapSpec::solve(&poly, tol)?;
    Ok((poly, map, report))
}

impl MapInput {
    pub fn build(&self, tol: f64) -> Result<Arc<dyn ExteriorMap>, Failure> {
        Ok(match self {
            Self::Polygon(p) => Arc::new(solve_polygon(p, tol)?.1),
            Self::Oracle(Oracle::Ellipse { b }) => Arc::new(EllipseMap::new((*b).into())?),
            Self::Oracle(Oracle::Identity) => Arc::new(EllipseMap::identity()),
        })
    }
}

impl MuSpec {
    pub fn build(&self, grid: &PolarGrid) -> Result<BeltramiField, Failure> {
        Ok(match self {
            Self::Zero => BeltramiField::zero(grid),
            Self::Constant { t } => BeltramiField::constant((*t).into(), grid)?,
            Self::Teichmuller { psi, k } => {
                if psi.is_empty() {
                    return Err(Failure::Usage(
                        "teichmuller needs at least one psi coefficient".into(),
                    ));
                }
                let coeffs = psi.iter().map(|&c| c.into()).collect();
                BeltramiField::teichmuller(QuadDifferential::polynomial(coeffs), *k, grid)?
            }
            Self::AhlforsWeill { vertices, scale } => {
                let input = PolygonInput {
                    vertices: vertices.clone(),
                };
                let (_, map, _) = solve_polygon(&input, 1e-12)?;
                beltrami::ahlfors_weill(Arc::new(map), *scale, grid)?
            }
        })
    }
}

impl DirectionSpec {
    pub fn catalogue(&self, grid: &PolarGrid) -> Result<ProbeCatalogue, Failure> {
        Ok(match self {
            Self::Zero => ProbeCatalogue::Ellipse {
                b: Complex64::new(0.0, 0.0),
            },
            Self::Ellipse { b } => ProbeCatalogue::Ellipse { b: (*b).into() },
            Self::Identity => ProbeCatalogue::Identity,
            Self::FirstOrder { mu } => ProbeCatalogue::FirstOrder {
                mu: mu.build(grid)?,
            },
        })
    }
}
