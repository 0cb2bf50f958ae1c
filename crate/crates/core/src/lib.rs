//! Numerical experiments around Grunsky and Teichmüller norms of exterior
//! conformal maps: Laurent series, Schwarz–Christoffel maps of quadrilaterals,
//! Grunsky matrices, quadratic differentials, Beltrami functionals and
//! pullback metrics on deformation disks.

pub mod beltrami;
pub mod error;
pub mod grunsky;
pub mod linalg;
pub mod metrics;
pub mod quaddiff;
pub mod quadrature;
pub mod scmap;
pub mod series;

pub use beltrami::{BeltramiField, BracketOptions, FieldForm, ProbeReport, TeichBracket};
pub use error::{Error, Result};
pub use grunsky::{ConvergenceReport, GrunskyMatrix};
pub use metrics::{
    ComparisonOptions, ComparisonReport, CurvatureCertificate, DeformationGrid, ProbeCatalogue,
};
pub use num_complex::Complex64;
pub use quaddiff::QuadDifferential;
pub use quadrature::PolarGrid;
pub use scmap::{EllipseMap, ExteriorMap, ExteriorMapSpec, PolygonInput, PolygonSpec};
pub use series::TruncatedSeries;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
