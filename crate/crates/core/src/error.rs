use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series window [{lo}, {hi}] is invalid or exceeds the supported size")]
    WindowOverflow { lo: i64, hi: i64 },

    #[error("series must have constant term 1 and no negative powers (constant term is {0})")]
    InvalidNormalization(String),

    #[error("series has a nonzero z^-1 term ({0}); its antiderivative is not a Laurent series")]
    LogarithmicTerm(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error(
        "prevertex solve did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("point {0} lies inside the closed unit disk")]
    InsideDisk(String),

    #[error("point coincides with a prevertex")]
    AtPrevertex,

    #[error(
        "Laurent coefficient cross-check failed at order {order}: discrepancy {discrepancy:.3e}"
    )]
    QuadratureMismatch { order: usize, discrepancy: f64 },

    #[error("insufficient truncation: need {needed} terms, have {available}")]
    InsufficientOrder { needed: usize, available: usize },

    #[error("direction vector must be a unit vector (norm {0})")]
    NonUnitVector(f64),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature did not converge under order doubling (difference {0:.3e})")]
    QuadratureDiverged(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("|h| >= 1 at deformation node {0}")]
    NotInDisk(usize),

    #[error("node {0} lacks clearance for the requested radii")]
    InsufficientClearance(usize),

    #[error("all nodes were excluded from the certificate")]
    AllNodesExcluded,

    #[error("bracket inversion at node {node}: lower {lower:.3e} exceeds upper {upper:.3e}")]
    BracketInversion { node: usize, lower: f64, upper: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
