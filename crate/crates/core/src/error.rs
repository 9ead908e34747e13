use std::path::PathBuf;

use crate::geometry::Point;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rectangle: ({x0}, {y0})-({x1}, {y1}) must have positive area")]
    InvalidRect { x0: f64, y0: f64, x1: f64, y1: f64 },

    #[error("division counts must be positive, got nx={nx}, ny={ny}")]
    InvalidDivisions { nx: usize, ny: usize },

    #[error("point ({}, {}) lies outside the mesh domain", .0.x, .0.y)]
    PointOutsideDomain(Point),

    #[error("subregion is not contained in the domain")]
    NotContained,

    #[error("triangle {triangle} does not contain point ({}, {})", .point.x, .point.y)]
    InvalidSideHint { triangle: usize, point: Point },

    #[error("unsupported element degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conjugate gradients did not converge: {iterations} iterations, relative residual {residual:e}")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("two-level iteration did not converge in {iterations} iterations (last relative change {last_change:e})")]
    TwoLevelNotConverged { iterations: usize, last_change: f64 },

    #[error("two-level iteration diverged at iteration {iteration} (relative change {change:e})")]
    TwoLevelDiverged { iteration: usize, change: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{context}: {source}")]
    Study {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
