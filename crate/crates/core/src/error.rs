use crate::C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency parameter must be positive and finite, got xi = {0}")]
    NonPositiveFrequency(f64),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("equivalent material undefined at xi = {xi}: {reason}")]
    MaterialUndefined { xi: f64, reason: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("integration surface rejected: {0}")]
    SurfaceClearance(String),

    #[error("point ({x}, {y}) lies inside or on a perfect metal")]
    InsideMetal { x: f64, y: f64 },

    #[error("linear solve broke down at omega = {omega}: {detail} (condition estimate {condition:.3e})")]
    SolverBreakdown {
        omega: C64,
        detail: String,
        condition: f64,
    },

    #[error("at xi = {xi}: {source}")]
    AtFrequency {
        xi: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid quadrature specification: {0}")]
    InvalidQuadrature(String),

    #[error("force integral not converged: tail estimate {tail:.3e} exceeds {bound:.3e}")]
    NotConverged { tail: f64, bound: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_xi(self, xi: f64) -> Error {
        match self {
            e @ Error::AtFrequency { .. } => e,
            e => Error::AtFrequency {
                xi,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
