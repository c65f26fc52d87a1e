use thiserror::Error;

/// Errors raised anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("inconsistent boundary labeling: {0}")]
    InconsistentLabeling(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point ({z_prev}, {z}, {v}) is off the graph of the normal-cone map")]
    Classification { z_prev: f64, z: f64, v: f64 },
    #[error("piece {i} is not admissible on stratum {s}")]
    InvalidBranch { i: u8, s: u8 },
    #[error("quadratic program did not converge after {0} iterations")]
    QpNoConvergence(usize),
    #[error("time step {step}: {source}")]
    Simulation {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("incompatible groupings: {0}")]
    IncompatibleGrouping(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGeometry(_)
                | Error::InconsistentLabeling(_)
                | Error::InvalidMaterial(_)
                | Error::IncompatibleGrouping(_)
        )
    }
}
