use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate covariate at grid point s={site}: ensemble mean has zero variance over time")]
    DegenerateCovariate { site: usize },

    #[error("degenerate fit at grid point s={site}: residual sum of squares is zero")]
    DegenerateFit { site: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error(
        "posterior precision is not positive definite at grid point s={site} \
         (parameter {param}, pivot {value:e}); check the local fit there for degeneracy"
    )]
    PosteriorNotPositiveDefinite { site: usize, param: usize, value: f64 },

    #[error("singular information block at grid point s={site}")]
    SingularBlock { site: usize },

    #[error("optimisation failed: {0}")]
    Optimization(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by bad inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Index(_)
                | Error::InvalidArgument(_)
                | Error::Dimension(_)
                | Error::Ingestion(_)
                | Error::Schema(_)
                | Error::Io { .. }
                | Error::Csv(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
