use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("affine projector factorization failed (Gram condition estimate {condition:e})")]
    Factorization { condition: f64 },

    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step size too large: residual {residual:e} at iteration {iter}")]
    Diverged { iter: usize, residual: f64 },

    #[error("no positive component")]
    NoPositiveComponent,

    #[error("reference matrix is zero")]
    ZeroReference,

    #[error("incomplete grid, missing (n, m) cells: {0:?}")]
    IncompleteGrid(Vec<(usize, usize)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        Error::AtIteration {
            iter,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
