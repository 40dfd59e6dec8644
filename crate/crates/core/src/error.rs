use thiserror::Error;

/// Errors produced by the estimation pipeline.
///
/// Input validation problems (`InvalidInput`, `NonFinite`, `Parse`,
/// `DegenerateVariable`, `NotSymmetric`) are caller mistakes; the remaining
/// variants signal numerical failure of a fit or a broken internal invariant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e} exceeds {tol:.3e})")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("variable {index} has zero variance; correlations are undefined")]
    DegenerateVariable { index: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("projection of the final iterate onto the constraint set is not positive \
             definite (relative distance to constraint {dist:.3e}); try a smaller zeta")]
    ProjectionNotSpd { dist: f64 },

    #[error("no candidate pattern could be fitted: {0}")]
    AllFitsFailed(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error indicates bad input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NonFinite(_)
                | Error::NotSymmetric { .. }
                | Error::DegenerateVariable { .. }
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
