use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dual objective is not finite")]
    NonfiniteObjective,

    #[error("optimizer failed after exhausting the regularization schedule (last r = {r_last})")]
    OptimizerFailure { last_iterate: Vec<f64>, r_last: f64 },

    #[error("ill-conditioned matrix: {0}")]
    Conditioning(String),

    #[error("polytope construction failed: {0}")]
    Construction(String),

    #[error("cell mean outside the realizable set")]
    NonRealizableMean,

    #[error("{context}: {source}")]
    Located {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, context: impl Into<String>) -> Error {
        Error::Located {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with location wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Located { source, .. } => source.root(),
            e => e,
        }
    }
}
