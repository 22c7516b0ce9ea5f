use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("conjugate is unbounded at b = {b}: no bracket up to a = {a_max:e}")]
    UnboundedConjugate { b: f64, a_max: f64 },

    #[error("not an N-function: {0}")]
    NotAnNFunction(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integral is not convergent: {0}")]
    NonIntegrable(String),

    #[error("bisection bracket failure: {0}")]
    Divergence(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("Lipschitz representation failed: {0}")]
    Representation(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_module(self, module: &'static str) -> Error {
        Error::Module {
            module,
            source: Box::new(self),
        }
    }
}
