use thiserror::Error;

/// Errors raised by the solvers and the experiment layer.
///
/// Variants are grouped by how the command line reports them: configuration
/// problems exit with status 2, numerical failures with status 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("no interface: field is one-signed")]
    NoInterface,

    #[error("empty point set")]
    EmptyPointSet,

    #[error("empty seed set")]
    EmptySeed,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("CFL violation in {solver}: dt = {dt:e} exceeds bound {bound:e} ({rule})")]
    Cfl {
        solver: &'static str,
        dt: f64,
        bound: f64,
        rule: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical blowup in {solver} at step {step} (t = {time:e})")]
    Blowup {
        solver: &'static str,
        step: usize,
        time: f64,
    },

    #[error("ODE step instability: step {step:e} too large, try {suggested:e} or smaller")]
    OdeStep { step: f64, suggested: f64 },

    #[error("mismatched domains: {0}")]
    DomainMismatch(String),

    #[error("expression: {0}")]
    Expr(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("at epsilon = {epsilon}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical failure during a run (as opposed
    /// to invalid input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Blowup { .. } | Error::OdeStep { .. } => true,
            Error::AtEpsilon { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
