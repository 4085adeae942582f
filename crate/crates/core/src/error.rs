use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Parse failure with the byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("variable `{0}` outside the model dimension")]
    VariableIndex(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("{what} in `{subexpr}`")]
    Domain { what: &'static str, subexpr: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-polynomial expression `{0}`")]
    NonPolynomial(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("degenerate point: f = {value} at {location}")]
    Degenerate { value: f64, location: String },
    #[error("not integrable: {0}")]
    NotIntegrable(String),
    #[error("degenerate f: radicand {radicand:e} <= 0 at rho = {rho}")]
    NegativeRadicand { rho: f64, radicand: f64 },
    #[error("path leaves the domain at {0:?}")]
    PathOutsideDomain(Vec<f64>),
    #[error("trajectory left the domain at t = {t}: f = {f:e}")]
    DomainExit { t: f64, f: f64 },
    #[error("integration step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
