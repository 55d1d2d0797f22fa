use thiserror::Error;

/// Errors produced while building problem data or running solves.
#[derive(Debug, Error)]
pub enum Error {
    /// An exponent formula could not be evaluated at a quadrature point.
    #[error("exponent spec undefined at point {point:?}: {reason}")]
    UndefinedAtPoint { point: Vec<f64>, reason: String },

    /// A precondition on an argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bisection failed to meet its tolerance within the iteration budget.
    #[error("root finding did not converge within {max_iters} iterations; final bracket [{lo}, {hi}]")]
    NoConvergence { max_iters: u32, lo: f64, hi: f64 },

    /// Rayleigh quotient requested at a state with vanishing denominator.
    #[error("Rayleigh quotient undefined: denominator is zero")]
    QuotientUndefined,

    /// Retraction requested from a state with zero coupling energy.
    #[error("cannot retract: coupling energy vanishes for this state")]
    CannotRetract,

    /// A solve failed for a structural reason (as opposed to mere
    /// non-convergence, which is reported in the result).
    #[error("solver error: {0}")]
    Solver(String),

    /// Run configuration text could not be parsed.
    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// A parsed configuration value was outside its documented range.
    #[error("config value out of range for `{key}`: {message}")]
    ConfigRange { key: String, message: String },

    /// A required input file was malformed.
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
