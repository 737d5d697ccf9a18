use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model parameter failed its constructor constraint.
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },
    /// An argument lies outside the domain of the function.
    Domain(String),
    /// The quantity is undefined at this point (e.g. elasticity where `p(f) = 0`).
    Degenerate(String),
    /// An iterative method hit its iteration cap.
    NonConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// The operation does not apply to this model.
    Precondition(String),
    /// A worst-case construction is infeasible.
    Infeasible {
        reason: String,
        min_users: Option<usize>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                name,
                constraint,
                value,
            } => write!(
                f,
                "invalid parameter {name} = {value}: requires {constraint}"
            ),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate: {msg}"),
            Error::NonConvergence {
                context,
                iterations,
                residual,
            } => write!(
                f,
                "{context} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Precondition(msg) => write!(f, "precondition failed: {msg}"),
            Error::Infeasible { reason, min_users } => match min_users {
                Some(r) => write!(f, "infeasible: {reason} (needs at least {r} users)"),
                None => write!(f, "infeasible: {reason}"),
            },
        }
    }
}

impl core::error::Error for Error {}
