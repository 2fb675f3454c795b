use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors shared by the spectral sums, quadrature and fixed-point solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Model or argument outside the supported domain.
    Domain(String),
    /// Mode index outside `1..=p_cut`.
    IndexOutOfRange { k: usize, len: usize },
    /// Adaptive quadrature exhausted its subdivision budget.
    QuadratureBudget { estimate: f64, error: f64 },
    /// Fixed-point iteration did not reach the tolerance.
    NonConvergence { iterations: usize, residual: f64 },
    /// Root bracketing failed; indicates a violated positivity invariant.
    BracketFailure(&'static str),
    /// Ridge self-consistency `T2 >= 1`: the closed-form self-overlap has no
    /// physical solution at these parameters.
    SelfConsistencyBreakdown { t2: f64 },
    /// Regularized-hinge rate requested for a source `r > 1/2`.
    UnsupportedSourceRange { r: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "{msg}"),
            Error::IndexOutOfRange { k, len } => {
                write!(f, "mode index {k} out of range 1..={len}")
            }
            Error::QuadratureBudget { estimate, error } => write!(
                f,
                "quadrature budget exhausted (estimate {estimate:e}, unresolved error {error:e})"
            ),
            Error::NonConvergence { iterations, residual } => write!(
                f,
                "fixed point not converged after {iterations} iterations (residual {residual:e})"
            ),
            Error::BracketFailure(what) => write!(f, "root bracketing failed: {what}"),
            Error::SelfConsistencyBreakdown { t2 } => write!(
                f,
                "self-consistency breakdown: resolvent weight T2 = {t2} >= 1 (non-physical regime)"
            ),
            Error::UnsupportedSourceRange { r } => {
                write!(f, "regularized-hinge rate is only derived for r <= 1/2 (got r = {r})")
            }
        }
    }
}

impl core::error::Error for Error {}
