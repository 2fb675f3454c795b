//! Theory side of kernel-classification learning curves under power-law
//! (source/capacity) spectra.
//!
//! The crate covers three layers:
//!
//! * [`spectrum`] — the power-law data model `omega_k = k^-alpha`,
//!   `theta_k = k^-(1+alpha(2r-1))/2`, explicit (measured) spectra, and the
//!   truncated resolvent sums every solver consumes.
//! * [`state_evolution`] — fixed points of the self-consistent equations
//!   characterizing max-margin, regularized-hinge and ridge classification
//!   under Gaussian design, and the map from order parameters to the
//!   misclassification error.
//! * [`rates`] — closed-form decay exponents for all of the above, plus the
//!   classical worst-case bound they are compared against.
//!
//! The crate is `no_std` (with `alloc`); all transcendentals come from
//! `libm`. Monte Carlo verification, gram-matrix estimation and the CLI live
//! in the companion `ksl` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;
pub mod quadrature;
pub mod rates;
pub mod spectrum;
pub mod state_evolution;
pub mod sweep;

pub use error::{Error, Result};
pub use rates::RateReport;
pub use spectrum::{ExplicitSpectrum, PowerLawModel};
pub use state_evolution::{OrderParameters, Solution, SolverConfig};
pub use sweep::{CurvePoint, LambdaRule, LearningCurve, Method};
