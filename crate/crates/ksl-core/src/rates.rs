//! Closed-form decay exponents of the misclassification error with the
//! sample count, as functions of the capacity `alpha` and source `r`.
//!
//! Conventions: an exponent `a` means `error ~ n^-a`. Saturations are
//! inclusive: `min()` clamps put the boundary on the saturated branch.

use alloc::string::String;

use serde::Serialize;

use crate::error::{Error, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::Domain(String::from("capacity alpha must exceed 1")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(String::from("source r must be non-negative")));
    }
    Ok(())
}

/// Max-margin rate `alpha min(r, 1/2) / (1 + alpha min(r, 1/2))`.
pub fn svm_rate(alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    let s = alpha * r.min(0.5);
    Ok(s / (1.0 + s))
}

/// Ridge rate at regularization decay `ell`:
/// `0.5 min(2 ell min(r,1), (alpha-ell)/alpha)` for `ell <= alpha`, else the
/// plateau (exponent 0).
pub fn ridge_rate(alpha: f64, r: f64, ell: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_r(r)?;
    if !(ell >= 0.0) {
        return Err(Error::Domain(String::from("ell must be non-negative")));
    }
    if ell > alpha {
        return Ok(0.0);
    }
    Ok(0.5 * (2.0 * ell * r.min(1.0)).min((alpha - ell) / alpha))
}

/// Optimal ridge decay and rate:
/// `ell* = alpha / (1 + 2 alpha min(r,1))`,
/// rate `alpha min(r,1) / (1 + 2 alpha min(r,1))`.
pub fn ridge_optimal(alpha: f64, r: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    check_r(r)?;
    let m = r.min(1.0);
    let ell_star = alpha / (1.0 + 2.0 * alpha * m);
    let rate = alpha * m / (1.0 + 2.0 * alpha * m);
    Ok((ell_star, rate))
}

/// Regularized-hinge rate and the regime boundary `ell*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HingeRate {
    pub exponent: f64,
    /// Boundary decay: at `ell >= ell*` the max-margin rate is recovered.
    pub ell_star: f64,
}

/// Regularized-hinge rate `min(ell, ell*) r/(1+r)` with
/// `ell* = alpha (1+r)/(1+alpha r)`, derived for sources `r <= 1/2` only.
pub fn hinge_regularized_rate(alpha: f64, r: f64, ell: f64) -> Result<HingeRate> {
    check_alpha(alpha)?;
    check_r(r)?;
    if r > 0.5 {
        return Err(Error::UnsupportedSourceRange { r });
    }
    if !(ell >= 0.0) {
        return Err(Error::Domain(String::from("ell must be non-negative")));
    }
    let ell_star = hinge_ell_star(alpha, r);
    Ok(HingeRate { exponent: ell.min(ell_star) * r / (1.0 + r), ell_star })
}

/// `ell* = alpha (1 + min(r,1/2)) / (1 + alpha min(r,1/2))`.
pub fn hinge_ell_star(alpha: f64, r: f64) -> f64 {
    let m = r.min(0.5);
    alpha * (1.0 + m) / (1.0 + alpha * m)
}

/// Noisy-ridge excess-error rate: exactly twice the noiseless ridge rate,
/// `min(2 ell min(r,1), (alpha-ell)/alpha)`; plateau for `ell > alpha`.
pub fn noisy_ridge_rate(alpha: f64, r: f64, ell: f64) -> Result<f64> {
    Ok(2.0 * ridge_rate(alpha, r, ell)?)
}

/// Asymptotic noisy rate `alpha/(1+alpha)` the excess error crosses over to.
pub fn noisy_crossover_rate(alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(Error::Domain(String::from("capacity alpha must be at least 1")));
    }
    Ok(alpha / (1.0 + alpha))
}

/// Classical worst-case upper bound `min(1/2, alpha/(3+alpha))` on the
/// max-margin rate; meaningful only for sources `r > 1/2` (target in the
/// RKHS). Uses the Bernstein constants `B = V = 2`, `theta = 1` fixed by the
/// noiseless hinge setting.
pub fn worst_case_svm_bound(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((alpha / (3.0 + alpha)).min(0.5))
}

/// Approximation-error exponent of the regularized hinge objective.
pub const APPROXIMATION_ERROR_EXPONENT: f64 = 1.0 / 3.0;

/// All exponents at one `(alpha, r)`, with the structural comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub alpha: f64,
    pub r: f64,
    /// Max-margin exponent.
    pub a_svm: f64,
    /// Optimally regularized ridge exponent.
    pub a_ridge_opt: f64,
    /// Optimal ridge regularization decay.
    pub ell_star_ridge: f64,
    /// Hinge regularization boundary decay.
    pub ell_star_hinge: f64,
    /// Classical worst-case bound; only applicable for `r > 1/2`.
    pub a_worst_case: Option<f64>,
    /// Asymptotic noisy optimal exponent.
    pub a_noisy_opt: f64,
    /// Approximation-error exponent (constant 1/3).
    pub b: f64,
    pub svm_beats_ridge: bool,
    pub svm_beats_worst_case: Option<bool>,
}

/// Populate every exponent at `(alpha, r)`.
pub fn compare(alpha: f64, r: f64) -> Result<RateReport> {
    let a_svm = svm_rate(alpha, r)?;
    let (ell_star_ridge, a_ridge_opt) = ridge_optimal(alpha, r)?;
    let ell_star_hinge = hinge_ell_star(alpha, r);
    let a_noisy_opt = noisy_crossover_rate(alpha)?;
    let worst = if r > 0.5 { Some(worst_case_svm_bound(alpha)?) } else { None };
    Ok(RateReport {
        alpha,
        r,
        a_svm,
        a_ridge_opt,
        ell_star_ridge,
        ell_star_hinge,
        a_worst_case: worst,
        a_noisy_opt,
        b: APPROXIMATION_ERROR_EXPONENT,
        svm_beats_ridge: a_svm > a_ridge_opt,
        svm_beats_worst_case: worst.map(|w| a_svm > w),
    })
}
