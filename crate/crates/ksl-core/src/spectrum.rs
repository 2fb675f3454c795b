//! Power-law data model and truncated spectral sums.
//!
//! The synthetic model has feature-covariance eigenvalues `omega_k = k^-alpha`
//! (capacity `alpha > 1`) and teacher components
//! `theta_k = k^-(1+alpha(2r-1))/2` (source `r >= 0`), hard-truncated at
//! `p_cut` modes. [`ExplicitSpectrum`] holds any materialized
//! eigenvalue/teacher pair — either from a [`PowerLawModel`] or measured from
//! a gram matrix — so every solver accepts both.

use alloc::string::String;
use alloc::vec::Vec;

use libm::pow;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::powi;

/// Default truncation of the mode sums.
pub const DEFAULT_P_CUT: usize = 10_000;

/// Capacity/source description of a power-law spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawModel {
    alpha: f64,
    r: f64,
    p_cut: usize,
}

impl PowerLawModel {
    pub fn new(alpha: f64, r: f64, p_cut: usize) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(Error::Domain(String::from(
                "capacity alpha must be finite and exceed 1 (trace-class condition)",
            )));
        }
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(String::from("source r must be finite and non-negative")));
        }
        if p_cut == 0 {
            return Err(Error::Domain(String::from("p_cut must be at least 1")));
        }
        Ok(Self { alpha, r, p_cut })
    }

    /// Model with the default `p_cut` of 10^4.
    pub fn with_default_cut(alpha: f64, r: f64) -> Result<Self> {
        Self::new(alpha, r, DEFAULT_P_CUT)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p_cut(&self) -> usize {
        self.p_cut
    }

    /// `omega_k = k^-alpha` for `1 <= k <= p_cut`.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(pow(k as f64, -self.alpha))
    }

    /// `theta_k = k^-(1+alpha(2r-1))/2` for `1 <= k <= p_cut`.
    pub fn teacher_component(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        let expo = -(1.0 + self.alpha * (2.0 * self.r - 1.0)) / 2.0;
        Ok(pow(k as f64, expo))
    }

    /// Materialize eigenvalues and teacher components up to `p_cut`.
    pub fn spectrum(&self) -> ExplicitSpectrum {
        let teacher_expo = -(1.0 + self.alpha * (2.0 * self.r - 1.0)) / 2.0;
        let mut eigenvalues = Vec::with_capacity(self.p_cut);
        let mut teacher = Vec::with_capacity(self.p_cut);
        for k in 1..=self.p_cut {
            eigenvalues.push(pow(k as f64, -self.alpha));
            teacher.push(pow(k as f64, teacher_expo));
        }
        ExplicitSpectrum { eigenvalues, teacher }
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.p_cut {
            return Err(Error::IndexOutOfRange { k, len: self.p_cut });
        }
        Ok(())
    }
}

/// Materialized spectrum: descending positive eigenvalues plus the teacher
/// components in the same basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSpectrum {
    eigenvalues: Vec<f64>,
    teacher: Vec<f64>,
}

impl ExplicitSpectrum {
    pub fn new(eigenvalues: Vec<f64>, teacher: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Domain(String::from("spectrum must contain at least one mode")));
        }
        if eigenvalues.len() != teacher.len() {
            return Err(Error::Domain(String::from(
                "eigenvalue and teacher sequences must have equal length",
            )));
        }
        let mut prev = f64::INFINITY;
        for &w in &eigenvalues {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(String::from("eigenvalues must be strictly positive")));
            }
            if w > prev {
                return Err(Error::Domain(String::from("eigenvalues must be nonincreasing")));
            }
            prev = w;
        }
        if teacher.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain(String::from("teacher components must be finite")));
        }
        Ok(Self { eigenvalues, teacher })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn teacher(&self) -> &[f64] {
        &self.teacher
    }

    /// Squared L2 norm of the target: `rho = sum_k theta_k^2 omega_k`.
    pub fn rho(&self) -> f64 {
        self.resolvent_sum(0.0, 1, 0, true)
    }

    /// `tr Sigma = sum_k omega_k`.
    pub fn trace(&self) -> f64 {
        self.resolvent_sum(0.0, 1, 0, false)
    }

    /// Generic truncated sum `sum_k omega_k^a [theta_k^2] / (1 + t omega_k)^c`.
    ///
    /// Every resolvent-style sum in the solvers is an instance of this with
    /// `t = n/z`. Accumulation runs from the tail (smallest terms) towards
    /// `k = 1` to limit cancellation on decaying summands.
    pub fn resolvent_sum(&self, t: f64, a: u32, c: u32, teacher_weighted: bool) -> f64 {
        debug_assert!(t >= 0.0);
        let mut acc = 0.0;
        for k in (0..self.eigenvalues.len()).rev() {
            let w = self.eigenvalues[k];
            let mut term = powi(w, a);
            if teacher_weighted {
                let th = self.teacher[k];
                term *= th * th;
            }
            if c > 0 {
                term /= powi(1.0 + t * w, c);
            }
            acc += term;
        }
        acc
    }

    /// `sum_k omega_k / (omega_k + z/n)`, the resolvent trace entering every
    /// effective-regularization equation. Decreasing in `z` from `p_cut`
    /// (at `z = 0`) towards 0.
    pub fn resolvent_trace(&self, z_over_n: f64) -> f64 {
        debug_assert!(z_over_n >= 0.0);
        let mut acc = 0.0;
        for k in (0..self.eigenvalues.len()).rev() {
            let w = self.eigenvalues[k];
            acc += w / (w + z_over_n);
        }
        acc
    }

    /// `sum_k (t omega_k / (1 + t omega_k))^c * omega_k^a [theta_k^2]`.
    ///
    /// Overflow-safe form of `t^c * resolvent_sum(t, a + c, c, .)` used inside
    /// the solvers: the saturating factor stays in (0, 1] for any `t`,
    /// including `t = +inf` (the `z -> 0` limit, where it equals 1).
    pub fn saturating_resolvent_sum(&self, t: f64, a: i32, c: u32, teacher_weighted: bool) -> f64 {
        debug_assert!(t >= 0.0);
        let mut acc = 0.0;
        for k in (0..self.eigenvalues.len()).rev() {
            let w = self.eigenvalues[k];
            let s = if t.is_infinite() {
                1.0
            } else {
                let tw = t * w;
                tw / (1.0 + tw)
            };
            let mut term = powi(s, c);
            term *= if a >= 0 { powi(w, a as u32) } else { 1.0 / powi(w, (-a) as u32) };
            if teacher_weighted {
                let th = self.teacher[k];
                term *= th * th;
            }
            acc += term;
        }
        acc
    }
}

impl From<&PowerLawModel> for ExplicitSpectrum {
    fn from(model: &PowerLawModel) -> Self {
        model.spectrum()
    }
}
