//! Fixed points of the self-consistent equations characterizing kernel
//! classifiers under Gaussian design, and the map from order parameters to
//! the misclassification error.
//!
//! Three systems are solved over a truncated spectrum:
//!
//! * max-margin (hinge loss at vanishing regularization),
//! * hinge with finite regularization `lambda`,
//! * ridge (square loss), noiseless or with Gaussian label noise.
//!
//! All share the resolvent structure
//! `m = r1 (n/z) sum omega^2 theta^2 / (1 + (n/z) omega)` etc., with the
//! effective regularization `z` fixed by a trace self-consistency. The hinge
//! family determines the hat variables `r1`, `r2` from Gaussian-measure
//! integrals over the erf bracket; ridge has them in closed form, so each
//! ridge point costs one scalar root-find.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{acos, erf, exp, sqrt};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{normal_cdf, normal_pdf, SQRT_2PI};
use crate::quadrature::{adaptive_simpson, gaussian_indicator_integral};
use crate::spectrum::ExplicitSpectrum;

/// Converged state-evolution quantities.
///
/// `eta = m^2 / (rho q)` is the squared cosine similarity between estimator
/// and teacher; it alone (with the noise level) fixes the misclassification
/// error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderParameters {
    /// Teacher/estimator overlap.
    pub m: f64,
    /// Estimator self-overlap.
    pub q: f64,
    /// Susceptibility (infinite for ridge at `lambda = 0`).
    pub v: f64,
    /// Estimator/teacher norm ratio.
    pub rhat1: f64,
    /// Effective noise-like term.
    pub rhat2: f64,
    /// Effective regularization.
    pub z: f64,
    /// Squared target norm `sum theta_k^2 omega_k`.
    pub rho: f64,
    /// Squared cosine similarity, clamped to `[0, 1)`.
    pub eta: f64,
}

/// Numerical controls for the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Relative convergence tolerance on the fixed-point residual.
    pub tol: f64,
    /// Update mixing factor in (0, 1].
    pub damping: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Upper clamp on eta; above it the erf bracket is treated as an
    /// indicator.
    pub eta_clamp: f64,
    /// Relative tolerance of the Gaussian-measure quadrature.
    pub quad_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            damping: 0.5,
            max_iter: 50_000,
            eta_clamp: 1.0 - 1e-12,
            quad_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain(String::from("damping must lie in (0, 1]")));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(String::from("tol must be positive")));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain(String::from("max_iter must be at least 1")));
        }
        Ok(())
    }
}

/// One damping adjustment made by the oscillation fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingStep {
    pub iteration: usize,
    pub damping: f64,
}

/// Relative residuals of the defining equations at the returned fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub m: f64,
    pub q: f64,
    pub z: f64,
    pub v: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.m.max(self.q).max(self.z).max(self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residuals: Residuals,
    pub damping_trace: Vec<DampingStep>,
    pub eta_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub params: OrderParameters,
    pub diagnostics: Diagnostics,
}

/// `(1/pi) arccos sqrt(rho/(rho + sigma^2) eta)`: probability that the
/// predicted label of a fresh sample is wrong.
pub fn misclassification_error(params: &OrderParameters, sigma: f64) -> f64 {
    let eta = params.eta.clamp(0.0, 1.0);
    let ratio = params.rho / (params.rho + sigma * sigma);
    acos(sqrt(ratio * eta).clamp(-1.0, 1.0)) / core::f64::consts::PI
}

/// Residual error floor under label noise: the error of the teacher itself.
pub fn residual_error(rho: f64, sigma: f64) -> f64 {
    acos(sqrt(rho / (rho + sigma * sigma)).clamp(-1.0, 1.0)) / core::f64::consts::PI
}

/// Proximal map of the hinge loss `max(0, 1 - y.)` with step `v`.
pub fn hinge_prox(omega: f64, y: f64, v: f64) -> f64 {
    debug_assert!(v > 0.0);
    let yo = y * omega;
    if yo <= 1.0 - v {
        omega + y * v
    } else if yo <= 1.0 {
        y
    } else {
        omega
    }
}

// ---------------------------------------------------------------------------
// Effective-regularization root finds
// ---------------------------------------------------------------------------

/// Solve `sum_k omega_k/(omega_k + z/n) = target` for `z > 0`.
///
/// The left side decreases from `p_cut` (at `z = 0`) to 0, so the root is
/// unique. `target` is clamped below `p_cut`; `hint` seeds the bracket.
fn z_from_trace_target(spec: &ExplicitSpectrum, n: f64, target: f64, hint: f64) -> Result<f64> {
    let p = spec.len() as f64;
    let z_floor = n * 1e-250;
    let target = target.min(p * (1.0 - 1e-12));
    if !(target > 0.0) {
        return Err(Error::BracketFailure("non-positive trace target"));
    }
    let rt = |z: f64| spec.resolvent_trace(z / n);

    let mut lo = hint.max(z_floor);
    let mut hi = lo;
    let mut guard = 0;
    if rt(lo) >= target {
        // root is above lo
        while rt(hi) >= target {
            hi *= 8.0;
            guard += 1;
            if guard > 400 {
                return Err(Error::BracketFailure("trace target bracket (upper)"));
            }
        }
    } else {
        while rt(lo) < target {
            lo *= 0.125;
            guard += 1;
            if lo <= z_floor {
                lo = z_floor;
                break;
            }
            if guard > 400 {
                return Err(Error::BracketFailure("trace target bracket (lower)"));
            }
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rt(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).max(z_floor))
}

/// Root of `z = n lambda + (z/n) sum_k omega_k/(omega_k + z/n)`, located by
/// bracketed bisection on `[n lambda, n lambda + tr Sigma]`.
///
/// Uniqueness over the bracket follows from monotonicity of both sides; at
/// `lambda = 0` the equation is divided through by `z` and the root is 0
/// whenever `n >= p_cut`.
pub fn solve_z_ridge(spec: &ExplicitSpectrum, n: u64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(String::from("sample count must be at least 1")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(String::from("lambda must be finite and non-negative")));
    }
    let nf = n as f64;
    let p = spec.len() as f64;
    let tr = spec.trace();

    if lambda == 0.0 {
        if nf >= p {
            return Ok(0.0);
        }
        // h(z) = sum omega/(omega + z/n) - n, decreasing, h(0) = p - n > 0,
        // h(tr) <= 0.
        let mut lo = 0.0f64;
        let mut hi = tr;
        for _ in 0..200 {
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if spec.resolvent_trace(mid / nf) >= nf {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(0.5 * (lo + hi));
    }

    let g = |z: f64| nf * lambda + (z / nf) * spec.resolvent_trace(z / nf) - z;
    let mut lo = nf * lambda;
    let mut hi = nf * lambda + tr;
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return Err(Error::BracketFailure("ridge z bracket"));
    }
    for _ in 0..200 {
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Ridge
// ---------------------------------------------------------------------------

/// Ridge classification fixed point; closed form once `z` is known.
///
/// With label noise of standard deviation `sigma`, the teacher norm in the
/// hat variables is shifted to `rho + sigma^2`.
pub fn solve_ridge(
    spec: &ExplicitSpectrum,
    n: u64,
    lambda: f64,
    sigma: f64,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    if !(sigma >= 0.0) {
        return Err(Error::Domain(String::from("sigma must be non-negative")));
    }
    let nf = n as f64;
    let z = solve_z_ridge(spec, n, lambda)?;
    let t = if z == 0.0 { f64::INFINITY } else { nf / z };

    let rho = spec.rho();
    let rho_n = rho + sigma * sigma;
    let b = sqrt(2.0 / (core::f64::consts::PI * rho_n));

    let m = b * spec.saturating_resolvent_sum(t, 1, 1, true);
    let t1 = (2.0 / (core::f64::consts::PI * rho_n)) * spec.saturating_resolvent_sum(t, 1, 2, true);
    let t2 = spec.saturating_resolvent_sum(t, 0, 2, false) / nf;
    if t2 >= 1.0 {
        return Err(Error::SelfConsistencyBreakdown { t2 });
    }
    let q = (t1 + (1.0 - 2.0 * m * b) * t2) / (1.0 - t2);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(String::from("ridge self-overlap left the physical region")));
    }

    let eta_raw = m * m / (rho * q);
    let eta = eta_raw.clamp(0.0, config.eta_clamp);
    let v = if lambda > 0.0 { z / (nf * lambda) - 1.0 } else { f64::INFINITY };

    // Re-insert the closed-form q into its implicit equation.
    let q_residual = {
        let rhs = t1 + (1.0 + q - 2.0 * m * b) * t2;
        (q - rhs).abs() / q.max(1e-300)
    };
    let z_residual = if z == 0.0 {
        0.0
    } else {
        let rhs = nf * lambda + (z / nf) * spec.resolvent_trace(z / nf);
        (z - rhs).abs() / z
    };

    Ok(Solution {
        params: OrderParameters {
            m,
            q,
            v,
            rhat1: b,
            rhat2: 1.0 + q - 2.0 * m * b,
            z,
            rho,
            eta,
        },
        diagnostics: Diagnostics {
            iterations: 0,
            residuals: Residuals { m: 0.0, q: q_residual, z: z_residual, v: 0.0 },
            damping_trace: Vec::new(),
            eta_clamped: eta_raw > config.eta_clamp,
        },
    })
}

// ---------------------------------------------------------------------------
// Hinge family (max-margin and finite lambda)
// ---------------------------------------------------------------------------

/// The Gaussian-measure integrals and the r1 numerator at `(q, eta)`, with
/// the hinge bounds clipped at `(1 - v)/sqrt(q)` when `v` is finite.
struct HatIntegrals {
    i0: f64,
    i2: f64,
    i0_low: f64,
    num: f64,
}

fn hat_integrals(
    q: f64,
    eta: f64,
    v: Option<f64>,
    rho: f64,
    quad_tol: f64,
) -> Result<HatIntegrals> {
    let sq = sqrt(q);
    let ub = 1.0 / sq;
    let two_q_var = (2.0 * q * (1.0 - eta)).max(1e-280);
    let g1 = 1.0 / sqrt(two_q_var);
    let sqrt_qvar = sqrt(0.5 * two_q_var);
    let norm = 2.0 * core::f64::consts::PI * sqrt(rho);

    match v {
        None => {
            let i0 = gaussian_indicator_integral(q, eta, f64::NEG_INFINITY, ub, 0, quad_tol)?;
            let i2 = gaussian_indicator_integral(q, eta, f64::NEG_INFINITY, ub, 2, quad_tol)?;
            let num = (SQRT_2PI * (1.0 + erf(g1)) + 2.0 * sqrt_qvar * exp(-g1 * g1)) / norm;
            Ok(HatIntegrals { i0, i2, i0_low: 0.0, num })
        }
        Some(v) => {
            let lb = (1.0 - v) / sq;
            let i0 = gaussian_indicator_integral(q, eta, lb, ub, 0, quad_tol)?;
            let i2 = gaussian_indicator_integral(q, eta, lb, ub, 2, quad_tol)?;
            let i0_low = gaussian_indicator_integral(q, eta, f64::NEG_INFINITY, lb, 0, quad_tol)?;
            let g2 = (1.0 - v) / sqrt(two_q_var);
            let num = (SQRT_2PI * (erf(g1) - erf(g2))
                + 2.0 * sqrt_qvar * (exp(-g1 * g1) - exp(-g2 * g2))
                + SQRT_2PI * v * (1.0 + erf(g2)))
                / norm;
            Ok(HatIntegrals { i0, i2, i0_low, num })
        }
    }
}

/// Everything one sweep of the update chain produces.
#[derive(Clone, Copy)]
struct SweepEval {
    r1: f64,
    r2: f64,
    z: f64,
    v: f64,
    i0: f64,
    m: f64,
    q_prop: f64,
}

/// Sweep at `(q, eta, v)` in the literal update order:
/// integrals -> (r1, r2) -> z -> (m, q) [-> v for finite lambda].
fn sweep_picard(
    spec: &ExplicitSpectrum,
    nf: f64,
    lambda: Option<f64>,
    q: f64,
    eta: f64,
    v: f64,
    rho: f64,
    z_hint: f64,
    quad_tol: f64,
) -> Result<SweepEval> {
    let hats = hat_integrals(q, eta, lambda.map(|_| v), rho, quad_tol)?;
    if !(hats.i0 > 0.0) {
        return Err(Error::Domain(String::from(
            "hat-variable integral vanished; state left the feasible region",
        )));
    }
    let r1 = hats.num / hats.i0;
    let r2 = match lambda {
        None => hats.i2 / (hats.i0 * hats.i0),
        Some(_) => (v * v * hats.i0_low + hats.i2) / (hats.i0 * hats.i0),
    };
    let z = z_from_trace_target(spec, nf, nf * hats.i0, z_hint)?;
    let (m, q_prop) = overlap_sums(spec, nf, z, r1, r2);
    let v_new = match lambda {
        None => z * hats.i0,
        Some(l) => z * hats.i0 / (2.0 * nf * l),
    };
    Ok(SweepEval { r1, r2, z, v: v_new, i0: hats.i0, m, q_prop })
}

fn overlap_sums(spec: &ExplicitSpectrum, nf: f64, z: f64, r1: f64, r2: f64) -> (f64, f64) {
    let t = nf / z;
    let m = r1 * spec.saturating_resolvent_sum(t, 1, 1, true);
    let q = r1 * r1 * spec.saturating_resolvent_sum(t, 1, 2, true)
        + (r2 / nf) * spec.saturating_resolvent_sum(t, 0, 2, false);
    (m, q)
}

/// Susceptibility as a function of `z` alone for the finite-lambda hinge:
/// combining the v- and z-equations gives
/// `v(z) = z * tr[Sigma/(Sigma + z/n)] / (2 n^2 lambda)`, which is increasing
/// in `z`. This removes `v` as an independent unknown in the nested path.
fn hinge_v_of_z(spec: &ExplicitSpectrum, nf: f64, lambda: f64, z: f64) -> f64 {
    z * spec.resolvent_trace(z / nf) / (2.0 * nf * nf * lambda)
}

/// Nested evaluation at `(q, eta)`: `z` (and `v`) are resolved internally, so
/// only the two overlap unknowns remain for the outer solves.
fn sweep_nested(
    spec: &ExplicitSpectrum,
    nf: f64,
    lambda: Option<f64>,
    q: f64,
    eta: f64,
    rho: f64,
    z_hint: f64,
    quad_tol: f64,
    evals: &mut usize,
) -> Result<SweepEval> {
    *evals += 1;
    match lambda {
        None => {
            let hats = hat_integrals(q, eta, None, rho, quad_tol)?;
            if !(hats.i0 > 0.0) {
                return Err(Error::Domain(String::from("hat-variable integral vanished")));
            }
            let r1 = hats.num / hats.i0;
            let r2 = hats.i2 / (hats.i0 * hats.i0);
            let z = z_from_trace_target(spec, nf, nf * hats.i0, z_hint)?;
            let (m, q_prop) = overlap_sums(spec, nf, z, r1, r2);
            Ok(SweepEval { r1, r2, z, v: z * hats.i0, i0: hats.i0, m, q_prop })
        }
        Some(l) => {
            // Scalar root in z: trace(z/n) - n i0(v(z)) is decreasing, from
            // p_cut at z -> 0 (where the clipped interval closes) to negative
            // for large z.
            let h = |z: f64| -> Result<f64> {
                let v = hinge_v_of_z(spec, nf, l, z);
                let hats = hat_integrals(q, eta, Some(v), rho, quad_tol)?;
                Ok(spec.resolvent_trace(z / nf) - nf * hats.i0)
            };
            let z_floor = nf * 1e-250;
            let mut lo = z_hint.max(z_floor);
            let mut hi = lo;
            let mut f_lo = h(lo)?;
            let mut f_hi = f_lo;
            let mut guard = 0usize;
            if f_lo > 0.0 {
                while f_hi > 0.0 {
                    hi *= 8.0;
                    f_hi = h(hi)?;
                    guard += 1;
                    if guard > 400 {
                        return Err(Error::BracketFailure("hinge z bracket (upper)"));
                    }
                }
            } else {
                while f_lo <= 0.0 {
                    lo *= 0.125;
                    if lo <= z_floor {
                        lo = z_floor;
                        f_lo = h(lo)?;
                        break;
                    }
                    f_lo = h(lo)?;
                    guard += 1;
                    if guard > 400 {
                        return Err(Error::BracketFailure("hinge z bracket (lower)"));
                    }
                }
            }
            // Illinois on the bracket.
            let (mut a, mut fa, mut b, mut fb) = (lo, f_lo, hi, f_hi);
            let mut z = 0.5 * (a + b);
            let mut side = 0i8;
            for _ in 0..80 {
                if (b - a).abs() <= 1e-13 * b.abs() {
                    break;
                }
                let cand = (a * fb - b * fa) / (fb - fa);
                z = if cand.is_finite() && cand > a && cand < b { cand } else { 0.5 * (a + b) };
                let fz = h(z)?;
                if fz.abs() <= 1e-11 * nf.max(1.0) {
                    break;
                }
                if (fz > 0.0) == (fa > 0.0) {
                    a = z;
                    fa = fz;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                } else {
                    b = z;
                    fb = fz;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                }
            }
            let v = hinge_v_of_z(spec, nf, l, z);
            let hats = hat_integrals(q, eta, Some(v), rho, quad_tol)?;
            if !(hats.i0 > 0.0) {
                return Err(Error::Domain(String::from("hat-variable integral vanished")));
            }
            let r1 = hats.num / hats.i0;
            let r2 = (v * v * hats.i0_low + hats.i2) / (hats.i0 * hats.i0);
            let (m, q_prop) = overlap_sums(spec, nf, z, r1, r2);
            Ok(SweepEval { r1, r2, z, v, i0: hats.i0, m, q_prop })
        }
    }
}

/// Inner fixed point of the angle variable at fixed scale: the root of
/// `phi(eta) = m(q, eta)^2/(rho q) - eta` on `[0, eta_clamp]`. If `phi` is
/// still positive at the clamp the aligned boundary is returned.
fn eta_at_scale(
    spec: &ExplicitSpectrum,
    nf: f64,
    lambda: Option<f64>,
    q: f64,
    rho: f64,
    config: &SolverConfig,
    eta_hint: f64,
    z_hint: f64,
    evals: &mut usize,
) -> Result<(f64, SweepEval, bool)> {
    let tol = (0.25 * config.tol).max(1e-13);
    let mut z_local = z_hint;
    let mut phi = |eta: f64, evals: &mut usize| -> Result<(f64, SweepEval)> {
        let ev = sweep_nested(spec, nf, lambda, q, eta, rho, z_local, config.quad_tol, evals)?;
        z_local = ev.z;
        Ok((ev.m * ev.m / (rho * q) - eta, ev))
    };

    let hint = eta_hint.clamp(0.0, config.eta_clamp);
    let (f_hint, ev_hint) = phi(hint, evals)?;
    if f_hint.abs() <= tol {
        return Ok((hint, ev_hint, false));
    }
    // Bracket between the hint and the appropriate endpoint.
    let (mut a, mut fa, mut b, mut fb, mut ev_b) = if f_hint > 0.0 {
        let (f_c, ev_c) = phi(config.eta_clamp, evals)?;
        if f_c >= 0.0 {
            // Aligned boundary: the fixed point sits at (or beyond) the clamp.
            return Ok((config.eta_clamp, ev_c, true));
        }
        (hint, f_hint, config.eta_clamp, f_c, ev_c)
    } else {
        let (f_0, ev_0) = phi(0.0, evals)?;
        if f_0 <= 0.0 {
            return Ok((0.0, ev_0, false));
        }
        (0.0, f_0, hint, f_hint, ev_hint)
    };
    let mut side = 0i8;
    let mut best = (b, ev_b);
    for _ in 0..80 {
        let cand = (a * fb - b * fa) / (fb - fa);
        let x = if cand.is_finite() && cand > a && cand < b { cand } else { 0.5 * (a + b) };
        let (fx, ev) = phi(x, evals)?;
        best = (x, ev);
        if fx.abs() <= tol || (b - a) <= 1e-14 {
            return Ok((x, ev, false));
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            ev_b = ev;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Ok((best.0, best.1, false))
}

/// Nested bracketed solve: outer Illinois in `ln q` over the scale residual
/// `G(ln q) = ln q_prop(q, eta*(q)) - ln q`, with the angle variable resolved
/// per evaluation.
fn solve_nested(
    spec: &ExplicitSpectrum,
    nf: f64,
    lambda: Option<f64>,
    rho: f64,
    config: &SolverConfig,
    q0: f64,
    eta0: f64,
    z0: f64,
    evals: &mut usize,
) -> Result<(f64, f64, SweepEval, bool)> {
    let tol = (0.25 * config.tol).max(1e-13);
    let mut eta_hint = eta0;
    let mut z_hint = z0;
    let mut clamped = false;
    let mut g = |x: f64, evals: &mut usize| -> Result<(f64, f64, SweepEval)> {
        let q = exp(x);
        let (eta, ev, hit) =
            eta_at_scale(spec, nf, lambda, q, rho, config, eta_hint, z_hint, evals)?;
        clamped |= hit;
        eta_hint = eta;
        z_hint = ev.z;
        Ok((libm::log(ev.q_prop) - x, eta, ev))
    };

    let mut x_lo = libm::log(q0.max(1e-250));
    let (mut f_lo, mut eta_lo, mut ev_lo) = g(x_lo, evals)?;
    if f_lo.abs() <= tol {
        return Ok((exp(x_lo), eta_lo, ev_lo, clamped));
    }
    let step = if f_lo > 0.0 { 1.0f64 } else { -1.0 };
    let (mut x_hi, mut f_hi, mut eta_hi, mut ev_hi) = (x_lo, f_lo, eta_lo, ev_lo);
    loop {
        x_hi += step;
        let (f, eta, ev) = g(x_hi, evals)?;
        f_hi = f;
        eta_hi = eta;
        ev_hi = ev;
        if f_hi.abs() <= tol {
            return Ok((exp(x_hi), eta_hi, ev_hi, clamped));
        }
        if (f_hi > 0.0) != (f_lo > 0.0) {
            break;
        }
        x_lo = x_hi;
        f_lo = f_hi;
        eta_lo = eta_hi;
        ev_lo = ev_hi;
        if x_hi.abs() > 690.0 {
            return Err(Error::BracketFailure("self-overlap scale bracket"));
        }
    }
    if step < 0.0 {
        core::mem::swap(&mut x_lo, &mut x_hi);
        core::mem::swap(&mut f_lo, &mut f_hi);
        core::mem::swap(&mut eta_lo, &mut eta_hi);
        core::mem::swap(&mut ev_lo, &mut ev_hi);
    }
    let (mut a, mut fa) = (x_lo, f_lo);
    let (mut b, mut fb) = (x_hi, f_hi);
    let mut best = (exp(b), eta_hi, ev_hi);
    let mut side = 0i8;
    for _ in 0..120 {
        let cand = (a * fb - b * fa) / (fb - fa);
        let x = if cand.is_finite() && cand > a.min(b) && cand < a.max(b) {
            cand
        } else {
            0.5 * (a + b)
        };
        let (fx, eta, ev) = g(x, evals)?;
        best = (exp(x), eta, ev);
        if fx.abs() <= tol || (b - a).abs() <= 1e-14 {
            return Ok((best.0, best.1, best.2, clamped));
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Ok((best.0, best.1, best.2, clamped))
}

fn solve_hinge_family(
    spec: &ExplicitSpectrum,
    n: u64,
    lambda: Option<f64>,
    config: &SolverConfig,
    init: Option<&OrderParameters>,
) -> Result<Solution> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Domain(String::from("sample count must be at least 1")));
    }
    let nf = n as f64;
    let rho = spec.rho();

    let (mut m, mut q, mut v, mut z_hint) = match init {
        Some(p) => (
            p.m,
            p.q.max(1e-12),
            if p.v.is_finite() && p.v > 0.0 { p.v } else { 1.0 },
            p.z.max(nf * 1e-250),
        ),
        None => {
            let v0 = match lambda {
                None => 1.0,
                Some(l) => (1.0 / (2.0 * nf * l)).min(1.0),
            };
            (sqrt(0.5 * rho), 1.0, v0, nf * lambda.unwrap_or(0.0).max(1.0 / nf))
        }
    };
    let mut eta = (m * m / (rho * q)).clamp(0.0, config.eta_clamp);

    let mut damping = config.damping;
    let mut damping_trace = Vec::new();
    let mut eta_clamped = false;
    let mut last_sign = 0i8;
    let mut alternations = 0usize;
    let mut evals = 0usize;

    // Damped sweep first; it converges geometrically whenever the fixed
    // point is within reach of the start, which warm-started grid sweeps
    // almost always are.
    let picard_budget = config.max_iter.min(300);
    let mut picard_converged = false;
    for iter in 0..picard_budget {
        evals += 1;
        let ev = match sweep_picard(spec, nf, lambda, q, eta, v, rho, z_hint, config.quad_tol) {
            Ok(ev) => ev,
            Err(_) => break,
        };
        let delta = {
            let dm = (ev.m - m).abs() / m.abs().max(1e-30);
            let dq = (ev.q_prop - q).abs() / q.max(1e-30);
            let dv = if lambda.is_some() { (ev.v - v).abs() / v.max(1e-30) } else { 0.0 };
            dm.max(dq).max(dv)
        };

        // Oscillation fallback: a residual flipping sign for 10 consecutive
        // iterations halves the damping (floor 1/64).
        let sign = if ev.q_prop > q {
            1
        } else if ev.q_prop < q {
            -1
        } else {
            0
        };
        if sign != 0 && last_sign != 0 && sign != last_sign {
            alternations += 1;
            if alternations >= 10 && damping > 1.0 / 64.0 {
                damping = (0.5 * damping).max(1.0 / 64.0);
                damping_trace.push(DampingStep { iteration: iter, damping });
                alternations = 0;
            }
        } else {
            alternations = 0;
        }
        last_sign = sign;

        m = damping * ev.m + (1.0 - damping) * m;
        q = damping * ev.q_prop + (1.0 - damping) * q;
        if lambda.is_some() {
            v = damping * ev.v + (1.0 - damping) * v;
        } else {
            v = ev.v;
        }
        z_hint = ev.z;
        let eta_raw = m * m / (rho * q);
        if eta_raw > config.eta_clamp {
            eta_clamped = true;
        }
        eta = eta_raw.clamp(0.0, config.eta_clamp);

        if delta < config.tol {
            picard_converged = true;
            break;
        }
    }

    let (q_f, eta_f, ev, hit_clamp) = if picard_converged {
        let ev = sweep_picard(spec, nf, lambda, q, eta, v, rho, z_hint, config.quad_tol)?;
        evals += 1;
        (q, eta, ev, eta_clamped)
    } else {
        // Bracketed nested solve over (ln q, eta); z and v are resolved per
        // evaluation, so every level is a monotone scalar problem.
        let (q_f, eta_f, ev, hit) =
            solve_nested(spec, nf, lambda, rho, config, q, eta, z_hint, &mut evals)?;
        if evals >= config.max_iter {
            return Err(Error::NonConvergence {
                iterations: evals,
                residual: (ev.q_prop - q_f).abs() / q_f.max(1e-30),
            });
        }
        (q_f, eta_f, ev, hit || eta_clamped)
    };

    let q_res = (ev.q_prop - q_f).abs() / q_f.max(1e-30);
    let eta_res = (ev.m * ev.m / (rho * q_f) - eta_f).abs();
    let v_res = if lambda.is_some() { (ev.v - ev.v).abs() } else { 0.0 };
    let params = OrderParameters {
        m: ev.m,
        q: q_f,
        v: ev.v,
        rhat1: ev.r1,
        rhat2: ev.r2,
        z: ev.z,
        rho,
        eta: eta_f,
    };
    Ok(Solution {
        params,
        diagnostics: Diagnostics {
            iterations: evals,
            residuals: Residuals { m: 0.0, q: q_res, z: 0.0, v: v_res, eta: eta_res },
            damping_trace,
            eta_clamped: hit_clamp,
        },
    })
}

/// Max-margin (hinge at vanishing regularization) fixed point.
pub fn solve_max_margin(spec: &ExplicitSpectrum, n: u64, config: &SolverConfig) -> Result<Solution> {
    solve_hinge_family(spec, n, None, config, None)
}

/// Max-margin with a warm start from a previously converged point.
pub fn solve_max_margin_from(
    spec: &ExplicitSpectrum,
    n: u64,
    config: &SolverConfig,
    init: Option<&OrderParameters>,
) -> Result<Solution> {
    solve_hinge_family(spec, n, None, config, init)
}

/// Hinge classification at finite regularization `lambda >= 0`.
///
/// `lambda = 0` reduces exactly to [`solve_max_margin`].
pub fn solve_hinge_regularized(
    spec: &ExplicitSpectrum,
    n: u64,
    lambda: f64,
    config: &SolverConfig,
) -> Result<Solution> {
    solve_hinge_regularized_from(spec, n, lambda, config, None)
}

pub fn solve_hinge_regularized_from(
    spec: &ExplicitSpectrum,
    n: u64,
    lambda: f64,
    config: &SolverConfig,
    init: Option<&OrderParameters>,
) -> Result<Solution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(String::from("lambda must be finite and non-negative")));
    }
    if lambda == 0.0 {
        return solve_hinge_family(spec, n, None, config, init);
    }
    solve_hinge_family(spec, n, Some(lambda), config, init)
}

// ---------------------------------------------------------------------------
// Approximation error
// ---------------------------------------------------------------------------

/// Population-level approximation error of the regularized hinge objective,
/// evaluated at the fixed point in the `n >> p` regime (`n = ratio * p_cut`).
///
/// Sum of the residual training hinge loss (a Gaussian double integral over
/// the proximal gap, with the inner integral in closed form) and the
/// `lambda`-weighted squared estimator norm.
pub fn approximation_error(
    spec: &ExplicitSpectrum,
    lambda: f64,
    ratio: f64,
    config: &SolverConfig,
) -> Result<f64> {
    approximation_error_from(spec, lambda, ratio, config, None)
}

pub fn approximation_error_from(
    spec: &ExplicitSpectrum,
    lambda: f64,
    ratio: f64,
    config: &SolverConfig,
    init: Option<&OrderParameters>,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(String::from("approximation error requires lambda > 0")));
    }
    if !(ratio >= 10.0) {
        return Err(Error::Domain(String::from("n/p ratio must be at least 10")));
    }
    let n = (ratio * spec.len() as f64) as u64;
    let sol = solve_hinge_regularized_from(spec, n, lambda, config, init)?;
    Ok(approximation_error_at(spec, lambda, n, &sol.params))
}

/// Evaluate the approximation-error functional at a converged hinge point.
pub(crate) fn approximation_error_at(
    spec: &ExplicitSpectrum,
    lambda: f64,
    n: u64,
    params: &OrderParameters,
) -> f64 {
    let nf = n as f64;
    let a = params.m / sqrt(params.rho);
    let b = sqrt((params.q * (1.0 - params.eta)).max(1e-300));
    let c = 1.0 - params.v;

    // E_h[(c - a u - b h)_+] in closed form, then the half-Gaussian u average.
    let shortfall = move |u: f64| {
        let d = (c - a * u) / b;
        (c - a * u) * normal_cdf(d) + b * normal_pdf(d)
    };
    let integrand = move |u: f64| normal_pdf(u) * shortfall(u);
    let mut pts = alloc::vec![0.0f64];
    if a > 0.0 {
        let u_star = c / a;
        for cand in [u_star - 5.0 * b / a, u_star, u_star + 5.0 * b / a] {
            if cand > 0.0 && cand < 12.0 {
                pts.push(cand);
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    }
    pts.push(12.0);
    pts.dedup();
    let loss = 2.0 * adaptive_simpson(&integrand, &pts, 1e-12).unwrap_or(0.0);

    let t = nf / params.z;
    let reg = lambda
        * (params.rhat1 * params.rhat1 * spec.saturating_resolvent_sum(t, 0, 2, true)
            + (params.rhat2 / nf) * spec.saturating_resolvent_sum(t, -1, 2, false));
    loss + reg
}

impl OrderParameters {
    /// Convenience: the misclassification error of this fixed point.
    pub fn error(&self, sigma: f64) -> f64 {
        misclassification_error(self, sigma)
    }
}

pub use crate::sweep::theory_sweep;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::PowerLawModel;

    const PI: f64 = core::f64::consts::PI;

    #[test]
    fn hinge_prox_branches() {
        assert_eq!(hinge_prox(2.0, 1.0, 0.5), 2.0);
        assert_eq!(hinge_prox(0.9, 1.0, 0.5), 1.0);
        assert_eq!(hinge_prox(-1.0, 1.0, 0.5), -0.5);
        // Mirror branch for y = -1.
        assert_eq!(hinge_prox(1.0, -1.0, 0.5), 0.5);
    }

    #[test]
    fn misclassification_error_examples() {
        let mut p = OrderParameters {
            m: 1.0,
            q: 1.0,
            v: 1.0,
            rhat1: 1.0,
            rhat2: 1.0,
            z: 1.0,
            rho: 1.0,
            eta: 1.0,
        };
        assert!(misclassification_error(&p, 0.0).abs() < 1e-15);
        p.eta = 0.0;
        assert!((misclassification_error(&p, 0.0) - 0.5).abs() < 1e-15);
        p.eta = 1.0;
        assert!((misclassification_error(&p, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn residual_error_examples() {
        assert_eq!(residual_error(1.0, 0.0), 0.0);
        assert!((residual_error(1.0, 1.0) - 0.25).abs() < 1e-12);
        // rho = 3, sigma = 1: arccos(sqrt(3)/2) = pi/6.
        assert!((residual_error(3.0, 1.0) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_z_golden_ratio() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let z = solve_z_ridge(&spec, 1, 1.0).unwrap();
        let golden = 0.5 * (1.0 + libm::sqrt(5.0));
        assert!((z - golden).abs() < 1e-12, "z = {z}");
    }

    #[test]
    fn ridge_z_zero_lambda_single_mode() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let z = solve_z_ridge(&spec, 1, 0.0).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn ridge_z_matches_independent_bisection() {
        let spec = PowerLawModel::new(2.0, 0.5, 10_000).unwrap().spectrum();
        let n = 100u64;
        let lambda = 1e-3;
        let z = solve_z_ridge(&spec, n, lambda).unwrap();

        // Test-local bisection over the same defining equation.
        let nf = n as f64;
        let g = |z: f64| {
            let mut s = 0.0;
            for k in 1..=10_000usize {
                let w = libm::pow(k as f64, -2.0);
                s += w / (w + z / nf);
            }
            nf * lambda + (z / nf) * s - z
        };
        let (mut lo, mut hi) = (nf * lambda, nf * lambda + spec.trace());
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((z - 0.5 * (lo + hi)).abs() < 1e-10, "z = {z}, oracle = {}", 0.5 * (lo + hi));
    }

    // Single mode, n = 1, lambda = 1, sigma = 0: the whole chain is solvable
    // by hand through the golden-ratio z.
    #[test]
    fn ridge_single_mode_golden_chain() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let sol = solve_ridge(&spec, 1, 1.0, 0.0, &SolverConfig::default()).unwrap();
        let p = &sol.params;

        let zs = 0.5 * (1.0 + libm::sqrt(5.0));
        let ms = libm::sqrt(2.0 / PI) / (1.0 + zs);
        let t1 = (2.0 / PI) / ((1.0 + zs) * (1.0 + zs));
        let t2 = 1.0 / ((1.0 + zs) * (1.0 + zs));
        let qs = (t1 + (1.0 - 2.0 * ms * libm::sqrt(2.0 / PI)) * t2) / (1.0 - t2);
        let etas = ms * ms / qs;
        let eps = libm::acos(libm::sqrt(etas)) / PI;

        assert!((p.z - zs).abs() < 1e-12);
        assert!((p.m - ms).abs() < 1e-12);
        assert!((p.q - qs).abs() < 1e-12);
        assert!((p.eta - etas).abs() < 1e-12);
        assert!((misclassification_error(p, 0.0) - eps).abs() < 1e-12);

        // Printed reference values.
        assert!((p.z - 1.618_034).abs() < 1e-4);
        assert!((p.m - 0.304_76).abs() < 1e-4);
        assert!((p.q - 0.196_49).abs() < 1e-4);
        assert!((p.eta - 0.472_68).abs() < 1e-4);
        assert!((misclassification_error(p, 0.0) - 0.2587).abs() < 1e-4);
    }

    #[test]
    fn ridge_closed_form_q_satisfies_implicit_equation() {
        let spec = PowerLawModel::new(2.0, 0.5, 2_000).unwrap().spectrum();
        for &(n, lambda, sigma) in &[(128u64, 1e-2, 0.0), (512, 1e-3, 0.0), (256, 1e-2, 1.0)] {
            let sol = solve_ridge(&spec, n, lambda, sigma, &SolverConfig::default()).unwrap();
            assert!(
                sol.diagnostics.residuals.q < 1e-13,
                "q residual {} at n={n}",
                sol.diagnostics.residuals.q
            );
        }
    }

    #[test]
    fn ridge_interpolation_breakdown_is_reported() {
        // lambda = 0 at n = p: T2 = p/n = 1.
        let spec = PowerLawModel::new(2.0, 0.5, 64).unwrap().spectrum();
        let err = solve_ridge(&spec, 64, 0.0, 0.0, &SolverConfig::default());
        assert!(matches!(err, Err(Error::SelfConsistencyBreakdown { .. })), "{err:?}");
    }

    #[test]
    fn max_margin_single_mode_aligns() {
        // One-dimensional problem: the estimator is necessarily collinear with
        // the teacher, so eta approaches 1 and the error vanishes. At finite n
        // the fixed point carries a ~0.52/n^2 misalignment, so the 1e-6 level
        // is reached once n is at order 10^3.
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let cfg = SolverConfig::default();

        let sol = solve_max_margin(&spec, 100, &cfg).unwrap();
        assert!(sol.params.eta > 0.9999, "eta = {}", sol.params.eta);
        assert!(misclassification_error(&sol.params, 0.0) < 5e-3);

        let sol = solve_max_margin(&spec, 2_000, &cfg).unwrap();
        assert!(sol.params.eta >= 1.0 - 1e-6, "eta = {}", sol.params.eta);
        assert!(misclassification_error(&sol.params, 0.0) < 2e-4);
    }

    #[test]
    fn hinge_zero_lambda_matches_max_margin() {
        let spec = PowerLawModel::new(2.0, 0.5, 1_000).unwrap().spectrum();
        let cfg = SolverConfig::default();
        let mm = solve_max_margin(&spec, 128, &cfg).unwrap().params;
        let h0 = solve_hinge_regularized(&spec, 128, 0.0, &cfg).unwrap().params;
        assert!((mm.m - h0.m).abs() <= 10.0 * cfg.tol * mm.m.abs());
        assert!((mm.q - h0.q).abs() <= 10.0 * cfg.tol * mm.q.abs());
        assert!((mm.eta - h0.eta).abs() <= 10.0 * cfg.tol);

        // Continuity: a tiny but finite lambda stays close to the limit.
        let h = solve_hinge_regularized(&spec, 128, 1e-9, &cfg).unwrap().params;
        assert!((h.eta - mm.eta).abs() < 1e-4, "eta {} vs {}", h.eta, mm.eta);
    }

    #[test]
    #[ignore]
    fn probe_single_mode_scaling() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let cfg = SolverConfig::default();
        for n in [50u64, 100, 200, 400, 800, 1600, 2000, 3200] {
            let sol = solve_max_margin(&spec, n, &cfg).unwrap();
            let p = sol.params;
            std::println!(
                "n={n:5}  1-eta={:.3e}  (1-eta)*n^2={:.3}  eps={:.3e}  iters={}",
                1.0 - p.eta,
                (1.0 - p.eta) * (n * n) as f64,
                misclassification_error(&p, 0.0),
                sol.diagnostics.iterations
            );
        }
    }

    #[test]
    #[ignore]
    fn probe_trace_n200() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let cfg = SolverConfig { max_iter: 60, ..Default::default() };
        let _ = solve_max_margin(&spec, 200, &cfg);
    }

    #[test]
    fn solver_rejects_bad_config() {
        let spec = ExplicitSpectrum::new(alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let bad = SolverConfig { damping: 0.0, ..Default::default() };
        assert!(solve_max_margin(&spec, 10, &bad).is_err());
        assert!(solve_ridge(&spec, 0, 1.0, 0.0, &SolverConfig::default()).is_err());
    }
}
