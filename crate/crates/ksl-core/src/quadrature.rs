//! Adaptive quadrature for the Gaussian-measure integrals of the
//! state-evolution equations.
//!
//! Every hat-variable integral has the shape
//! `int Dx [1 + erf(sqrt(eta/(2(1-eta))) x)] (1 - sqrt(q) x)^moment`
//! with `Dx` the standard Gaussian measure. The erf bracket degenerates to
//! `2 * 1{x > 0}` as `eta -> 1`; at or above the clamp the integral is
//! evaluated in that limit from closed-form Gaussian moments.

use alloc::vec;
use alloc::vec::Vec;

use libm::{erf, sqrt};

use crate::error::{Error, Result};
use crate::math::{gaussian_poly_moment, normal_pdf, powi};

/// Default relative tolerance.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Gaussian mass beyond 12 standard deviations is ~1.8e-32; the semi-infinite
/// tails are truncated there.
const TAIL_CUTOFF: f64 = 12.0;

/// Above this cosine-similarity the erf bracket is numerically an indicator.
pub const ETA_DEGENERATE: f64 = 1.0 - 1e-12;

const MAX_EVALS: usize = 400_000;

/// `int_lower^upper Dx [1 + erf(sqrt(eta/(2(1-eta))) x)] (1 - sqrt(q) x)^moment`.
///
/// Bounds may be infinite. `moment` must be 0, 1 or 2. For
/// `eta >= 1 - 1e-12` the indicator limit is evaluated exactly.
pub fn gaussian_indicator_integral(
    q: f64,
    eta: f64,
    lower: f64,
    upper: f64,
    moment: u32,
    rel_tol: f64,
) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(alloc::string::String::from("q must be positive and finite")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(alloc::string::String::from("eta must lie in [0, 1]")));
    }
    if moment > 2 {
        return Err(Error::Domain(alloc::string::String::from("moment must be 0, 1 or 2")));
    }
    if lower > upper {
        return Err(Error::Domain(alloc::string::String::from(
            "integration bounds must be ordered",
        )));
    }
    let s = sqrt(q);

    if eta >= ETA_DEGENERATE {
        // Indicator limit: bracket = 2 for x > 0, 0 for x < 0.
        let lo = if lower < 0.0 { 0.0 } else { lower };
        if lo >= upper {
            return Ok(0.0);
        }
        return Ok(2.0 * gaussian_poly_moment(lo, upper, moment, s));
    }

    let a = lower.max(-TAIL_CUTOFF);
    let b = upper.min(TAIL_CUTOFF);
    if a >= b {
        return Ok(0.0);
    }

    let c = sqrt(eta / (2.0 * (1.0 - eta)));
    let f = move |x: f64| normal_pdf(x) * (1.0 + erf(c * x)) * powi(1.0 - s * x, moment);

    // Seed the subdivision at the erf transition region and the origin so the
    // steep bracket is always resolved.
    let mut pts = vec![a];
    let mut candidates = [f64::NAN; 5];
    let mut ncand = 0;
    if c > 0.0 {
        candidates[ncand] = -8.0 / c;
        candidates[ncand + 1] = 8.0 / c;
        ncand += 2;
    }
    candidates[ncand] = -1.0;
    candidates[ncand + 1] = 0.0;
    candidates[ncand + 2] = 1.0;
    ncand += 3;
    let mut inner: Vec<f64> =
        candidates[..ncand].iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(inner);
    pts.push(b);
    pts.dedup();

    adaptive_simpson(&f, &pts, rel_tol)
}

#[inline]
fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    estimate: f64,
    tol: f64,
}

/// Adaptive Simpson subdivision over the seeded breakpoints, relative
/// tolerance against the coarse total.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, pts: &[f64], rel_tol: f64) -> Result<f64> {
    debug_assert!(pts.len() >= 2);
    let mut evals = 0usize;
    let eval = |x: f64| f(x);

    let mut stack: Vec<Panel> = Vec::with_capacity(64);
    let mut coarse = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (eval(a), eval(m), eval(b));
        evals += 3;
        let estimate = simpson(b - a, fa, fm, fb);
        coarse += estimate;
        stack.push(Panel { a, b, fa, fm, fb, estimate, tol: 0.0 });
    }
    let scale = coarse.abs().max(1e-300);
    let panel_tol = rel_tol * scale / stack.len() as f64;
    for p in &mut stack {
        p.tol = panel_tol;
    }

    let span = pts[pts.len() - 1] - pts[0];
    let min_width = span * 1e-14;
    let mut total = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let m1 = 0.5 * (p.a + m);
        let m2 = 0.5 * (m + p.b);
        let (f1, f2) = (eval(m1), eval(m2));
        evals += 2;
        if evals > MAX_EVALS {
            return Err(Error::QuadratureBudget { estimate: total + p.estimate, error: p.tol });
        }
        let left = simpson(m - p.a, p.fa, f1, p.fm);
        let right = simpson(p.b - m, p.fm, f2, p.fb);
        let refined = left + right;
        let err = refined - p.estimate;
        // Accept at 2*tol rather than the textbook 15*tol: the Richardson
        // correction then leaves an order-of-magnitude margin on the total.
        if err.abs() <= 2.0 * p.tol || (p.b - p.a) < min_width {
            total += refined + err / 15.0;
        } else {
            let half = 0.5 * p.tol;
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: f1, fb: p.fm, estimate: left, tol: half });
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: f2, fb: p.fb, estimate: right, tol: half });
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_cdf;

    #[test]
    fn moment0_matches_gaussian_cdf() {
        // eta = 0: bracket is exactly 1, so the integral is Phi(1).
        let got = gaussian_indicator_integral(1.0, 0.0, f64::NEG_INFINITY, 1.0, 0, 1e-10).unwrap();
        assert!((got - normal_cdf(1.0)).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn indicator_limit_matches_half_gaussian() {
        // eta -> 1: 2 (Phi(1) - 1/2).
        let expected = 2.0 * (normal_cdf(1.0) - 0.5);
        let got =
            gaussian_indicator_integral(1.0, 1.0 - 1e-13, f64::NEG_INFINITY, 1.0, 0, 1e-10).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}");
        // Just below the clamp the generic path must agree closely.
        let near =
            gaussian_indicator_integral(1.0, 1.0 - 1e-9, f64::NEG_INFINITY, 1.0, 0, 1e-10).unwrap();
        assert!((near - expected).abs() < 1e-5, "near-clamp {near} vs {expected}");
    }

    #[test]
    fn moment2_matches_gaussian_moments() {
        // eta = 0, q = 1: 2 Phi(1) + phi(1).
        let expected = 2.0 * normal_cdf(1.0) + normal_pdf(1.0);
        let got = gaussian_indicator_integral(1.0, 0.0, f64::NEG_INFINITY, 1.0, 2, 1e-10).unwrap();
        assert!((got - expected).abs() < 1e-11, "got {got} expected {expected}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gaussian_indicator_integral(0.0, 0.0, 0.0, 1.0, 0, 1e-10).is_err());
        assert!(gaussian_indicator_integral(1.0, -0.1, 0.0, 1.0, 0, 1e-10).is_err());
        assert!(gaussian_indicator_integral(1.0, 0.5, 1.0, 0.0, 0, 1e-10).is_err());
        assert!(gaussian_indicator_integral(1.0, 0.5, 0.0, 1.0, 3, 1e-10).is_err());
    }

    #[test]
    fn empty_or_tail_interval_is_zero() {
        let got = gaussian_indicator_integral(1.0, 0.5, -20.0, -15.0, 0, 1e-10).unwrap();
        assert_eq!(got, 0.0);
    }

    // 100 random (q, bounds) cases against the closed-form oracle at eta = 0,
    // where the bracket is identically 1 and Gaussian moment identities apply.
    #[test]
    fn quadrature_oracle_eta_zero() {
        use proptest::prelude::*;
        let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
            cases: 100,
            ..Default::default()
        });
        runner
            .run(
                &(
                    0.01f64..100.0,
                    -6.0f64..6.0,
                    0.1f64..8.0,
                    prop_oneof![Just(0u32), Just(2u32)],
                    proptest::bool::ANY,
                ),
                |(q, a, width, moment, infinite_lower)| {
                    let (lo, hi) =
                        if infinite_lower { (f64::NEG_INFINITY, a) } else { (a, a + width) };
                    let got = gaussian_indicator_integral(q, 0.0, lo, hi, moment, 1e-10).unwrap();
                    let expected = gaussian_poly_moment(lo, hi, moment, sqrt(q));
                    let tol = 1e-10 * expected.abs().max(1e-12);
                    prop_assert!(
                        (got - expected).abs() <= tol,
                        "q={} bounds=({},{}) m={} got={} expected={}",
                        q,
                        lo,
                        hi,
                        moment,
                        got,
                        expected
                    );
                    Ok(())
                },
            )
            .unwrap();
    }

    // The bracket integrates to 1 over the whole line for any eta: the erf
    // part is odd. Checks the steep-transition seeding.
    #[test]
    fn whole_line_normalization_any_eta() {
        for &eta in &[0.0, 0.3, 0.9, 0.999_999, 1.0 - 1e-10] {
            let got = gaussian_indicator_integral(
                2.0,
                eta,
                f64::NEG_INFINITY,
                f64::INFINITY,
                0,
                1e-10,
            )
            .unwrap();
            assert!((got - 1.0).abs() < 1e-9, "eta={eta} got={got}");
        }
    }
}
