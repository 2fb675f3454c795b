//! Standard-normal helpers on top of `libm`.

use libm::{erfc, exp};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

/// Standard normal distribution function, `erfc`-based for tail accuracy.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Small non-negative integer power by repeated multiplication.
#[inline]
pub fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// `int_a^b phi(x) (1 - s x)^moment dx` via Gaussian moment identities.
///
/// Infinite bounds are allowed; `moment` must be 0, 1 or 2.
pub fn gaussian_poly_moment(a: f64, b: f64, moment: u32, s: f64) -> f64 {
    let pa = normal_pdf(a);
    let pb = normal_pdf(b);
    let i0 = normal_cdf(b) - normal_cdf(a);
    let i1 = pa - pb;
    match moment {
        0 => i0,
        1 => i0 - s * i1,
        2 => {
            let apa = if a.is_finite() { a * pa } else { 0.0 };
            let bpb = if b.is_finite() { b * pb } else { 0.0 };
            let i2 = i0 + apa - bpb;
            i0 - 2.0 * s * i1 + s * s * i2
        }
        _ => unreachable!("moment must be 0, 1 or 2"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((normal_cdf(-6.0) - 9.865_876_450_376_946e-10).abs() < 1e-18);
    }

    #[test]
    fn poly_moment_whole_line() {
        // int phi = 1, int (1-sx) phi = 1, int (1-sx)^2 phi = 1 + s^2
        let inf = f64::INFINITY;
        assert!((gaussian_poly_moment(-inf, inf, 0, 0.7) - 1.0).abs() < 1e-14);
        assert!((gaussian_poly_moment(-inf, inf, 1, 0.7) - 1.0).abs() < 1e-14);
        assert!((gaussian_poly_moment(-inf, inf, 2, 0.7) - 1.49).abs() < 1e-14);
    }
}
