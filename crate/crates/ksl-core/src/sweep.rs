//! Learning curves: one solver call per sample count, with warm starts along
//! the grid and per-`n` regularization rules.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{log, pow};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::ExplicitSpectrum;
use crate::state_evolution::{
    misclassification_error, solve_hinge_regularized_from, solve_max_margin_from, solve_ridge,
    OrderParameters, SolverConfig,
};

/// Classification method whose theory curve is being traced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    MaxMargin,
    Hinge,
    Ridge,
}

impl Method {
    pub fn theory_label(&self) -> &'static str {
        match self {
            Method::MaxMargin => "theory-svm",
            Method::Hinge => "theory-hinge",
            Method::Ridge => "theory-ridge",
        }
    }

    pub fn sim_label(&self) -> &'static str {
        match self {
            Method::MaxMargin | Method::Hinge => "sim-svm",
            Method::Ridge => "sim-ridge",
        }
    }
}

/// How the regularization is chosen at each sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LambdaRule {
    /// Same `lambda` at every `n`.
    Fixed(f64),
    /// `lambda = n^-ell`.
    Decay(f64),
    /// Per-`n` minimization of the error over a log-`lambda` grid (ridge).
    Optimal,
}

impl LambdaRule {
    pub fn lambda_at(&self, n: u64) -> Option<f64> {
        match self {
            LambdaRule::Fixed(l) => Some(*l),
            LambdaRule::Decay(ell) => Some(pow(n as f64, -ell)),
            LambdaRule::Optimal => None,
        }
    }
}

/// One point of a learning curve; `lambda` records the regularization used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub value: f64,
    pub lambda: f64,
}

/// A sample count at which the solver failed; the curve is returned with the
/// gap flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFailure {
    pub n: u64,
    pub reason: String,
}

/// Ordered `(n, value)` pairs from theory or simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub label: String,
    pub alpha: f64,
    pub r: f64,
    pub sigma: f64,
    pub points: Vec<CurvePoint>,
    pub failures: Vec<CurveFailure>,
}

impl LearningCurve {
    /// Log-log slope oracle input: `(ln n, ln value)` pairs.
    pub fn log_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (log(p.n as f64), log(p.value))).collect()
    }
}

/// Trace the theoretical misclassification error over `n_grid`.
///
/// `alpha`/`r` are metadata only (pass NaN for measured spectra). Per-point
/// solver failures are recorded instead of aborting the sweep. Points warm
/// start from the previous converged fixed point.
pub fn theory_sweep(
    method: Method,
    spectrum: &ExplicitSpectrum,
    n_grid: &[u64],
    rule: LambdaRule,
    sigma: f64,
    alpha: f64,
    r: f64,
    config: &SolverConfig,
) -> Result<LearningCurve> {
    if n_grid.is_empty() {
        return Err(Error::Domain(String::from("sample grid must be nonempty")));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(String::from("sample grid must be strictly increasing")));
    }
    if sigma < 0.0 {
        return Err(Error::Domain(String::from("sigma must be non-negative")));
    }
    if sigma > 0.0 && method != Method::Ridge {
        return Err(Error::Domain(String::from(
            "noisy labels are only characterized for ridge; use the simulator for noisy SVM",
        )));
    }
    if matches!(rule, LambdaRule::Optimal) && method != Method::Ridge {
        return Err(Error::Domain(String::from(
            "per-n optimal regularization is defined for the ridge sweep",
        )));
    }

    let mut curve = LearningCurve {
        label: String::from(method.theory_label()),
        alpha,
        r,
        sigma,
        points: Vec::with_capacity(n_grid.len()),
        failures: Vec::new(),
    };

    let mut warm: Option<OrderParameters> = None;
    for &n in n_grid {
        let solved = match (method, rule) {
            (Method::MaxMargin, _) => solve_max_margin_from(spectrum, n, config, warm.as_ref())
                .map(|s| (s.params, 0.0)),
            (Method::Hinge, rule) => {
                let lambda = rule.lambda_at(n).expect("optimal rejected above");
                solve_hinge_regularized_from(spectrum, n, lambda, config, warm.as_ref())
                    .map(|s| (s.params, lambda))
            }
            (Method::Ridge, LambdaRule::Optimal) => {
                optimal_ridge_point(spectrum, n, sigma, config)
            }
            (Method::Ridge, rule) => {
                let lambda = rule.lambda_at(n).expect("optimal handled above");
                solve_ridge(spectrum, n, lambda, sigma, config).map(|s| (s.params, lambda))
            }
        };
        match solved {
            Ok((params, lambda)) => {
                let value = misclassification_error(&params, sigma);
                curve.points.push(CurvePoint { n, value, lambda });
                warm = Some(params);
            }
            Err(e) => curve.failures.push(CurveFailure { n, reason: format!("{e}") }),
        }
    }
    Ok(curve)
}

/// Minimize the ridge error over a log-lambda grid, then refine by
/// golden-section search around the best grid point.
fn optimal_ridge_point(
    spectrum: &ExplicitSpectrum,
    n: u64,
    sigma: f64,
    config: &SolverConfig,
) -> Result<(OrderParameters, f64)> {
    let eval = |log_lambda: f64| -> Option<(OrderParameters, f64)> {
        let lambda = pow(10.0, log_lambda);
        solve_ridge(spectrum, n, lambda, sigma, config)
            .ok()
            .map(|s| (s.params, misclassification_error(&s.params, sigma)))
    };

    let (mut best_ll, mut best) = (f64::NAN, None::<(OrderParameters, f64)>);
    let step = 0.25;
    let mut ll = -10.0;
    while ll <= 3.0 + 1e-9 {
        if let Some((p, e)) = eval(ll) {
            if best.as_ref().map_or(true, |(_, be)| e < *be) {
                best = Some((p, e));
                best_ll = ll;
            }
        }
        ll += step;
    }
    let (mut params, mut err) =
        best.ok_or_else(|| Error::Domain(String::from("no feasible lambda on the grid")))?;

    // Golden-section refinement on log10(lambda).
    let golden = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (best_ll - step, best_ll + step);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..40 {
        let (e1, e2) = match (&f1, &f2) {
            (Some((_, e1)), Some((_, e2))) => (*e1, *e2),
            _ => break,
        };
        if e1 <= e2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = eval(x2);
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    for cand in [f1, f2].into_iter().flatten() {
        if cand.1 < err {
            err = cand.1;
            params = cand.0;
        }
    }
    let _ = err;
    Ok((params, params_lambda(spectrum, n, &params)))
}

/// Back out the regularization that produced a ridge fixed point from its
/// effective regularization `z`.
fn params_lambda(spectrum: &ExplicitSpectrum, n: u64, params: &OrderParameters) -> f64 {
    let nf = n as f64;
    if params.z == 0.0 {
        return 0.0;
    }
    ((params.z - (params.z / nf) * spectrum.resolvent_trace(params.z / nf)) / nf).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::PowerLawModel;

    #[test]
    fn single_point_grid() {
        let spec = PowerLawModel::new(2.0, 0.5, 500).unwrap().spectrum();
        let cfg = SolverConfig::default();
        let curve = theory_sweep(
            Method::Ridge,
            &spec,
            &[256],
            LambdaRule::Decay(0.25),
            0.0,
            2.0,
            0.5,
            &cfg,
        )
        .unwrap();
        assert_eq!(curve.points.len(), 1);
        assert!(curve.failures.is_empty());
        let direct = solve_ridge(&spec, 256, pow(256.0, -0.25), 0.0, &cfg).unwrap();
        assert_eq!(curve.points[0].value, misclassification_error(&direct.params, 0.0));
    }

    #[test]
    fn rejects_bad_grids_and_rules() {
        let spec = PowerLawModel::new(2.0, 0.5, 100).unwrap().spectrum();
        let cfg = SolverConfig::default();
        assert!(theory_sweep(
            Method::Ridge,
            &spec,
            &[],
            LambdaRule::Fixed(0.1),
            0.0,
            2.0,
            0.5,
            &cfg
        )
        .is_err());
        assert!(theory_sweep(
            Method::Ridge,
            &spec,
            &[64, 64],
            LambdaRule::Fixed(0.1),
            0.0,
            2.0,
            0.5,
            &cfg
        )
        .is_err());
        // Noisy max-margin theory is not available.
        assert!(theory_sweep(
            Method::MaxMargin,
            &spec,
            &[64, 128],
            LambdaRule::Fixed(0.0),
            1.0,
            2.0,
            0.5,
            &cfg
        )
        .is_err());
        assert!(theory_sweep(
            Method::Hinge,
            &spec,
            &[64, 128],
            LambdaRule::Optimal,
            0.0,
            2.0,
            0.5,
            &cfg
        )
        .is_err());
    }
}
