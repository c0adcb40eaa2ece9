//! The dealer's problem without outside options.

use serde::{Deserialize, Serialize};

use crate::book::BookSolution;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OutsideOption, PricePair};
use crate::screening::{self, CnConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub grid_n: usize,
    pub quad_tol: f64,
    pub skip_validation: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let c = CnConfig::default();
        Self { grid_n: c.grid_n, quad_tol: c.quad_tol, skip_validation: false }
    }
}

impl From<&CnConfig> for BenchmarkConfig {
    fn from(c: &CnConfig) -> Self {
        Self { grid_n: c.grid_n, quad_tol: c.quad_tol, skip_validation: c.skip_validation }
    }
}

impl BenchmarkConfig {
    pub fn to_cn(&self) -> CnConfig {
        CnConfig {
            grid_n: self.grid_n,
            quad_tol: self.quad_tol,
            skip_validation: self.skip_validation,
            ..CnConfig::default()
        }
    }
}

/// Optimal book when traders have no outside option. The model's outside
/// option is ignored, and the book reports `u0 = 0`.
pub fn solve_benchmark(spec: &ModelSpec, cfg: &BenchmarkConfig) -> Result<BookSolution> {
    let base = spec.with_outside(OutsideOption::trivial()).with_prices(PricePair::default());
    screening::solve_cn(&base, PricePair::default(), &cfg.to_cn())
}

/// Closed forms of the linear-quadratic liquidation model without a dark pool:
/// `psi1 = 2 alpha q`, `psi2 = -alpha q^2`, `C = eps q + beta q^2`, uniform types on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpClosedForm {
    /// `(slope, intercept)` of the bid-side schedule `l(theta, 0)`.
    pub bid_schedule: (f64, f64),
    /// `(slope, intercept)` of the ask-side schedule `l(theta, 1)`.
    pub ask_schedule: (f64, f64),
    pub theta_lo0: f64,
    pub theta_hi0: f64,
    /// Constants of `v` below the reserved set and above it, fixed by `v = 0` at its ends.
    pub c1: f64,
    pub c2: f64,
    /// The same constants from the published expressions, which do not put
    /// `v = 0` at the reserved-set ends; kept for reference.
    pub c1_printed: f64,
    pub c2_printed: f64,
    /// Slope of quantities in type.
    pub q_slope: f64,
    pub spread: (f64, f64),
}

impl DpClosedForm {
    /// Indirect utility from the closed forms.
    pub fn v(&self, alpha: f64, beta: f64, eps: f64, theta: f64) -> f64 {
        let a = 2.0 * alpha * alpha / (alpha + beta);
        if theta <= self.theta_lo0 {
            a * theta * theta + alpha / (alpha + beta) * (2.0 * alpha - eps) * theta + self.c1
        } else if theta >= self.theta_hi0 {
            a * theta * theta - alpha / (alpha + beta) * (2.0 * alpha + eps) * theta + self.c2
        } else {
            0.0
        }
    }
}

pub fn closed_form_check_dp(alpha: f64, beta: f64, eps: f64) -> Result<DpClosedForm> {
    if !(alpha > 0.0 && beta > 0.0 && eps >= 0.0) {
        return Err(Error::Parameter(format!("need alpha > 0, beta > 0, eps >= 0; got ({alpha}, {beta}, {eps})")));
    }
    if eps >= 2.0 * alpha {
        return Err(Error::Parameter(format!("eps = {eps} must be below 2 alpha = {}", 2.0 * alpha)));
    }
    let s = alpha + beta;
    let slope = 2.0 * alpha / s;
    let e = eps / (2.0 * alpha);
    let theta_lo0 = 0.5 * (e - 1.0);
    let theta_hi0 = 0.5 * (e + 1.0);
    let a = 2.0 * alpha * alpha / s;
    let b1 = alpha / s * (2.0 * alpha - eps);
    let b2 = -alpha / s * (2.0 * alpha + eps);
    let c1 = -(a * theta_lo0 * theta_lo0 + b1 * theta_lo0);
    let c2 = -(a * theta_hi0 * theta_hi0 + b2 * theta_hi0);
    let c1_printed = a / 4.0 * (e + 1.0).powi(2) + alpha * (2.0 * alpha + eps) / (2.0 * s) * (e + 1.0);
    let c2_printed = a / 4.0 * (e - 1.0).powi(2) - alpha * (2.0 * alpha + eps) / (2.0 * s) * (e - 1.0);
    let k = 4.0 * alpha * alpha / s;
    Ok(DpClosedForm {
        bid_schedule: (slope, alpha / s - eps / (2.0 * s)),
        ask_schedule: (slope, -alpha / s - eps / (2.0 * s)),
        theta_lo0,
        theta_hi0,
        c1,
        c2,
        c1_printed,
        c2_printed,
        q_slope: slope,
        spread: (k * theta_lo0, k * theta_hi0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::{check_invariants, RegionLabel};
    use crate::presets::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mussa_rosen_multiplier_on_reserved_set() {
        let s = mussa_rosen(1.0);
        let sol = solve_benchmark(&s, &BenchmarkConfig::default()).unwrap();
        for i in 0..sol.grid.len() {
            let t = sol.grid[i];
            let want = if t < -0.5 {
                0.0
            } else if t > 0.5 {
                1.0
            } else {
                0.5 + t
            };
            assert_abs_diff_eq!(sol.gamma[i], want, epsilon = 1e-12);
        }
        let labels: Vec<RegionLabel> = sol.partition.intervals.iter().map(|i| i.label).collect();
        assert_eq!(labels, vec![RegionLabel::FullService, RegionLabel::Reserved, RegionLabel::FullService]);
    }

    #[test]
    fn tent_benchmark_spread() {
        let sol = solve_benchmark(&tent_benchmark(), &BenchmarkConfig::default()).unwrap();
        let b = 1.0 - 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(sol.spread.theta_hi0, b, epsilon = 1e-12);
        // q' = 2 (2 + (1 - F) f' / f^2) at the boundary, times the boundary itself.
        let (f, df, tail) = ((3.0 - 2.0 * b) / 4.0, -0.5, 0.5 - (3.0 * b - b * b) / 4.0);
        let t = 2.0 * (2.0 + tail * df / (f * f)) * b;
        assert_abs_diff_eq!(sol.spread.t_plus, t, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.spread.t_plus, 1.359, epsilon = 5e-4);
        assert_abs_diff_eq!(sol.spread.t_minus, -sol.spread.t_plus, epsilon = 1e-12);
        assert!(check_invariants(&tent_benchmark(), &sol).is_ok());
    }

    #[test]
    fn closed_forms() {
        let c = closed_form_check_dp(1.0, 1.0, 0.0).unwrap();
        assert_eq!((c.theta_lo0, c.theta_hi0), (-0.5, 0.5));
        assert_eq!(c.spread, (-1.0, 1.0));
        let c = closed_form_check_dp(1.0, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(c.theta_lo0, -0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(c.theta_hi0, 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(c.v(1.0, 0.5, 0.5, c.theta_lo0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.v(1.0, 0.5, 0.5, c.theta_hi0), 0.0, epsilon = 1e-15);
        assert!(closed_form_check_dp(1.0, 1.0, 2.0).is_err());
        let c = closed_form_check_dp(1.0, 1.0, 0.0).unwrap();
        assert!((c.c1_printed - c.c1).abs() > 0.1);
    }
}
