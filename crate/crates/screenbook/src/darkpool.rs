//! Portfolio liquidation next to a dark pool: closed forms and the general
//! pipeline side by side.

use serde::{Deserialize, Serialize};

use crate::benchmark::{closed_form_check_dp, solve_benchmark, BenchmarkConfig};
use crate::book::BookSolution;
use crate::equilibrium::{iterate_equilibrium, EquilibriumConfig, EquilibriumMode, EquilibriumResult};
use crate::error::{Error, Result};
use crate::model::{
    CostSpec, Density, ModelSpec, OutsideFamily, OutsideOption, Poly, PreferenceSpec, PricePair, Side, TypeSpace,
};
use crate::screening::{solve_cn, CnConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkPoolParams {
    /// Inventory sensitivity.
    pub alpha: f64,
    /// Dealer quadratic cost.
    pub beta: f64,
    /// Dealer linear cost.
    pub eps: f64,
    /// Execution probability.
    pub p: f64,
    /// Access cost.
    pub kappa: f64,
}

impl DarkPoolParams {
    pub fn check(&self) -> Result<()> {
        let Self { alpha, beta, eps, p, kappa } = *self;
        if !(alpha > 0.0 && beta > 0.0 && kappa > 0.0) {
            return Err(Error::Parameter(format!(
                "alpha, beta and kappa must be positive; got ({alpha}, {beta}, {kappa})"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("execution probability {p} is outside [0, 1]")));
        }
        if !(eps >= 0.0 && eps < 2.0 * alpha) {
            return Err(Error::Parameter(format!("eps = {eps} must lie in [0, 2 alpha) = [0, {})", 2.0 * alpha)));
        }
        Ok(())
    }

    /// Prices above this make the pool attractive to the zero type.
    pub fn price_bound(&self) -> f64 {
        if self.p > 0.0 {
            2.0 * (self.alpha * self.kappa / self.p).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn check_price(&self, pi: f64) -> Result<()> {
        if self.p * pi * pi >= 4.0 * self.alpha * self.kappa {
            return Err(Error::Parameter(format!(
                "price {pi} violates the hard bound |pi| < 2 sqrt(alpha kappa / p) = {}",
                self.price_bound()
            )));
        }
        Ok(())
    }

    /// Slope of quantities in type on serviced intervals.
    pub fn quantity_slope(&self) -> f64 {
        2.0 * self.alpha / (self.alpha + self.beta)
    }

    /// Dealer profit per trader from replicating the pool's payoff at type `theta`.
    pub fn matching_profit(&self, pi: f64, theta: f64) -> f64 {
        let z = theta - pi / (2.0 * self.alpha);
        let curv = self.p * (self.alpha - (self.alpha + self.beta) * self.p);
        curv * z * z + self.p * (pi - self.eps) * z + self.kappa
    }

    /// Whether the dealer can profitably match the pool wherever the pool
    /// beats abstaining, so no type is left to the pool and the closed forms
    /// describe the book.
    pub fn matching_always_profitable(&self, pi: f64) -> bool {
        if self.p == 0.0 {
            return true;
        }
        let shift = pi / (2.0 * self.alpha);
        let r = (self.kappa / (self.alpha * self.p)).sqrt();
        let (zlo, zhi) = (-1.0 - shift, 1.0 - shift);
        let curv = self.p * (self.alpha - (self.alpha + self.beta) * self.p);
        let lin = self.p * (pi - self.eps);
        // Pieces of the type range where the pool payoff is positive.
        let pieces = [(zlo, zhi.min(-r)), (zlo.max(r), zhi)];
        let mut candidates = Vec::new();
        for (a, b) in pieces {
            if a < b {
                candidates.extend([a, b]);
                if curv > 0.0 {
                    let vertex = -lin / (2.0 * curv);
                    if vertex > a && vertex < b {
                        candidates.push(vertex);
                    }
                }
            }
        }
        candidates.iter().all(|&z| self.matching_profit(pi, z + shift) >= 0.0)
    }

    /// The liquidation model with the pool's outside option priced at `pi`.
    pub fn spec(&self, pi: f64) -> Result<ModelSpec> {
        self.check()?;
        let a = self.alpha;
        ModelSpec::new(
            TypeSpace::new(-1.0, 1.0)?,
            Density::uniform(-1.0, 1.0)?,
            PreferenceSpec { psi1: Poly::new(vec![0.0, 2.0 * a]), psi2: Poly::new(vec![0.0, 0.0, -a]) },
            CostSpec { c: Poly::new(vec![0.0, self.eps, self.beta]) },
            OutsideOption::new(OutsideFamily::DarkPoolQuadratic { alpha: a, p: self.p }, self.kappa)?,
            PricePair::new(pi, pi),
            None,
        )
    }
}

/// Pool submission and expected utility (before the floor at zero).
pub fn dp_outside_option(params: &DarkPoolParams, pi: f64, theta: f64) -> Result<(f64, f64)> {
    params.check()?;
    params.check_price(pi)?;
    let qd = theta - pi / (2.0 * params.alpha);
    Ok((qd, params.alpha * params.p * qd * qd - params.kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpBoundaries {
    /// Where `l(theta, gamma)` vanishes.
    pub theta0: f64,
    /// Where interior quantities meet the matching quantity.
    pub smooth_paste_theta: f64,
}

/// Boundary candidates for multiplier level `gamma` (in type coordinates).
pub fn dp_boundaries(params: &DarkPoolParams, pi: f64, gamma: f64) -> Result<DpBoundaries> {
    params.check()?;
    let DarkPoolParams { alpha, beta, eps, p, .. } = *params;
    let s = alpha + beta;
    let theta0 = 0.5 * (eps / (2.0 * alpha) + 2.0 * gamma - 1.0);
    let denom = 2.0 * alpha / s - p;
    if denom.abs() < 1e-12 {
        return Err(Error::Degeneracy(format!("quantity slope equals the matching slope ({p})")));
    }
    let smooth_paste_theta = (eps / (2.0 * s) - alpha / s * (1.0 - 2.0 * gamma) - p * pi / (2.0 * alpha)) / denom;
    Ok(DpBoundaries { theta0, smooth_paste_theta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpCrossCheck {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    /// Reserved-set ends from the closed forms at the solver's multipliers.
    pub theta_lo0: f64,
    pub theta_hi0: f64,
    /// Tangency candidates from the closed forms at the solver's multipliers.
    pub paste_minus: f64,
    pub paste_plus: f64,
    pub q_slope: f64,
    /// Quantity slopes just outside the reserved set, from the solved grid.
    pub q_slope_lo: f64,
    pub q_slope_hi: f64,
    pub spread: (f64, f64),
    pub benchmark_spread: (f64, f64),
    pub binds_minus: bool,
    pub binds_plus: bool,
    /// The solved spread lies inside the benchmark spread, strictly on every binding side.
    pub contained: bool,
}

/// Slope of `q` on the first grid cell outside the reserved set.
fn boundary_slope(sol: &BookSolution, side: Side) -> f64 {
    let g = &sol.grid;
    match side {
        Side::Positive => {
            let i = g.iter().position(|&t| t >= sol.spread.theta_hi0).unwrap_or(g.len() - 2).min(g.len() - 2);
            (sol.q[i + 1] - sol.q[i]) / (g[i + 1] - g[i])
        }
        Side::Negative => {
            let i = g.iter().rposition(|&t| t <= sol.spread.theta_lo0).unwrap_or(1).max(1);
            (sol.q[i] - sol.q[i - 1]) / (g[i] - g[i - 1])
        }
    }
}

/// Solves the book next to a pool priced at `pi` and cross-checks it against the closed forms.
pub fn dp_solve(params: &DarkPoolParams, pi: f64, cfg: &CnConfig) -> Result<(BookSolution, DpCrossCheck)> {
    params.check_price(pi)?;
    let spec = params.spec(pi)?;
    let sol = solve_cn(&spec, spec.prices, cfg)?;
    let bench = solve_benchmark(&spec, &BenchmarkConfig::from(cfg))?;
    let closed = closed_form_check_dp(params.alpha, params.beta, params.eps)?;
    let gm = sol.side(Side::Negative).gamma;
    let gp = sol.side(Side::Positive).gamma;
    let bm = dp_boundaries(params, pi, gm)?;
    let bp = dp_boundaries(params, pi, gp)?;
    let binds = |side| {
        let st = sol.side(side);
        !st.binding_intervals.is_empty()
    };
    let (binds_minus, binds_plus) = (binds(Side::Negative), binds(Side::Positive));
    let sp = (sol.spread.t_minus, sol.spread.t_plus);
    let bs = (bench.spread.t_minus, bench.spread.t_plus);
    let tol = 1e-10;
    let lo_ok = if binds_minus { sp.0 > bs.0 + tol } else { sp.0 >= bs.0 - tol };
    let hi_ok = if binds_plus { sp.1 < bs.1 - tol } else { sp.1 <= bs.1 + tol };
    let k = 4.0 * params.alpha * params.alpha / (params.alpha + params.beta);
    let check = DpCrossCheck {
        gamma_minus: gm,
        gamma_plus: gp,
        theta_lo0: bm.theta0,
        theta_hi0: bp.theta0,
        paste_minus: bm.smooth_paste_theta,
        paste_plus: bp.smooth_paste_theta,
        q_slope: closed.q_slope,
        q_slope_lo: boundary_slope(&sol, Side::Negative),
        q_slope_hi: boundary_slope(&sol, Side::Positive),
        spread: (k * bm.theta0, k * bp.theta0),
        benchmark_spread: bs,
        binds_minus,
        binds_plus,
        contained: lo_ok && hi_ok,
    };
    Ok((sol, check))
}

/// Mid-quote price iteration for the pool.
pub fn dp_equilibrium(params: &DarkPoolParams, pi0: f64, cfg: &EquilibriumConfig) -> Result<EquilibriumResult> {
    params.check_price(pi0)?;
    let spec = params.spec(pi0)?;
    let cfg = EquilibriumConfig { mode: EquilibriumMode::MidQuote, pi0: PricePair::new(pi0, pi0), ..cfg.clone() };
    let res = iterate_equilibrium(&spec, &cfg)?;
    if let Some(star) = res.pi_star {
        // Re-verify the limit with one more solve.
        params.check_price(star.plus)?;
        let sol = solve_cn(&spec, star, &cfg.cn)?;
        let m = 0.5 * (sol.spread.t_plus - sol.spread.t_minus);
        if (m - star.plus).abs() > 10.0 * cfg.sup_norm_tol.max(1e-9) {
            return Err(Error::Solver(format!("mid-quote limit {} maps to {m}; not a fixed point", star.plus)));
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::check_invariants;
    use approx::assert_abs_diff_eq;

    fn params(p: f64, kappa: f64, eps: f64) -> DarkPoolParams {
        DarkPoolParams { alpha: 1.0, beta: 1.0, eps, p, kappa }
    }

    #[test]
    fn outside_option_values() {
        let pr = DarkPoolParams { alpha: 1.0, beta: 1.0, eps: 0.0, p: 0.5, kappa: 0.1 };
        assert_eq!(dp_outside_option(&pr, 0.0, 1.0).unwrap(), (1.0, 0.4));
        let (q, u) = dp_outside_option(&pr, 0.2, 0.1).unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(u, -0.1);
        assert!(dp_outside_option(&pr, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_formulas() {
        let pr = params(0.5, 0.02, 0.0);
        let b = dp_boundaries(&pr, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(b.smooth_paste_theta, -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(dp_boundaries(&pr, 0.0, 0.5).unwrap().theta0, 0.0, epsilon = 1e-15);
        let pe = params(0.5, 0.02, 0.4);
        assert_abs_diff_eq!(dp_boundaries(&pe, 0.0, 0.0).unwrap().theta0, 0.5 * (0.2 - 1.0), epsilon = 1e-15);
        assert!(matches!(dp_boundaries(&params(1.0, 0.02, 0.0), 0.0, 0.3), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn pipeline_matches_closed_forms() {
        let pr = params(0.3, 0.02, 0.0);
        let (sol, ck) = dp_solve(&pr, 0.0, &CnConfig::default()).unwrap();
        assert!(ck.binds_minus && ck.binds_plus);
        assert!(ck.contained);
        assert_abs_diff_eq!(sol.spread.theta_lo0, ck.theta_lo0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.spread.theta_hi0, ck.theta_hi0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.spread.t_minus, ck.spread.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.spread.t_plus, ck.spread.1, epsilon = 1e-9);
        assert_abs_diff_eq!(ck.q_slope_lo, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(ck.q_slope_hi, 1.0, epsilon = 1e-6);
        let st = sol.side(Side::Positive);
        assert!(st.tangent);
        assert_abs_diff_eq!(st.touch_points[0], ck.paste_plus, epsilon = 1e-6);
        let spec = pr.spec(0.0).unwrap();
        let rep = check_invariants(&spec, &sol);
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn matching_profit_regime() {
        let pr = params(0.3, 0.02, 0.0);
        assert_abs_diff_eq!(pr.matching_profit(0.0, 1.0), 0.3 * (1.0 - 0.6) + 0.02, epsilon = 1e-15);
        assert!(pr.matching_always_profitable(0.0));
        // Costly dealer: matching large trades loses money.
        let costly = DarkPoolParams { alpha: 1.0, beta: 2.0, eps: 0.0, p: 0.4, kappa: 0.05 };
        assert!(!costly.matching_always_profitable(0.1));
        assert!(matches!(dp_solve(&costly, 0.1, &CnConfig::default()), Err(Error::Structure(_))));
    }

    #[test]
    fn mid_quote_iteration_stays_in_benchmark_spread() {
        let pr = DarkPoolParams { alpha: 1.0, beta: 1.0, eps: 0.2, p: 0.3, kappa: 0.05 };
        let res = dp_equilibrium(&pr, 0.0, &EquilibriumConfig::default()).unwrap();
        let cf = closed_form_check_dp(1.0, 1.0, 0.2).unwrap();
        for r in &res.iterates {
            assert!(r.pi.plus >= cf.spread.0 && r.pi.plus <= cf.spread.1);
        }
        assert!(res.pi_star.is_some() || !res.cycle.is_empty());
    }
}
