//! The problem instance: type space, density, preferences, dealer cost and
//! the outside option, with derived quantities used throughout the solver.

mod density;
mod outside;
mod poly;
mod side;
mod validate;

pub use density::Density;
pub use outside::{OutsideFamily, OutsideOption, PowerSide};
pub use poly::Poly;
pub use side::{Side, SideView};
pub use validate::{validate, Check, Severity, ValidationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, RootConfig};

/// Crossing-network bid/ask price pair `(pi_minus, pi_plus)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PricePair {
    pub minus: f64,
    pub plus: f64,
}

impl PricePair {
    pub fn new(minus: f64, plus: f64) -> Self {
        Self { minus, plus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeSpace {
    pub lo: f64,
    pub hi: f64,
}

impl TypeSpace {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < 0.0 && 0.0 < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("type space must satisfy lo < 0 < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `u(theta, q) = theta * psi1(q) + psi2(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceSpec {
    pub psi1: Poly,
    pub psi2: Poly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub c: Poly,
}

/// Pointwise matching contract for an active outside option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matching {
    pub q: f64,
    pub tau: f64,
    /// Dealer profit `tau - C(q)` from offering the matching contract.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub theta: TypeSpace,
    pub density: Density,
    pub prefs: PreferenceSpec,
    pub cost: CostSpec,
    pub outside: OutsideOption,
    /// Reference crossing-network price used when none is supplied.
    pub prices: PricePair,
    ctilde: Poly,
    qbar: f64,
    qbound: f64,
}

impl ModelSpec {
    pub fn new(
        theta: TypeSpace,
        density: Density,
        prefs: PreferenceSpec,
        cost: CostSpec,
        outside: OutsideOption,
        prices: PricePair,
        quantity_bound: Option<f64>,
    ) -> Result<Self> {
        let (dlo, dhi) = density.support();
        if (dlo - theta.lo).abs() > 1e-12 || (dhi - theta.hi).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "density support [{dlo}, {dhi}] differs from the type space [{}, {}]",
                theta.lo, theta.hi
            )));
        }
        let ctilde = cost.c.sub(&prefs.psi2);
        let mut spec = Self { theta, density, prefs, cost, outside, prices, ctilde, qbar: 1.0, qbound: 10.0 };
        spec.qbar = spec.estimate_qbar()?;
        spec.qbound = match quantity_bound {
            Some(q) if q > 0.0 => q,
            Some(q) => return Err(Error::Parameter(format!("quantity bound must be positive, got {q}"))),
            None => 10.0 * spec.qbar.max(0.1),
        };
        Ok(spec)
    }

    /// Smallest sampled |q| beyond which trading at any type loses money.
    fn estimate_qbar(&self) -> Result<f64> {
        let m = self.theta.lo.abs().max(self.theta.hi.abs());
        let losing = |q: f64| self.ctilde(q) > m * self.psi1(q).abs() && self.ctilde(-q) > m * self.psi1(-q).abs();
        let samples: Vec<f64> = (0..64).map(|k| 1e-3 * 1.5f64.powi(k)).collect();
        if !losing(*samples.last().unwrap()) {
            return Err(Error::Parameter("dealer cost net of psi2 is not coercive relative to psi1".into()));
        }
        let mut qbar = samples[0];
        for &q in samples.iter().rev() {
            if !losing(q) {
                break;
            }
            qbar = q;
        }
        Ok(qbar)
    }

    /// Same model with outside-option prices `pi`.
    pub fn with_prices(&self, pi: PricePair) -> Self {
        Self { prices: pi, ..self.clone() }
    }

    /// Same model with a different outside option.
    pub fn with_outside(&self, outside: OutsideOption) -> Self {
        Self { outside, ..self.clone() }
    }

    /// Bound on |q| used for root brackets.
    pub fn quantity_bound(&self) -> f64 {
        self.qbound
    }

    /// Sampled a-priori bound on optimal quantities.
    pub fn qbar(&self) -> f64 {
        self.qbar
    }

    pub fn pdf(&self, t: f64) -> f64 {
        self.density.pdf(t)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.density.cdf(t)
    }

    pub fn psi1(&self, q: f64) -> f64 {
        self.prefs.psi1.eval(q)
    }

    pub fn dpsi1(&self, q: f64) -> f64 {
        self.prefs.psi1.d1(q)
    }

    pub fn psi2(&self, q: f64) -> f64 {
        self.prefs.psi2.eval(q)
    }

    pub fn cost(&self, q: f64) -> f64 {
        self.cost.c.eval(q)
    }

    /// Marginal type sensitivity at zero.
    pub fn phi1(&self) -> f64 {
        self.prefs.psi1.d1(0.0)
    }

    pub fn phi2(&self) -> f64 {
        self.prefs.psi2.d1(0.0)
    }

    pub fn utility(&self, theta: f64, q: f64) -> f64 {
        theta * self.psi1(q) + self.psi2(q)
    }

    /// Cost net of the type-independent utility term, `C - psi2`.
    pub fn ctilde(&self, q: f64) -> f64 {
        self.ctilde.eval(q)
    }

    pub fn dctilde(&self, q: f64) -> f64 {
        self.ctilde.d1(q)
    }

    pub fn d2ctilde(&self, q: f64) -> f64 {
        self.ctilde.d2(q)
    }

    /// Marginal net cost per unit of utility slope, `ctilde'(q) / psi1'(q)`.
    pub fn k(&self, q: f64) -> f64 {
        self.dctilde(q) / self.dpsi1(q)
    }

    pub fn dk(&self, q: f64) -> f64 {
        let p1 = self.prefs.psi1.d1(q);
        (self.d2ctilde(q) * p1 - self.dctilde(q) * self.prefs.psi1.d2(q)) / (p1 * p1)
    }

    fn k_is_affine(&self) -> bool {
        self.prefs.psi1.degree() <= 1 && self.ctilde.degree() <= 2 && self.ctilde.coeff(2) > 0.0
    }

    pub fn k_inv(&self, y: f64) -> Result<f64> {
        let bound = self.qbound;
        if self.k_is_affine() {
            let q = (self.prefs.psi1.coeff(1) * y - self.ctilde.coeff(1)) / (2.0 * self.ctilde.coeff(2));
            if q.abs() > bound {
                return Err(Error::QuantityRange { target: y, bound });
            }
            return Ok(q);
        }
        find_root(|q| self.k(q) - y, -bound, bound, &RootConfig::with_tol(1e-14))
            .map_err(|_| Error::QuantityRange { target: y, bound })
    }

    pub fn psi1_inv(&self, s: f64) -> Result<f64> {
        let bound = self.qbound;
        if s.is_infinite() {
            return Err(Error::QuantityRange { target: s, bound });
        }
        if self.prefs.psi1.degree() <= 1 {
            let q = (s - self.prefs.psi1.coeff(0)) / self.prefs.psi1.coeff(1);
            if q.abs() > bound {
                return Err(Error::QuantityRange { target: s, bound });
            }
            return Ok(q);
        }
        find_root(|q| self.psi1(q) - s, -bound, bound, &RootConfig::with_tol(1e-14))
            .map_err(|_| Error::QuantityRange { target: s, bound })
    }

    /// Net cost expressed in the utility slope `s = psi1(q)`.
    pub fn ktilde(&self, s: f64) -> Result<f64> {
        Ok(self.ctilde(self.psi1_inv(s)?))
    }

    /// Virtual quantity: the pointwise maximizer of the multiplier-adjusted
    /// virtual surplus at multiplier level `gamma`.
    pub fn virtual_quantity(&self, theta: f64, gamma: f64) -> Result<f64> {
        let f = self.pdf(theta);
        if !(f > 0.0) {
            return Err(Error::ModelEvaluation { theta });
        }
        self.k_inv((self.cdf(theta) + theta * f - gamma) / f)
    }

    pub fn u0(&self, theta: f64, pi: PricePair) -> f64 {
        self.outside.value(theta, pi)
    }

    pub fn du0(&self, theta: f64, pi: PricePair, left: bool) -> f64 {
        self.outside.derivative(theta, pi, left)
    }

    /// Contract that leaves type `theta` exactly indifferent to its outside option.
    pub fn matching_schedule(&self, pi: PricePair, theta: f64) -> Result<Matching> {
        if self.outside.is_kink(theta, pi) {
            return Err(Error::Kink { theta });
        }
        let u0 = self.u0(theta, pi);
        let q = self.psi1_inv(self.du0(theta, pi, false))?;
        let tau = self.utility(theta, q) - u0;
        Ok(Matching { q, tau, margin: tau - self.cost(q) })
    }

    /// Margin computed with the unfloored outside utility `raw - kappa`.
    pub fn raw_margin(&self, pi: PricePair, theta: f64) -> Result<f64> {
        let u = self.outside.raw(theta, pi) - self.outside.kappa;
        let q = self.psi1_inv(self.outside.raw_derivative(theta, pi, false))?;
        Ok(theta * self.psi1(q) - self.ctilde(q) - u)
    }

    /// Negative-margin intervals of [`raw_margin`](Self::raw_margin) on `[lo, hi]`.
    pub fn raw_margin_negative_intervals(&self, pi: PricePair, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        let g = |t: f64| self.raw_margin(pi, t).unwrap_or(f64::NAN);
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        let mut prev = (lo, g(lo));
        if prev.1 < 0.0 {
            start = Some(lo);
        }
        for i in 1..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let gt = g(t);
            if prev.1.is_finite() && gt.is_finite() && (prev.1 < 0.0) != (gt < 0.0) {
                let r = find_root(g, prev.0, t, &RootConfig::with_tol(1e-13)).unwrap_or(t);
                match start.take() {
                    Some(s) => out.push((s, r)),
                    None => start = Some(r),
                }
            }
            prev = (t, gt);
        }
        if let Some(s) = start {
            out.push((s, hi));
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub use crate::presets::*;
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mussa_rosen_virtual_quantity() {
        let s = mussa_rosen(1.0);
        assert_abs_diff_eq!(s.virtual_quantity(0.25, 0.0).unwrap(), 1.5, epsilon = 1e-14);
        for &t in &[-0.9, -0.2, 0.4] {
            for &g in &[0.0, 0.3, 1.0] {
                assert_abs_diff_eq!(s.virtual_quantity(t, g).unwrap(), 2.0 * t + 1.0 - 2.0 * g, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn tent_virtual_quantity_below_zero() {
        let s = tent(OutsideOption::trivial(), PricePair::default());
        assert_abs_diff_eq!(s.virtual_quantity(-0.5, 0.0).unwrap(), -0.25, epsilon = 1e-14);
        let t: f64 = 0.3;
        let exact = 2.0 * (3.0 * t * t - 6.0 * t + 2.0) / (2.0 * t - 3.0);
        assert_abs_diff_eq!(s.virtual_quantity(t, 1.0).unwrap(), exact, epsilon = 1e-13);
    }

    #[test]
    fn zero_quantity_at_reserved_multiplier() {
        let s = tent(OutsideOption::trivial(), PricePair::default());
        for &t in &[-0.8, -0.1, 0.2, 0.9] {
            let g = s.cdf(t) + t * s.pdf(t);
            assert_abs_diff_eq!(s.virtual_quantity(t, g).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn power_option_matching_margin() {
        let s = tent_power();
        let m = s.matching_schedule(s.prices, 1.0).unwrap();
        assert_abs_diff_eq!(m.q, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(m.margin, 1.0 / 30.0 - 0.01 + 0.001, epsilon = 1e-14);
        assert_abs_diff_eq!(m.margin, 0.0243, epsilon = 1e-4);
        let neg = s.raw_margin_negative_intervals(s.prices, 0.0, 1.0, 2000);
        assert_eq!(neg.len(), 1);
        assert_abs_diff_eq!(neg[0].0, 0.0035, epsilon = 1e-4);
        assert_abs_diff_eq!(neg[0].1, 0.1667, epsilon = 1e-4);
    }

    #[test]
    fn affine_matching_contract_satisfies_indifference() {
        let s = tent_affine();
        let pi = s.prices;
        let m = s.matching_schedule(pi, 0.8).unwrap();
        assert_abs_diff_eq!(m.q, 0.975, epsilon = 1e-14);
        // The transfer includes the psi2 term of the utility.
        assert_abs_diff_eq!(m.tau, 0.52 + 0.25 * 0.975 * 0.975, epsilon = 1e-14);
        assert_abs_diff_eq!(s.utility(0.8, m.q) - m.tau, s.u0(0.8, pi), epsilon = 1e-14);
        let kink = 8.0 / 15.0;
        assert!(matches!(s.matching_schedule(pi, kink), Err(Error::Kink { .. })));
    }

    #[test]
    fn quantity_bound_from_coercivity() {
        let s = mussa_rosen(1.0);
        assert!(s.qbar() >= 2.0 && s.qbar() < 3.5, "qbar {}", s.qbar());
        assert!(matches!(s.k_inv(1e6), Err(Error::QuantityRange { .. })));
    }
}
