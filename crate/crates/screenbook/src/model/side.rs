//! Reflection of one half of the type space onto `x >= 0`.
//!
//! The negative side is mapped through `theta = -x`, `q = -q_hat`, which turns
//! the bid side into an ask-side problem with
//! `psi1_hat(q) = -psi1(-q)`, `psi2_hat(q) = psi2(-q)`, `C_hat(q) = C(-q)`,
//! `f_hat(x) = f(-x)`, `F_hat(x) = 1 - F(-x)` and multiplier `1 - gamma(-x)`.

use serde::Serialize;

use super::{ModelSpec, PricePair};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Negative => -1.0,
            Side::Positive => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SideView<'a> {
    pub spec: &'a ModelSpec,
    pub pi: PricePair,
    pub side: Side,
    s: f64,
    end: f64,
    kinks: Vec<f64>,
}

impl<'a> SideView<'a> {
    pub fn new(spec: &'a ModelSpec, pi: PricePair, side: Side) -> Self {
        let s = side.sign();
        let end = if s > 0.0 { spec.theta.hi } else { -spec.theta.lo };
        let mut kinks: Vec<f64> = spec
            .outside
            .breakpoints(pi, spec.theta.lo, spec.theta.hi)
            .into_iter()
            .chain(spec.density.kinks())
            .map(|t| s * t)
            .filter(|&x| x > 0.0 && x < end)
            .collect();
        kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        kinks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        Self { spec, pi, side, s, end, kinks }
    }

    pub fn sign(&self) -> f64 {
        self.s
    }

    /// Side extent `x` in `[0, end]`.
    pub fn end(&self) -> f64 {
        self.end
    }

    /// Kinks of `u0` and of the density in `(0, end)`, side coordinates.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn theta(&self, x: f64) -> f64 {
        self.s * x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.spec.pdf(self.s * x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.s > 0.0 {
            self.spec.cdf(x)
        } else {
            1.0 - self.spec.cdf(-x)
        }
    }

    /// Right derivative of the density in `x`.
    pub fn dpdf(&self, x: f64) -> f64 {
        self.s * self.spec.density.dpdf(self.s * x, self.s < 0.0)
    }

    pub fn psi1(&self, q: f64) -> f64 {
        self.s * self.spec.psi1(self.s * q)
    }

    pub fn psi1_inv(&self, v: f64) -> Result<f64> {
        Ok(self.s * self.spec.psi1_inv(self.s * v)?)
    }

    pub fn ctilde(&self, q: f64) -> f64 {
        self.spec.ctilde(self.s * q)
    }

    pub fn k(&self, q: f64) -> f64 {
        self.s * self.spec.k(self.s * q)
    }

    pub fn dk(&self, q: f64) -> f64 {
        self.spec.dk(self.s * q)
    }

    pub fn k_inv(&self, y: f64) -> Result<f64> {
        Ok(self.s * self.spec.k_inv(self.s * y)?)
    }

    /// Multiplier level at which the virtual quantity vanishes at `x`.
    pub fn gamma_reserved(&self, x: f64) -> f64 {
        let f = self.pdf(x);
        self.cdf(x) + x * f - f * self.k(0.0)
    }

    pub fn virtual_quantity(&self, x: f64, gamma: f64) -> Result<f64> {
        let f = self.pdf(x);
        self.k_inv((self.cdf(x) + x * f - gamma) / f)
    }

    /// `d l / d x` at `(x, gamma)` given `q = l(x, gamma)`.
    pub fn dvirtual_quantity(&self, x: f64, gamma: f64, q: f64) -> f64 {
        let f = self.pdf(x);
        let hx = 2.0 - (self.cdf(x) - gamma) * self.dpdf(x) / (f * f);
        hx / self.dk(q)
    }

    /// Multiplier recovered from `l(x, gamma) = q`.
    pub fn gamma_for_quantity(&self, x: f64, q: f64) -> f64 {
        let f = self.pdf(x);
        self.cdf(x) + x * f - f * self.k(q)
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.spec.u0(self.s * x, self.pi)
    }

    /// Right derivative of `u0` in `x`.
    pub fn du0(&self, x: f64) -> f64 {
        self.s * self.spec.du0(self.s * x, self.pi, self.s < 0.0)
    }

    /// Left derivative of `u0` in `x`.
    pub fn du0_left(&self, x: f64) -> f64 {
        self.s * self.spec.du0(self.s * x, self.pi, self.s > 0.0)
    }

    pub fn matching_quantity(&self, x: f64) -> Result<f64> {
        self.psi1_inv(self.du0(x))
    }

    /// Dealer surplus from type `x` at quantity `q` and utility `v`.
    pub fn surplus(&self, x: f64, q: f64, v: f64) -> f64 {
        x * self.psi1(q) - self.ctilde(q) - v
    }

    /// Dealer margin from matching the outside option at `x`; `-inf` where it
    /// is unbounded.
    pub fn margin(&self, x: f64) -> f64 {
        let u0 = self.u0(x);
        if u0.is_infinite() {
            return f64::NEG_INFINITY;
        }
        match self.matching_quantity(x) {
            Ok(q) => self.surplus(x, q, u0),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reflection_is_consistent() {
        let s = tent_power();
        let neg = SideView::new(&s, s.prices, Side::Negative);
        for &x in &[0.1, 0.4, 0.9] {
            let theta = -x;
            assert_abs_diff_eq!(neg.cdf(x), 1.0 - s.cdf(theta), epsilon = 1e-15);
            for &g in &[0.0, 0.2, 0.7] {
                let l_orig = s.virtual_quantity(theta, g).unwrap();
                let l_side = neg.virtual_quantity(x, 1.0 - g).unwrap();
                assert_abs_diff_eq!(l_side, -l_orig, epsilon = 1e-13);
            }
            assert_abs_diff_eq!(1.0 - neg.gamma_reserved(x), s.cdf(theta) + theta * s.pdf(theta), epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_of_virtual_quantity() {
        let s = tent_power();
        for side in [Side::Negative, Side::Positive] {
            let v = SideView::new(&s, s.prices, side);
            for &x in &[0.2, 0.6] {
                let g = 0.55;
                let q = v.virtual_quantity(x, g).unwrap();
                let h = 1e-6;
                let fd = (v.virtual_quantity(x + h, g).unwrap() - v.virtual_quantity(x - h, g).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(v.dvirtual_quantity(x, g, q), fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn side_kinks_and_margin() {
        let s = tent_power();
        let pos = SideView::new(&s, s.prices, Side::Positive);
        assert_eq!(pos.kinks().len(), 1);
        assert_abs_diff_eq!(pos.margin(1.0), 1.0 / 30.0 - 0.01 + 0.001, epsilon = 1e-14);
        let neg = SideView::new(&s, s.prices, Side::Negative);
        assert!(neg.kinks().is_empty());
    }
}
