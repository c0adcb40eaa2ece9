use serde::{Deserialize, Serialize};

use super::PricePair;
use crate::error::{Error, Result};
use crate::numerics::{find_root, MonotoneCubic, RootConfig};

/// One side of a power outside option: `(a - b * price) * |theta|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSide {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    pub exponent: f64,
}

impl PowerSide {
    pub const ZERO: PowerSide = PowerSide { a: 0.0, b: 0.0, exponent: 2.0 };

    fn scale(&self, price: f64) -> f64 {
        self.a - self.b * price
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutsideFamily {
    Trivial,
    PowerPlus {
        negative: PowerSide,
        positive: PowerSide,
    },
    /// Upper envelope of affine functions `slope * theta + intercept`.
    AffinePieces {
        pieces: Vec<(f64, f64)>,
    },
    /// Dark-pool expected utility `alpha p (theta - price / (2 alpha))^2`,
    /// priced off the ask component.
    DarkPoolQuadratic {
        alpha: f64,
        p: f64,
    },
    /// Zero on `[lo, hi]`, unbounded outside.
    HardExclusion {
        lo: f64,
        hi: f64,
    },
    Tabulated {
        curve: MonotoneCubic,
    },
}

/// Outside option `u0 = max(raw - kappa, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutsideOption {
    pub family: OutsideFamily,
    pub kappa: f64,
}

impl OutsideOption {
    pub fn trivial() -> Self {
        Self { family: OutsideFamily::Trivial, kappa: 0.0 }
    }

    pub fn new(family: OutsideFamily, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Parameter(format!("access cost kappa must be finite and >= 0, got {kappa}")));
        }
        match &family {
            OutsideFamily::AffinePieces { pieces } if pieces.is_empty() => {
                return Err(Error::Parameter("affine outside option needs at least one piece".into()))
            }
            OutsideFamily::DarkPoolQuadratic { alpha, p } if !(*alpha > 0.0) || !(0.0..=1.0).contains(p) => {
                return Err(Error::Parameter(format!(
                    "dark pool needs alpha > 0 and p in [0, 1], got alpha={alpha}, p={p}"
                )))
            }
            OutsideFamily::HardExclusion { lo, hi } if !(*lo <= 0.0 && *hi >= 0.0) => {
                return Err(Error::Parameter("hard exclusion band must contain zero".into()))
            }
            _ => {}
        }
        Ok(Self { family, kappa })
    }

    pub fn kind(&self) -> &'static str {
        match self.family {
            OutsideFamily::Trivial => "trivial",
            OutsideFamily::PowerPlus { .. } => "power_plus",
            OutsideFamily::AffinePieces { .. } => "affine_pieces",
            OutsideFamily::DarkPoolQuadratic { .. } => "dark_pool",
            OutsideFamily::HardExclusion { .. } => "hard_exclusion",
            OutsideFamily::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.family, OutsideFamily::Trivial)
    }

    /// Whether `u0` is pointwise nonincreasing in each price component.
    pub fn monotone_in_price(&self) -> bool {
        match &self.family {
            OutsideFamily::PowerPlus { negative, positive } => negative.b >= 0.0 && positive.b >= 0.0,
            OutsideFamily::DarkPoolQuadratic { .. } => false,
            _ => true,
        }
    }

    /// `(depends on the bid component, depends on the ask component)`.
    pub fn price_dependence(&self) -> (bool, bool) {
        match &self.family {
            OutsideFamily::PowerPlus { negative, positive } => (negative.b != 0.0, positive.b != 0.0),
            OutsideFamily::DarkPoolQuadratic { .. } => (false, true),
            _ => (false, false),
        }
    }

    /// The outside utility before the access cost and the floor at zero.
    pub fn raw(&self, theta: f64, pi: PricePair) -> f64 {
        match &self.family {
            OutsideFamily::Trivial => 0.0,
            OutsideFamily::PowerPlus { negative, positive } => {
                if theta >= 0.0 {
                    positive.scale(pi.plus) * theta.powf(positive.exponent)
                } else {
                    negative.scale(pi.minus) * (-theta).powf(negative.exponent)
                }
            }
            OutsideFamily::AffinePieces { pieces } => {
                pieces.iter().map(|&(m, c)| m * theta + c).fold(f64::NEG_INFINITY, f64::max)
            }
            OutsideFamily::DarkPoolQuadratic { alpha, p } => {
                let d = theta - pi.plus / (2.0 * alpha);
                alpha * p * d * d
            }
            OutsideFamily::HardExclusion { lo, hi } => {
                if theta < *lo || theta > *hi {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            OutsideFamily::Tabulated { curve } => curve.value(theta),
        }
    }

    /// Derivative of [`raw`](Self::raw); `left` selects the left limit at kinks.
    pub fn raw_derivative(&self, theta: f64, pi: PricePair, left: bool) -> f64 {
        match &self.family {
            OutsideFamily::Trivial => 0.0,
            OutsideFamily::PowerPlus { negative, positive } => {
                let pos_side = theta > 0.0 || (theta == 0.0 && !left);
                if pos_side {
                    let e = positive.exponent;
                    positive.scale(pi.plus) * e * theta.abs().powf(e - 1.0)
                } else {
                    let e = negative.exponent;
                    -negative.scale(pi.minus) * e * theta.abs().powf(e - 1.0)
                }
            }
            OutsideFamily::AffinePieces { pieces } => {
                let best = pieces.iter().map(|&(m, c)| m * theta + c).fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-13 * (1.0 + best.abs());
                let active = pieces.iter().filter(|&&(m, c)| m * theta + c >= best - tol).map(|&(m, _)| m);
                if left {
                    active.fold(f64::INFINITY, f64::min)
                } else {
                    active.fold(f64::NEG_INFINITY, f64::max)
                }
            }
            OutsideFamily::DarkPoolQuadratic { alpha, p } => 2.0 * alpha * p * (theta - pi.plus / (2.0 * alpha)),
            OutsideFamily::HardExclusion { lo, hi } => {
                if theta < *lo || theta > *hi || (left && theta == *lo) || (!left && theta == *hi) {
                    if theta <= *lo {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                } else {
                    0.0
                }
            }
            OutsideFamily::Tabulated { curve } => curve.derivative(theta, left),
        }
    }

    pub fn value(&self, theta: f64, pi: PricePair) -> f64 {
        let r = self.raw(theta, pi) - self.kappa;
        if r > 0.0 {
            r
        } else {
            0.0
        }
    }

    pub fn derivative(&self, theta: f64, pi: PricePair, left: bool) -> f64 {
        let r = self.raw(theta, pi) - self.kappa;
        if r.is_infinite() {
            return self.raw_derivative(theta, pi, left);
        }
        if r < 0.0 {
            return 0.0;
        }
        let d = self.raw_derivative(theta, pi, left);
        if r > 0.0 {
            return d;
        }
        // On the zero level set: the max with zero picks the outward slope.
        if left {
            d.min(0.0)
        } else {
            d.max(0.0)
        }
    }

    /// Sorted kinks of `u0` inside `(lo, hi)`: the zero-level crossings plus
    /// the family's own breakpoints.
    pub fn breakpoints(&self, pi: PricePair, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let k = self.kappa;
        match &self.family {
            OutsideFamily::Trivial => {}
            OutsideFamily::PowerPlus { negative, positive } => {
                let cp = positive.scale(pi.plus);
                if cp > 0.0 && k > 0.0 {
                    out.push((k / cp).powf(1.0 / positive.exponent));
                }
                let cn = negative.scale(pi.minus);
                if cn > 0.0 && k > 0.0 {
                    out.push(-(k / cn).powf(1.0 / negative.exponent));
                }
            }
            OutsideFamily::AffinePieces { pieces } => {
                for (i, &(m1, c1)) in pieces.iter().enumerate() {
                    for &(m2, c2) in &pieces[i + 1..] {
                        if m1 != m2 {
                            let x = (c2 - c1) / (m1 - m2);
                            let r = self.raw(x, pi);
                            if (r - (m1 * x + c1)).abs() <= 1e-12 * (1.0 + x.abs()) && r > k {
                                out.push(x);
                            }
                        }
                    }
                    if m1 != 0.0 {
                        let x = (k - c1) / m1;
                        if (self.raw(x, pi) - k).abs() <= 1e-12 * (1.0 + k.abs()) {
                            out.push(x);
                        }
                    }
                }
            }
            OutsideFamily::DarkPoolQuadratic { alpha, p } => {
                if alpha * p > 0.0 {
                    let c = pi.plus / (2.0 * alpha);
                    let w = (k / (alpha * p)).sqrt();
                    out.push(c - w);
                    out.push(c + w);
                }
            }
            OutsideFamily::HardExclusion { lo: a, hi: b } => {
                out.push(*a);
                out.push(*b);
            }
            OutsideFamily::Tabulated { curve } => {
                let g = |t: f64| curve.value(t) - k;
                let n = 4000;
                let mut prev_t = lo;
                let mut prev_g = g(lo);
                for i in 1..=n {
                    let t = lo + (hi - lo) * i as f64 / n as f64;
                    let gt = g(t);
                    if prev_g.signum() != gt.signum() && prev_g != 0.0 {
                        if let Ok(r) = find_root(g, prev_t, t, &RootConfig::with_tol(1e-14)) {
                            out.push(r);
                        }
                    }
                    prev_t = t;
                    prev_g = gt;
                }
            }
        }
        out.retain(|x| x.is_finite() && *x > lo && *x < hi);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        out
    }

    /// True when `u0` has different one-sided slopes at `theta`.
    pub fn is_kink(&self, theta: f64, pi: PricePair) -> bool {
        let l = self.derivative(theta, pi, true);
        let r = self.derivative(theta, pi, false);
        (l - r).abs() > 1e-12 * (1.0 + l.abs().max(r.abs()))
    }
}
