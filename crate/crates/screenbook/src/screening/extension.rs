//! Convex continuation of the indirect utility across excluded types.

use serde::Serialize;

use crate::error::{Error, Result};

/// A line `v + slope (t - x)` supporting the utility at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportLine {
    pub x: f64,
    pub v: f64,
    pub slope: f64,
}

impl SupportLine {
    pub fn at(&self, t: f64) -> f64 {
        self.v + self.slope * (t - self.x)
    }
}

/// Maximum of at most two support lines over `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extension {
    pub lo: f64,
    pub hi: f64,
    pub left: SupportLine,
    pub right: Option<SupportLine>,
    /// Where the right line takes over.
    pub crossing: Option<f64>,
}

impl Extension {
    pub fn value(&self, t: f64) -> f64 {
        match (&self.right, self.crossing) {
            (Some(r), Some(c)) if t >= c => r.at(t),
            _ => self.left.at(t),
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match (&self.right, self.crossing) {
            (Some(r), Some(c)) if t >= c => r.slope,
            _ => self.left.slope,
        }
    }
}

/// Builds the smallest convex continuation across `(lo, hi)` compatible with
/// the one-sided slopes at both ends. Without a right line (the interval runs
/// to the edge of the type space) the left line is continued.
pub fn extend_over_excluded(lo: f64, hi: f64, left: SupportLine, right: Option<SupportLine>) -> Result<Extension> {
    if !(hi > lo) || !left.v.is_finite() || !left.slope.is_finite() {
        return Err(Error::Structure(format!("invalid excluded interval ({lo}, {hi})")));
    }
    let Some(r) = right else {
        return Ok(Extension { lo, hi, left, right: None, crossing: None });
    };
    if !r.v.is_finite() || !r.slope.is_finite() {
        return Err(Error::Structure(format!("invalid support at the right end of ({lo}, {hi})")));
    }
    let ds = r.slope - left.slope;
    let tol = 1e-12 * (1.0 + left.slope.abs().max(r.slope.abs()));
    let crossing =
        if ds.abs() <= tol { 0.5 * (lo + hi) } else { (left.v - r.v + r.slope * r.x - left.slope * left.x) / ds };
    if ds < -tol {
        return Err(Error::Structure(format!("slopes across ({lo}, {hi}) decrease: {} -> {}", left.slope, r.slope)));
    }
    let slack = 1e-9 * (hi - lo).max(1e-12);
    if crossing < lo - slack || crossing > hi + slack {
        return Err(Error::Structure(format!("support lines over ({lo}, {hi}) cross outside it at {crossing}")));
    }
    Ok(Extension { lo, hi, left, right: Some(r), crossing: Some(crossing.clamp(lo, hi)) })
}
