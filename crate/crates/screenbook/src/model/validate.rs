use serde::Serialize;

use super::{ModelSpec, OutsideFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub severity: Severity,
    pub detail: String,
    /// Offending type (or quantity, for cost checks) of the worst violation.
    pub location: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// No failed check of error severity.
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.severity != Severity::Error)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed && c.severity != Severity::Info)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    fn push(&mut self, name: &'static str, severity: Severity, worst: Option<(f64, f64)>, what: &str) {
        let (passed, detail, location) = match worst {
            None => (true, String::from("ok"), None),
            Some((at, val)) => (false, format!("{what} (value {val:.6e})"), Some(at)),
        };
        self.checks.push(Check { name, passed, severity, detail, location });
    }
}

fn worst_of<I: Iterator<Item = (f64, f64)>>(it: I) -> Option<(f64, f64)> {
    it.fold(None, |acc: Option<(f64, f64)>, (x, bad)| match acc {
        Some((_, b)) if b >= bad => acc,
        _ => Some((x, bad)),
    })
}

/// Checks the standing assumptions on a grid of `grid_n` points in the type
/// space (and in the quantity range for cost checks).
pub fn validate(spec: &ModelSpec, grid_n: usize) -> Result<ValidationReport> {
    if grid_n < 16 {
        return Err(Error::Parameter(format!("validation grid needs at least 16 points, got {grid_n}")));
    }
    let (lo, hi) = (spec.theta.lo, spec.theta.hi);
    let thetas: Vec<f64> = (0..grid_n).map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64).collect();
    let qb = spec.qbar().max(0.1) * 2.0;
    let qs: Vec<f64> = (0..grid_n).map(|i| -qb + 2.0 * qb * i as f64 / (grid_n - 1) as f64).collect();
    let pi = spec.prices;

    for &t in &thetas {
        if !spec.pdf(t).is_finite() || !spec.cdf(t).is_finite() || spec.outside.raw(t, pi).is_nan() {
            return Err(Error::ModelEvaluation { theta: t });
        }
    }
    for &q in &qs {
        if !(spec.psi1(q).is_finite() && spec.psi2(q).is_finite() && spec.cost(q).is_finite()) {
            return Err(Error::ModelEvaluation { theta: q });
        }
    }

    let mut b = Builder { checks: Vec::new() };
    let interior = &thetas[1..grid_n - 1];

    b.push(
        "density_positive",
        Severity::Error,
        worst_of(interior.iter().filter(|&&t| spec.pdf(t) <= 0.0).map(|&t| (t, -spec.pdf(t)))),
        "density is not positive",
    );
    let mass_err = (spec.cdf(hi) - 1.0).abs().max(spec.cdf(lo).abs());
    b.push(
        "density_normalized",
        Severity::Error,
        (mass_err > 1e-9).then_some((hi, mass_err)),
        "cdf does not run from 0 to 1",
    );

    let h = (hi - lo) / (grid_n - 1) as f64;
    let ratio_lo = |t: f64| spec.cdf(t) / spec.pdf(t);
    let ratio_hi = |t: f64| (1.0 - spec.cdf(t)) / spec.pdf(t);
    let hazard = worst_of(interior.windows(2).filter_map(|w| {
        let d1 = ratio_lo(w[1]) - ratio_lo(w[0]);
        let d2 = ratio_hi(w[1]) - ratio_hi(w[0]);
        let bad = (-d1).max(d2);
        (bad > 1e-12 * h).then_some((w[0], bad / h))
    }));
    b.push("hazard_monotone", Severity::Warning, hazard, "hazard-rate monotonicity fails; quantities will be ironed");

    let p10 = spec.psi1(0.0).abs().max(spec.psi2(0.0).abs());
    b.push(
        "preferences_vanish_at_zero",
        Severity::Error,
        (p10 > 0.0).then_some((0.0, p10)),
        "psi1(0) or psi2(0) is nonzero",
    );
    b.push(
        "psi1_increasing",
        Severity::Error,
        worst_of(qs.iter().filter(|&&q| spec.dpsi1(q) <= 0.0).map(|&q| (q, -spec.dpsi1(q)))),
        "psi1 is not strictly increasing",
    );
    let c0 = spec.cost(0.0).abs();
    b.push("cost_vanishes_at_zero", Severity::Error, (c0 > 0.0).then_some((0.0, c0)), "C(0) is nonzero");
    b.push(
        "cost_strictly_convex",
        Severity::Error,
        worst_of(qs.iter().filter(|&&q| spec.cost.c.d2(q) <= 0.0).map(|&q| (q, -spec.cost.c.d2(q)))),
        "C is not strictly convex",
    );
    b.push(
        "net_cost_nonnegative",
        Severity::Warning,
        worst_of(qs.iter().filter(|&&q| spec.ctilde(q) < -1e-14).map(|&q| (q, -spec.ctilde(q)))),
        "C - psi2 is negative",
    );
    b.push(
        "net_cost_convex",
        Severity::Error,
        worst_of(qs.iter().filter(|&&q| spec.dk(q) <= 0.0).map(|&q| (q, -spec.dk(q)))),
        "net cost is not strictly convex in the utility slope",
    );
    let k0 = spec.k(0.0).abs();
    b.push(
        "net_cost_flat_at_zero",
        Severity::Warning,
        (k0 > 1e-12).then_some((0.0, k0)),
        "net cost has nonzero slope at zero quantity",
    );

    let kappa = spec.outside.kappa;
    let raw0 = spec.outside.raw(0.0, pi) - kappa;
    let near_zero_bad = if matches!(spec.outside.family, OutsideFamily::Trivial) {
        None
    } else if matches!(spec.outside.family, OutsideFamily::HardExclusion { .. }) {
        (spec.u0(0.0, pi) != 0.0).then_some((0.0, raw0))
    } else {
        (raw0 >= 0.0).then_some((0.0, raw0))
    };
    b.push(
        "outside_option_vanishes_near_zero",
        Severity::Error,
        near_zero_bad,
        "outside option is attractive at theta = 0",
    );

    let u: Vec<f64> = thetas.iter().map(|&t| spec.u0(t, pi)).collect();
    let scale = u.iter().filter(|x| x.is_finite()).fold(1.0f64, |m, x| m.max(x.abs()));
    let convex_bad = worst_of((1..grid_n - 1).filter_map(|i| {
        let (a, m, c) = (u[i - 1], u[i], u[i + 1]);
        if !(a.is_finite() && m.is_finite() && c.is_finite()) {
            return None;
        }
        let d2 = a - 2.0 * m + c;
        (d2 < -1e-10 * scale).then_some((thetas[i], -d2))
    }));
    b.push("outside_option_convex", Severity::Error, convex_bad, "outside option is not convex");

    let mono = spec.outside.monotone_in_price();
    b.checks.push(Check {
        name: "outside_option_monotone_in_price",
        passed: mono,
        severity: Severity::Info,
        detail: if mono { "ok".into() } else { "outside option is not nonincreasing in the CN price".into() },
        location: None,
    });

    // Reported derivatives against central differences.
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
    let dh = 1e-6;
    let fd_q = worst_of(qs.iter().step_by(7).filter_map(|&q| {
        let e1 = rel(spec.dpsi1(q), (spec.psi1(q + dh) - spec.psi1(q - dh)) / (2.0 * dh));
        let e2 = rel(spec.prefs.psi2.d1(q), (spec.psi2(q + dh) - spec.psi2(q - dh)) / (2.0 * dh));
        let e3 = rel(spec.cost.c.d1(q), (spec.cost(q + dh) - spec.cost(q - dh)) / (2.0 * dh));
        let e = e1.max(e2).max(e3);
        (e > 1e-6).then_some((q, e))
    }));
    b.push(
        "derivatives_consistent",
        Severity::Warning,
        fd_q,
        "preference or cost derivative disagrees with finite differences",
    );
    let kinks = spec.outside.breakpoints(pi, lo, hi);
    let dens_kinks = spec.density.kinks();
    let fd_t = worst_of(interior.iter().step_by(7).filter_map(|&t| {
        let near = |ks: &[f64]| ks.iter().any(|k| (k - t).abs() < 10.0 * dh);
        if near(&kinks) || near(&dens_kinks) {
            return None;
        }
        let ef = rel(spec.pdf(t), (spec.cdf(t + dh) - spec.cdf(t - dh)) / (2.0 * dh));
        let up = spec.u0(t + dh, pi);
        let um = spec.u0(t - dh, pi);
        let eu =
            if up.is_finite() && um.is_finite() { rel(spec.du0(t, pi, false), (up - um) / (2.0 * dh)) } else { 0.0 };
        let e = ef.max(eu);
        (e > 1e-6).then_some((t, e))
    }));
    b.push(
        "type_derivatives_consistent",
        Severity::Warning,
        fd_t,
        "density or outside-option derivative disagrees with finite differences",
    );

    Ok(ValidationReport { checks: b.checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::*;

    #[test]
    fn mussa_rosen_passes_everything() {
        let rep = validate(&mussa_rosen(1.0), 201).unwrap();
        assert!(rep.is_ok());
        assert_eq!(rep.failures().count(), 0, "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn concave_cost_fails() {
        let s = mussa_rosen(1.0);
        let spec = ModelSpec { cost: CostSpec { c: Poly::new(vec![0.0, 0.0, -1.0]) }, ..s };
        let rep = validate(&spec, 64).unwrap();
        assert!(!rep.get("cost_strictly_convex").unwrap().passed);
        assert!(!rep.is_ok());
    }

    #[test]
    fn attractive_dark_pool_near_zero_fails() {
        let (alpha, p, kappa) = (1.0f64, 0.5, 0.01);
        let pi = 2.0 * (alpha * kappa / p).sqrt() + 0.01;
        let spec = ModelSpec::new(
            TypeSpace::new(-1.0, 1.0).unwrap(),
            Density::uniform(-1.0, 1.0).unwrap(),
            PreferenceSpec { psi1: Poly::new(vec![0.0, 2.0 * alpha]), psi2: Poly::new(vec![0.0, 0.0, -alpha]) },
            CostSpec { c: Poly::new(vec![0.0, 0.0, 1.0]) },
            OutsideOption::new(OutsideFamily::DarkPoolQuadratic { alpha, p }, kappa).unwrap(),
            PricePair::new(pi, pi),
            None,
        )
        .unwrap();
        let rep = validate(&spec, 64).unwrap();
        assert!(!rep.get("outside_option_vanishes_near_zero").unwrap().passed);
        assert!(!rep.get("outside_option_monotone_in_price").unwrap().passed);
    }

    #[test]
    fn small_grid_rejected() {
        assert!(validate(&mussa_rosen(1.0), 8).is_err());
    }
}
