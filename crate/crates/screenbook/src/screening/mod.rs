//! Optimal books when traders hold outside options.

mod extension;
mod side;

use serde::{Deserialize, Serialize};

pub use extension::{extend_over_excluded, Extension, SupportLine};
pub use side::{SegKind, Segment, SideSolution};

use crate::book::{BookSolution, Interval, Partition, RegionLabel, SideSolveState, SpreadReport};
use crate::error::{Error, Result};
use crate::model::{validate, ModelSpec, PricePair, Severity, Side, SideView};
use crate::numerics::{find_root, isotonic_regression, RootConfig};
use side::SideProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnConfig {
    /// Uniform base points of the output grid (region boundaries are added).
    pub grid_n: usize,
    /// Scan points per side when searching for binding contacts.
    pub binding_scan_n: usize,
    pub quad_tol: f64,
    /// How far below the outside option the interior schedule must dip to count as a contact.
    pub touch_tol: f64,
    pub gamma_tol: f64,
    /// Optima this close to the first binding multiplier are snapped onto it.
    pub snap_tol: f64,
    /// Skip the assumption checks before solving.
    pub skip_validation: bool,
}

impl Default for CnConfig {
    fn default() -> Self {
        Self {
            grid_n: 2001,
            binding_scan_n: 256,
            quad_tol: 1e-13,
            touch_tol: 1e-12,
            gamma_tol: 1e-12,
            snap_tol: 1e-7,
            skip_validation: false,
        }
    }
}

impl CnConfig {
    pub fn check(&self) -> Result<()> {
        if self.grid_n < 3 || self.grid_n.is_multiple_of(2) {
            return Err(Error::Parameter(format!("grid_n must be odd and at least 3, got {}", self.grid_n)));
        }
        if self.binding_scan_n < 64 {
            return Err(Error::Parameter(format!("binding_scan_n must be at least 64, got {}", self.binding_scan_n)));
        }
        for (name, v) in [
            ("quad_tol", self.quad_tol),
            ("touch_tol", self.touch_tol),
            ("gamma_tol", self.gamma_tol),
            ("snap_tol", self.snap_tol),
        ] {
            if !(v > 0.0 && v < 1e-2) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 1e-2), got {v}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn ensure_valid(spec: &ModelSpec, cfg: &CnConfig) -> Result<()> {
    cfg.check()?;
    if cfg.skip_validation {
        return Ok(());
    }
    let rep = validate(spec, 257)?;
    let errs: Vec<String> = rep
        .checks
        .iter()
        .filter(|c| !c.passed && c.severity == Severity::Error)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Parameter(errs.join("; ")))
    }
}

/// Solves the dealer's problem against outside options priced at `pi`.
pub fn solve_cn(spec: &ModelSpec, pi: PricePair, cfg: &CnConfig) -> Result<BookSolution> {
    let spec_pi = spec.with_prices(pi);
    ensure_valid(&spec_pi, cfg)?;
    solve_book(&spec_pi, pi, cfg)
}

pub(crate) fn solve_book(spec: &ModelSpec, pi: PricePair, cfg: &CnConfig) -> Result<BookSolution> {
    let mk = |side| SideProblem::new(SideView::new(spec, pi, side), cfg);
    let neg_sol = mk(Side::Negative).solve()?;
    let pos_sol = mk(Side::Positive).solve()?;
    assemble(spec, pi, cfg, (&mk(Side::Negative), &neg_sol), (&mk(Side::Positive), &pos_sol))
}

fn assemble(
    spec: &ModelSpec,
    pi: PricePair,
    cfg: &CnConfig,
    neg: (&SideProblem, &SideSolution),
    pos: (&SideProblem, &SideSolution),
) -> Result<BookSolution> {
    let (lo, hi) = (spec.theta.lo, spec.theta.hi);
    let width = hi - lo;
    let mut mandatory = vec![lo, 0.0, hi];
    for (p, s) in [neg, pos] {
        let sg = p.view.sign();
        for seg in &s.segments {
            mandatory.push(sg * seg.lo);
            mandatory.push(sg * seg.hi);
        }
        for e in &s.extensions {
            if let Some(c) = e.crossing {
                mandatory.push(sg * c);
            }
        }
        mandatory.extend(p.view.kinks().iter().map(|x| sg * x));
    }
    mandatory.retain(|t| t.is_finite() && *t >= lo && *t <= hi);
    mandatory.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mandatory.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * width);
    let n = cfg.grid_n;
    // Regular nodes yield to nearby breakpoints; slivers amplify round-off in v.
    let min_gap = 0.01 * width / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo + width * i as f64 / (n - 1) as f64)
        .filter(|t| {
            let k = mandatory.partition_point(|m| m < t);
            let near = |j: usize| mandatory.get(j).is_some_and(|m| (m - t).abs() < min_gap);
            !(near(k) || (k > 0 && near(k - 1)))
        })
        .collect();
    grid.extend_from_slice(&mandatory);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let zi = grid.iter().position(|&t| t == 0.0).expect("zero is mandatory");
    let xs_neg: Vec<f64> = grid[..=zi].iter().rev().map(|t| -t).collect();
    let xs_pos: Vec<f64> = grid[zi..].to_vec();
    let s_neg = neg.0.sample(neg.1, &xs_neg)?;
    let s_pos = pos.0.sample(pos.1, &xs_pos)?;

    let m = grid.len();
    let mut q = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut gamma = vec![0.0; m];
    let mut rep = vec![false; m];
    let mut labels = vec![RegionLabel::Reserved; m];
    for (k, p) in s_neg.iter().enumerate() {
        let i = zi - k;
        q[i] = -p.q;
        v[i] = p.v;
        gamma[i] = 1.0 - p.gamma;
        rep[i] = p.gamma_reporting_only;
        labels[i] = label_of(p.kind);
    }
    for (k, p) in s_pos.iter().enumerate() {
        let i = zi + k;
        q[i] = p.q;
        v[i] = p.v;
        gamma[i] = p.gamma;
        rep[i] = p.gamma_reporting_only;
        labels[i] = label_of(p.kind);
    }

    let mut ironed = false;
    let interior_only =
        |s: &SideSolution| s.segments.iter().all(|g| matches!(g.kind, SegKind::Reserved | SegKind::Interior { .. }));
    if interior_only(neg.1) && interior_only(pos.1) {
        ironed = iron(spec, &grid, &mut q, &mut v, &labels, zi);
    }

    let u0: Vec<f64> = grid.iter().map(|&t| spec.u0(t, pi)).collect();
    let tau: Vec<f64> = (0..m).map(|i| spec.utility(grid[i], q[i]) - v[i]).collect();
    let per_type_profit: Vec<f64> =
        (0..m).map(|i| if labels[i] == RegionLabel::Excluded { 0.0 } else { tau[i] - spec.cost(q[i]) }).collect();

    let mut pieces = Vec::new();
    for seg in neg.1.segments.iter().rev() {
        pieces.push(Interval { lo: -seg.hi, hi: -seg.lo, label: label_of(seg.kind) });
    }
    for seg in &pos.1.segments {
        pieces.push(Interval { lo: seg.lo, hi: seg.hi, label: label_of(seg.kind) });
    }
    let partition = Partition::from_pieces(pieces);

    let t_plus = pos.0.spread_endpoint(pos.1);
    let t_minus = -neg.0.spread_endpoint(neg.1);
    let degenerate = [neg.1, pos.1].iter().any(|s| s.x0 <= 0.0 || s.x0 >= s.end);
    let spread = SpreadReport::new(t_minus, t_plus, -neg.1.x0, pos.1.x0, degenerate);

    let sides = vec![side_state(neg.1), side_state(pos.1)];
    Ok(BookSolution {
        prices: pi,
        grid,
        q,
        tau,
        v,
        gamma,
        gamma_reporting_only: rep,
        u0,
        labels,
        per_type_profit,
        partition,
        spread,
        dealer_profit: neg.1.profit + pos.1.profit,
        sides,
        ironed,
    })
}

fn label_of(kind: SegKind) -> RegionLabel {
    match kind {
        SegKind::Reserved => RegionLabel::Reserved,
        SegKind::Interior { .. } => RegionLabel::FullService,
        SegKind::Matched => RegionLabel::Matched,
        SegKind::Excluded => RegionLabel::Excluded,
    }
}

fn side_state(s: &SideSolution) -> SideSolveState {
    let sg = match s.side {
        Side::Negative => -1.0,
        Side::Positive => 1.0,
    };
    let map_iv = |a: f64, b: f64| if sg > 0.0 { (a, b) } else { (-b, -a) };
    let mut binding: Vec<(f64, f64, bool)> = s
        .segments
        .iter()
        .filter(|g| matches!(g.kind, SegKind::Matched | SegKind::Excluded))
        .map(|g| {
            let (a, b) = map_iv(g.lo, g.hi);
            (a, b, g.kind == SegKind::Matched)
        })
        .collect();
    binding.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    SideSolveState {
        side: s.side,
        gamma: if sg > 0.0 { s.gamma } else { 1.0 - s.gamma },
        theta0: sg * s.x0,
        touch_points: s.contact.map(|c| sg * c).into_iter().collect(),
        binding_intervals: binding,
        exit: s.exit.map(|x| sg * x),
        tangent: s.tangent,
        profit: s.profit,
    }
}

/// Monotonizes quantities on each side's interior region when the
/// hazard-rate conditions fail; returns whether anything changed.
fn iron(spec: &ModelSpec, grid: &[f64], q: &mut [f64], v: &mut [f64], labels: &[RegionLabel], zi: usize) -> bool {
    let mut changed = false;
    let m = grid.len();
    let runs = [(0usize, zi), (zi, m - 1)];
    for (a, b) in runs {
        let idx: Vec<usize> = (a..=b).filter(|&i| labels[i] == RegionLabel::FullService).collect();
        if idx.len() < 2 {
            continue;
        }
        if idx.windows(2).all(|w| q[w[1]] >= q[w[0]] - 1e-12) {
            continue;
        }
        let vals: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
        let wts: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let l = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
                let r = if i + 1 < m { grid[i + 1] - grid[i] } else { 0.0 };
                spec.pdf(grid[i]) * 0.5 * (l + r) + 1e-300
            })
            .collect();
        let fit = isotonic_regression(&vals, &wts);
        for (k, &i) in idx.iter().enumerate() {
            q[i] = fit[k];
        }
        changed = true;
    }
    if changed {
        // Rebuild utility outward from zero with the trapezoid rule.
        for i in zi + 1..m {
            v[i] = if labels[i] == RegionLabel::Reserved {
                0.0
            } else {
                v[i - 1] + 0.5 * (spec.psi1(q[i]) + spec.psi1(q[i - 1])) * (grid[i] - grid[i - 1])
            };
        }
        for i in (0..zi).rev() {
            v[i] = if labels[i] == RegionLabel::Reserved {
                0.0
            } else {
                v[i + 1] - 0.5 * (spec.psi1(q[i]) + spec.psi1(q[i + 1])) * (grid[i + 1] - grid[i])
            };
        }
    }
    changed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BindingKind {
    /// The benchmark schedule already exceeds the matching quantity.
    NoBind,
    /// Matching is feasible but loses money.
    Unprofitable,
    Profitable,
}

/// Classifies where the outside option could bind on one side, independently
/// of the solve. Only types with a positive outside option are classified.
pub fn detect_binding_structure(
    spec: &ModelSpec,
    pi: PricePair,
    side: Side,
    cfg: &CnConfig,
) -> Result<Vec<(f64, f64, BindingKind)>> {
    cfg.check()?;
    let n = cfg.binding_scan_n;
    let view = SideView::new(spec, pi, side);
    let sg = view.sign();
    let classify = |x: f64| -> Option<BindingKind> {
        let u = view.u0(x);
        if u <= 0.0 {
            return None;
        }
        if u.is_infinite() {
            return Some(BindingKind::Unprofitable);
        }
        let qc = view.matching_quantity(x).ok()?;
        let l1 = view.virtual_quantity(x, 1.0).ok()?;
        Some(if qc < l1 {
            BindingKind::NoBind
        } else if view.margin(x) < 0.0 {
            BindingKind::Unprofitable
        } else {
            BindingKind::Profitable
        })
    };
    let end = view.end();
    let mut xs: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).collect();
    xs.extend(view.kinks());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut runs: Vec<(f64, f64, BindingKind)> = Vec::new();
    let mut prev: Option<(f64, Option<BindingKind>)> = None;
    for &x in &xs {
        let k = classify(x);
        match prev {
            Some((px, pk)) if pk != k => {
                // Refine the switch point by bisection on the label.
                let (mut a, mut b) = (px, x);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if classify(mid) == pk {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                if let (Some(last), Some(_)) = (runs.last_mut(), pk) {
                    last.1 = a;
                }
                if let Some(kk) = k {
                    runs.push((b, x, kk));
                }
            }
            _ => {
                if let (Some(last), Some(_)) = (runs.last_mut(), k) {
                    last.1 = x;
                } else if let Some(kk) = k {
                    runs.push((x, x, kk));
                }
            }
        }
        prev = Some((x, k));
    }
    let mut out: Vec<(f64, f64, BindingKind)> = runs
        .into_iter()
        .filter(|r| r.1 > r.0)
        .map(|(a, b, k)| if sg > 0.0 { (a, b, k) } else { (-b, -a, k) })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Solves one side of the book.
pub fn solve_side(
    spec: &ModelSpec,
    pi: PricePair,
    side: Side,
    cfg: &CnConfig,
) -> Result<(SideSolveState, SideSolution)> {
    cfg.check()?;
    let sol = SideProblem::new(SideView::new(spec, pi, side), cfg).solve()?;
    Ok((side_state(&sol), sol))
}

/// Type where the quantity schedule first reaches `q` on the given side (for reporting).
pub fn quantity_crossing(sol: &BookSolution, q: f64) -> Option<f64> {
    let i = sol.q.windows(2).position(|w| (w[0] - q) * (w[1] - q) <= 0.0 && w[0] != w[1])?;
    let (a, b) = (sol.grid[i], sol.grid[i + 1]);
    let (qa, qb) = (sol.q[i], sol.q[i + 1]);
    find_root(|t| qa + (qb - qa) * (t - a) / (b - a) - q, a, b, &RootConfig::default()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::check_invariants;
    use crate::model::fixtures::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mussa_rosen_book() {
        let s = mussa_rosen(1.0);
        let sol = solve_cn(&s, PricePair::default(), &CnConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.spread.theta_hi0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.spread.theta_lo0, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.spread.t_plus, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.spread.t_minus, -1.0, epsilon = 1e-10);
        // Profit: 2 * int_{1/2}^1 (2t-1)^2/2 * 1/2 dt = 1/12.
        assert_abs_diff_eq!(sol.dealer_profit, 1.0 / 12.0, epsilon = 1e-11);
        let rep = check_invariants(&s, &sol);
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn tent_benchmark_reserved_set() {
        let s = tent(crate::model::OutsideOption::trivial(), PricePair::default());
        let sol = solve_cn(&s, PricePair::default(), &CnConfig::default()).unwrap();
        let b = 1.0 - 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(sol.spread.theta_hi0, b, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.spread.theta_lo0, -b, epsilon = 1e-12);
        assert!(check_invariants(&s, &sol).is_ok());
    }

    #[test]
    fn power_option_first_iterate() {
        let s = tent_power();
        let sol = solve_cn(&s, s.prices, &CnConfig::default()).unwrap();
        let st = sol.side(Side::Positive);
        assert_abs_diff_eq!(st.gamma, 0.5105246, epsilon = 3e-7);
        assert_abs_diff_eq!(st.theta0, 0.00704, epsilon = 2e-5);
        assert_abs_diff_eq!(st.touch_points[0], 0.01589, epsilon = 2e-5);
        assert_abs_diff_eq!(sol.spread.t_plus, 0.0280984, epsilon = 5e-7);
        assert_abs_diff_eq!(st.exit.unwrap(), 0.47608, epsilon = 2e-5);
        let ex = sol.excluded_intervals();
        assert_eq!(ex.len(), 1);
        assert_abs_diff_eq!(ex[0].1, 0.16674, epsilon = 2e-5);
        let rep = check_invariants(&s, &sol);
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn affine_option_tangency() {
        let s = tent_affine();
        let sol = solve_cn(&s, s.prices, &CnConfig::default()).unwrap();
        let st = sol.side(Side::Positive);
        assert_abs_diff_eq!(st.gamma, 0.969543, epsilon = 2e-6);
        assert_abs_diff_eq!(st.theta0, 0.388491, epsilon = 2e-6);
        assert!(st.tangent);
        assert_abs_diff_eq!(st.touch_points[0], 0.674802, epsilon = 2e-6);
        assert_abs_diff_eq!(sol.spread.t_plus, 1.282396, epsilon = 2e-6);
        assert_abs_diff_eq!(st.exit.unwrap(), 0.71838, epsilon = 2e-5);
        let neg = sol.side(Side::Negative);
        assert_abs_diff_eq!(neg.theta0, -0.388491, epsilon = 2e-6);
        let rep = check_invariants(&s, &sol);
        assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn binding_structure_of_power_option() {
        let s = tent_power();
        let cfg = CnConfig { binding_scan_n: 512, ..CnConfig::default() };
        let b = detect_binding_structure(&s, s.prices, Side::Positive, &cfg).unwrap();
        let kinds: Vec<BindingKind> = b.iter().map(|r| r.2).collect();
        assert_eq!(kinds, vec![BindingKind::Unprofitable, BindingKind::Profitable, BindingKind::NoBind]);
        assert_abs_diff_eq!(b[0].1, 0.166742, epsilon = 1e-6);
        assert_abs_diff_eq!(b[2].0, 0.476084, epsilon = 1e-6);
        assert_eq!(b[2].1, 1.0);
        assert!(detect_binding_structure(&s, s.prices, Side::Negative, &cfg).unwrap().is_empty());
        let raw = s.raw_margin_negative_intervals(s.prices, -1.0, 1.0, 2048);
        assert_eq!(raw.len(), 1);
        assert_abs_diff_eq!(raw[0].0, 0.0035, epsilon = 5e-4);
        assert_abs_diff_eq!(raw[0].1, 0.1667, epsilon = 5e-4);
    }

    #[test]
    fn affine_option_has_no_exclusion() {
        let s = tent_affine();
        for side in [Side::Negative, Side::Positive] {
            let b = detect_binding_structure(&s, s.prices, side, &CnConfig::default()).unwrap();
            assert!(!b.is_empty());
            assert!(b.iter().all(|r| r.2 != BindingKind::Unprofitable));
        }
    }

    #[test]
    fn hard_exclusion_multiplier() {
        for (r, r0) in [(1.0, 0.5), (2.0, 0.7)] {
            let s = hard_exclusion(r, r0);
            let sol = solve_cn(&s, s.prices, &CnConfig::default()).unwrap();
            assert_abs_diff_eq!(sol.side(Side::Negative).gamma, (r - r0) / (2.0 * r), epsilon = 1e-7);
            assert_abs_diff_eq!(sol.side(Side::Positive).gamma, 1.0 - (r - r0) / (2.0 * r), epsilon = 1e-7);
            assert_abs_diff_eq!(sol.spread.theta_lo0, -r0 / 2.0, epsilon = 1e-7);
            for (&t, &v) in sol.grid.iter().zip(&sol.v) {
                if (-r0..=-r0 / 2.0).contains(&t) {
                    assert_abs_diff_eq!(v, (t + r0 / 2.0).powi(2), epsilon = 1e-7);
                }
            }
            assert!(crate::book::check_invariants(&s, &sol).is_ok());
        }
    }
}
