//! Solved books: sampled schedules, the type partition, the spread, welfare
//! comparisons, invariant checks and emitters.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, PricePair, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RegionLabel {
    Reserved,
    FullService,
    Matched,
    Excluded,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Reserved => "reserved",
            RegionLabel::FullService => "full_service",
            RegionLabel::Matched => "matched",
            RegionLabel::Excluded => "excluded",
        }
    }

    pub fn participates(self) -> bool {
        self != RegionLabel::Excluded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub label: RegionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub intervals: Vec<Interval>,
}

impl Partition {
    /// Builds a partition from ordered pieces, dropping empty pieces and
    /// merging neighbours with equal labels.
    pub fn from_pieces(pieces: impl IntoIterator<Item = Interval>) -> Self {
        let mut out: Vec<Interval> = Vec::new();
        for p in pieces {
            if !(p.hi > p.lo) {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.label == p.label => last.hi = p.hi,
                _ => out.push(p),
            }
        }
        Self { intervals: out }
    }

    pub fn of_label(&self, label: RegionLabel) -> impl Iterator<Item = &Interval> {
        self.intervals.iter().filter(move |i| i.label == label)
    }

    pub fn reserved(&self) -> Option<&Interval> {
        self.of_label(RegionLabel::Reserved).next()
    }

    pub fn label_at(&self, t: f64) -> Option<RegionLabel> {
        self.intervals.iter().find(|i| i.lo <= t && t <= i.hi).map(|i| i.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadReport {
    pub t_minus: f64,
    pub t_plus: f64,
    pub width: f64,
    pub theta_lo0: f64,
    pub theta_hi0: f64,
    /// The reserved set collapsed to a point or touched the type-space boundary.
    pub degenerate: bool,
}

impl SpreadReport {
    pub fn new(t_minus: f64, t_plus: f64, theta_lo0: f64, theta_hi0: f64, degenerate: bool) -> Self {
        Self { t_minus, t_plus, width: (t_plus - t_minus).abs(), theta_lo0, theta_hi0, degenerate }
    }
}

/// Per-side summary of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideSolveState {
    pub side: Side,
    /// Constant multiplier between the reserved boundary and the first binding point.
    pub gamma: f64,
    pub theta0: f64,
    pub touch_points: Vec<f64>,
    /// `(lo, hi, profitable)` in type coordinates, ordered by `lo`.
    pub binding_intervals: Vec<(f64, f64, bool)>,
    /// Where the binding set ends and interior quantities resume.
    pub exit: Option<f64>,
    pub tangent: bool,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BookSolution {
    pub prices: PricePair,
    pub grid: Vec<f64>,
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Multiplier values that do not affect any offered contract.
    pub gamma_reporting_only: Vec<bool>,
    pub u0: Vec<f64>,
    pub labels: Vec<RegionLabel>,
    pub per_type_profit: Vec<f64>,
    pub partition: Partition,
    pub spread: SpreadReport,
    pub dealer_profit: f64,
    pub sides: Vec<SideSolveState>,
    /// Quantities were monotonized because the hazard-rate conditions failed.
    pub ironed: bool,
}

impl BookSolution {
    pub fn side(&self, side: Side) -> &SideSolveState {
        self.sides.iter().find(|s| s.side == side).expect("both sides are always present")
    }

    /// Indirect utility on a piecewise-linear interpolation of the grid.
    pub fn v_at(&self, t: f64) -> f64 {
        interp(&self.grid, &self.v, t)
    }

    /// Realized trader utility `max(v, u0)` (the excluded take their outside option).
    pub fn welfare(&self) -> Vec<f64> {
        self.v.iter().zip(&self.u0).map(|(v, u)| v.max(*u)).collect()
    }

    pub fn welfare_at(&self, t: f64) -> f64 {
        let w = self.welfare();
        interp(&self.grid, &w, t)
    }

    pub fn excluded_intervals(&self) -> Vec<(f64, f64)> {
        self.partition.of_label(RegionLabel::Excluded).map(|i| (i.lo, i.hi)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["theta", "q", "tau", "v", "gamma", "u0", "region", "per_type_profit"]).map_err(io)?;
        for i in 0..self.grid.len() {
            wr.write_record([
                fmt_num(self.grid[i]),
                fmt_num(self.q[i]),
                fmt_num(self.tau[i]),
                fmt_num(self.v[i]),
                fmt_num(self.gamma[i]),
                fmt_num(self.u0[i]),
                self.labels[i].as_str().to_string(),
                fmt_num(self.per_type_profit[i]),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "prices": self.prices,
            "spread": self.spread,
            "partition": self.partition,
            "dealer_profit": self.dealer_profit,
            "sides": self.sides,
            "ironed": self.ironed,
        })
    }
}

/// Formats with 12 significant digits, shortest round-trip form.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

/// Linear interpolation on a sorted grid, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i - 1,
    };
    let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// Lower bound for a convex curve sampled at `xs`: secant lines of the
/// neighbouring segments, extended into the segment holding `t`.
pub fn convex_floor(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if n < 4 || t <= xs[0] || t >= xs[n - 1] {
        return interp(xs, ys, t);
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i - 1,
    };
    let line = |a: usize| ys[a] + (ys[a + 1] - ys[a]) / (xs[a + 1] - xs[a]) * (t - xs[a]);
    let mut lo = f64::NEG_INFINITY;
    if i > 0 {
        lo = lo.max(line(i - 1));
    }
    if i + 2 < n {
        lo = lo.max(line(i + 1));
    }
    lo.min(interp(xs, ys, t))
}

pub fn compute_spread(sol: &BookSolution) -> SpreadReport {
    sol.spread
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// `v_base <= v_other` pointwise (realized welfare).
    pub welfare_dominates: bool,
    pub welfare_max_violation: f64,
    /// `Theta0(other)` contained in `Theta0(base)`.
    pub reserved_included: bool,
    pub reserved_max_violation: f64,
    pub spread_narrows: bool,
    pub spread_violation: f64,
    pub base_reserved: (f64, f64),
    pub other_reserved: (f64, f64),
}

/// Compares `other` against `base` on the union of both grids.
pub fn welfare_compare(base: &BookSolution, other: &BookSolution, slack: f64) -> Result<DominanceReport> {
    let (b0, b1) = (base.grid[0], *base.grid.last().unwrap());
    let (o0, o1) = (other.grid[0], *other.grid.last().unwrap());
    if (b0 - o0).abs() > 1e-12 || (b1 - o1).abs() > 1e-12 {
        return Err(Error::Grid(format!("type ranges differ: [{b0}, {b1}] vs [{o0}, {o1}]")));
    }
    let mut grid: Vec<f64> = base.grid.iter().chain(&other.grid).copied().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let wb = base.welfare();
    let wo = other.welfare();
    // Welfare is convex; chords overstate the base curve between its nodes, so
    // it is bounded from below there instead.
    let viol =
        grid.iter().map(|&t| convex_floor(&base.grid, &wb, t) - interp(&other.grid, &wo, t)).fold(0.0f64, f64::max);
    let br = (base.spread.theta_lo0, base.spread.theta_hi0);
    let or = (other.spread.theta_lo0, other.spread.theta_hi0);
    let rv = (br.0 - or.0).max(or.1 - br.1).max(0.0);
    let sv = (other.spread.width - base.spread.width).max(0.0);
    Ok(DominanceReport {
        welfare_dominates: viol <= slack,
        welfare_max_violation: viol,
        reserved_included: rv <= slack,
        reserved_max_violation: rv,
        spread_narrows: sv <= slack,
        spread_violation: sv,
        base_reserved: br,
        other_reserved: or,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural properties every optimal book must satisfy.
#[allow(clippy::needless_range_loop)]
pub fn check_invariants(spec: &ModelSpec, sol: &BookSolution) -> InvariantReport {
    let mut bad = Vec::new();
    let n = sol.grid.len();
    let g = &sol.grid;
    let vmax = sol.v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let conv_tol = 1e-7 * vmax;

    if let Some(i) = (0..n).find(|&i| sol.v[i] < -1e-12) {
        bad.push(format!("v negative at theta = {}: {}", g[i], sol.v[i]));
    }
    let z = g.iter().position(|&t| t == 0.0);
    match z {
        Some(i) if sol.v[i].abs() <= 1e-12 => {}
        Some(i) => bad.push(format!("v(0) = {} is not zero", sol.v[i])),
        None => bad.push("theta = 0 is not a grid node".into()),
    }
    for i in 1..n - 1 {
        let s0 = (sol.v[i] - sol.v[i - 1]) / (g[i] - g[i - 1]);
        let s1 = (sol.v[i + 1] - sol.v[i]) / (g[i + 1] - g[i]);
        let h = (g[i + 1] - g[i - 1]).max(1e-12);
        if (s1 - s0) * h < -conv_tol && s1 - s0 < -1e-7 {
            bad.push(format!("v not convex at theta = {} (slope drop {:.3e})", g[i], s0 - s1));
            break;
        }
    }
    for i in 0..n {
        if sol.labels[i] == RegionLabel::Reserved && sol.v[i].abs() > 1e-12 {
            bad.push(format!("v = {} on the reserved set at theta = {}", sol.v[i], g[i]));
            break;
        }
    }
    let part: Vec<usize> = (0..n).filter(|&i| sol.labels[i].participates()).collect();
    for w in part.windows(2) {
        if sol.q[w[1]] < sol.q[w[0]] - 1e-9 {
            bad.push(format!("q decreases between theta = {} and {}", g[w[0]], g[w[1]]));
            break;
        }
    }
    for i in 0..n - 1 {
        let h = g[i + 1] - g[i];
        let slope = (sol.v[i + 1] - sol.v[i]) / h;
        let a = spec.psi1(sol.q[i]);
        let b = spec.psi1(sol.q[i + 1]);
        let (lo, hi) = (a.min(b), a.max(b));
        let tol = 1e-8 + 8.0 * f64::EPSILON * vmax / h;
        if slope < lo - tol || slope > hi + tol {
            bad.push(format!("envelope identity fails on [{}, {}]: slope {slope} not in [{lo}, {hi}]", g[i], g[i + 1]));
            break;
        }
    }
    for i in 0..n {
        let u = spec.utility(g[i], sol.q[i]) - sol.v[i];
        if (u - sol.tau[i]).abs() > 1e-10 * (1.0 + u.abs()) {
            bad.push(format!("transfer inconsistent with utility at theta = {}", g[i]));
            break;
        }
    }
    for i in 0..n {
        if sol.labels[i].participates() && sol.per_type_profit[i] < -1e-8 {
            bad.push(format!("negative dealer profit {} at participating theta = {}", sol.per_type_profit[i], g[i]));
            break;
        }
    }
    for i in 0..n {
        let lab = sol.labels[i];
        let u0 = sol.u0[i];
        if lab.participates() && sol.v[i] < u0 - 1e-9 * (1.0 + u0.abs()) {
            bad.push(format!("participating type theta = {} gets v < u0", g[i]));
            break;
        }
    }
    let mut prev = f64::NEG_INFINITY;
    for i in 0..n {
        if sol.gamma_reporting_only[i] {
            continue;
        }
        let gm = sol.gamma[i];
        if !(-1e-12..=1.0 + 1e-12).contains(&gm) {
            bad.push(format!("multiplier {gm} outside [0, 1] at theta = {}", g[i]));
            break;
        }
        if gm < prev - 1e-9 {
            bad.push(format!("multiplier decreases at theta = {} ({prev} -> {gm})", g[i]));
            break;
        }
        prev = gm;
    }
    // An end type whose participation binds carries a point mass of the
    // multiplier, so only free ends must reach 0 and 1.
    let free = |j: usize| !sol.gamma_reporting_only[j] && sol.labels[j] != RegionLabel::Matched;
    if (sol.gamma[n - 1] - 1.0).abs() > 1e-9 && free(n - 1) {
        bad.push(format!("multiplier at the top type is {}", sol.gamma[n - 1]));
    }
    if sol.gamma[0].abs() > 1e-9 && free(0) {
        bad.push(format!("multiplier at the bottom type is {}", sol.gamma[0]));
    }

    let ivs = &sol.partition.intervals;
    for w in ivs.windows(2) {
        if w[0].hi != w[1].lo {
            bad.push(format!("partition gap between {} and {}", w[0].hi, w[1].lo));
        }
    }
    let reserved: Vec<_> = sol.partition.of_label(RegionLabel::Reserved).collect();
    if reserved.len() != 1 {
        bad.push(format!("expected one reserved interval, found {}", reserved.len()));
    } else {
        let r = reserved[0];
        if !(r.lo <= 0.0 && 0.0 <= r.hi) {
            bad.push("reserved interval does not contain zero".into());
        }
        if let Some(k) = ivs.iter().position(|i| i.label == RegionLabel::Reserved) {
            for j in [k.checked_sub(1), Some(k + 1)].into_iter().flatten() {
                if let Some(iv) = ivs.get(j) {
                    if iv.label != RegionLabel::FullService {
                        bad.push(format!("interval next to the reserved set is {:?}", iv.label));
                    }
                }
            }
        }
    }
    InvariantReport { violations: bad }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_floor_stays_below() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            let lo = convex_floor(&xs, &ys, t);
            assert!(lo <= t * t + 1e-15, "{t}: {lo}");
            assert!(interp(&xs, &ys, t) >= t * t - 1e-15);
        }
        assert_eq!(convex_floor(&xs, &ys, 0.3), ys[3]);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(123_456_789.123_456), "123456789.123");
    }

    #[test]
    fn partition_merges_and_drops() {
        let p = Partition::from_pieces([
            Interval { lo: -1.0, hi: -0.5, label: RegionLabel::FullService },
            Interval { lo: -0.5, hi: -0.5, label: RegionLabel::Excluded },
            Interval { lo: -0.5, hi: 0.5, label: RegionLabel::Reserved },
            Interval { lo: 0.5, hi: 0.7, label: RegionLabel::FullService },
            Interval { lo: 0.7, hi: 1.0, label: RegionLabel::FullService },
        ]);
        assert_eq!(p.intervals.len(), 3);
        assert_eq!(p.intervals[2].hi, 1.0);
        assert_eq!(p.label_at(0.1), Some(RegionLabel::Reserved));
    }

    #[test]
    fn interpolation_clamps() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 4.0];
        assert_eq!(interp(&xs, &ys, 1.5), 2.5);
        assert_eq!(interp(&xs, &ys, -3.0), 0.0);
        assert_eq!(interp(&xs, &ys, 9.0), 4.0);
    }
}
