//! Brute-force reference solver.
//!
//! The type space is discretized and dealer profit is maximized directly over
//! convex indirect-utility vectors with `v(0) = 0` and `v >= max(0, u0)` at
//! every node. Types whose participation binds at a loss are handed to the
//! crossing network at zero cost (the combined cost `min{C, C_c}`). This makes
//! the objective a pointwise maximum; it is handled by fixing the handed-off
//! cells, solving the resulting concave program by a log-barrier Newton method,
//! and updating the set until it repeats.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::book::{fmt_num, BookSolution, RegionLabel};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, PricePair};
use crate::numerics::Pentadiagonal;

/// Nodes within this of a lower bound count as binding.
const BIND_TOL: f64 = 1e-9;
/// Handed-off cells carry an exact penalty `PIN / h` per unit of `v`, far
/// above any marginal gain a neighbouring cell can get from raising `v`, so
/// their nodes sit on the participation bound.
const PIN: f64 = 100.0;
/// Curvature kept on handed-off cells.
const HANDOFF_CURVATURE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Odd number of nodes, so that zero is a node.
    pub n_grid: usize,
    /// Newton steps stop once the predicted increase falls below this.
    pub step_tol: f64,
    /// Budget of Newton steps over the whole run.
    pub max_sweeps: usize,
    /// Budget of hand-off set updates.
    pub max_rounds: usize,
    /// Cells earning less than `-exclusion_tol` are handed off.
    pub exclusion_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { n_grid: 2001, step_tol: 1e-14, max_sweeps: 20_000, max_rounds: 30, exclusion_tol: 1e-10 }
    }
}

impl OracleConfig {
    pub fn with_grid(n_grid: usize) -> Self {
        Self { n_grid, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_grid < 101 || self.n_grid.is_multiple_of(2) {
            return Err(Error::Parameter(format!("oracle grid must be odd and >= 101, got {}", self.n_grid)));
        }
        if !(self.step_tol > 0.0 && self.step_tol < 1e-3) {
            return Err(Error::Parameter(format!("step_tol {} is outside (0, 1e-3)", self.step_tol)));
        }
        if self.max_sweeps == 0 || self.max_rounds == 0 {
            return Err(Error::Parameter("oracle iteration budgets must be positive".into()));
        }
        if !(self.exclusion_tol >= 0.0) {
            return Err(Error::Parameter("exclusion_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
    pub u0: Vec<f64>,
    pub labels: Vec<RegionLabel>,
    /// Discretized dealer profit.
    pub objective: f64,
    pub rounds: usize,
    pub newton_steps: usize,
}

impl OracleSolution {
    pub fn step(&self) -> f64 {
        let n = self.grid.len();
        (self.grid[n - 1] - self.grid[0]) / (n - 1) as f64
    }

    /// Label changes as `(theta, left, right)`, placed midway between nodes.
    pub fn boundaries(&self) -> Vec<(f64, RegionLabel, RegionLabel)> {
        // Runs of equal labels; an interior run of a single node has no width
        // at grid resolution and is folded into the transition around it.
        let mut runs: Vec<(usize, usize, RegionLabel)> = Vec::new();
        for (j, &l) in self.labels.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.2 == l => r.1 = j,
                _ => runs.push((j, j, l)),
            }
        }
        let last = self.labels.len().saturating_sub(1);
        let runs: Vec<_> = runs.into_iter().filter(|r| r.0 == 0 || r.1 == last || r.1 > r.0).collect();
        runs.windows(2)
            .filter(|w| w[0].2 != w[1].2)
            .map(|w| (0.5 * (self.grid[w[0].1] + self.grid[w[1].0]), w[0].2, w[1].2))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["theta", "q", "tau", "v", "u0", "region"]).map_err(io)?;
        for i in 0..self.grid.len() {
            wr.write_record([
                fmt_num(self.grid[i]),
                fmt_num(self.q[i]),
                fmt_num(self.tau[i]),
                fmt_num(self.v[i]),
                fmt_num(self.u0[i]),
                self.labels[i].as_str().to_string(),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// End of the interval around zero on which `u0` stays finite.
fn finite_end(spec: &ModelSpec, pi: PricePair, end: f64) -> f64 {
    let finite = |t: f64| spec.u0(t, pi).is_finite();
    if finite(end) {
        return end;
    }
    let scan = 4096;
    let mut inside = 0.0;
    for i in 1..=scan {
        let t = end * i as f64 / scan as f64;
        if !finite(t) {
            let (mut a, mut b) = (inside, t);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if finite(m) {
                    a = m;
                } else {
                    b = m;
                }
            }
            return a;
        }
        inside = t;
    }
    end
}

/// Net cost `K(s) = Ctilde(psi1^{-1}(s))` and its first two derivatives in the slope.
#[derive(Clone, Copy)]
struct NetCost {
    value: f64,
    d1: f64,
    d2: f64,
}

fn net_cost(spec: &ModelSpec, s: f64) -> Option<NetCost> {
    let q = spec.psi1_inv(s).ok()?;
    let p1 = spec.dpsi1(q);
    if !(p1 > 0.0) {
        return None;
    }
    Some(NetCost { value: spec.ctilde(q), d1: spec.k(q), d2: spec.dk(q) / p1 })
}

/// Discretized program with a fixed hand-off set.
struct Program<'a> {
    spec: &'a ModelSpec,
    grid: Vec<f64>,
    /// Cell widths and midpoints.
    h: Vec<f64>,
    mid: Vec<f64>,
    /// Density mass per cell.
    w: Vec<f64>,
    lower: Vec<f64>,
    zero: usize,
    /// Smallest barrier weight, for cells without mass.
    floor: f64,
}

impl Program<'_> {
    fn cells(&self) -> usize {
        self.h.len()
    }

    fn slope(&self, v: &[f64], k: usize) -> f64 {
        (v[k + 1] - v[k]) / self.h[k]
    }

    /// Per-unit-mass dealer profit on cell `k`.
    fn cell_profit(&self, v: &[f64], k: usize) -> Option<f64> {
        let s = self.slope(v, k);
        let c = net_cost(self.spec, s)?;
        Some(self.mid[k] * s - 0.5 * (v[k] + v[k + 1]) - c.value)
    }

    /// Coefficients `(on theta * s, on the cell average of v, on K(s))`.
    fn weights(&self, k: usize, handed_off: &[bool]) -> (f64, f64, f64) {
        let w = self.w[k];
        if handed_off[k] {
            (0.0, PIN * w / self.h[k], HANDOFF_CURVATURE * w)
        } else {
            (w * self.mid[k], w, w)
        }
    }

    /// Barrier weight of the participation constraint at node `j`, on the
    /// scale of its multiplier so that all slacks shrink alike.
    fn node_weight(&self, j: usize, off: &[bool]) -> f64 {
        let cell = |k: usize| self.weights(k, off).1;
        let w = match j {
            0 => cell(0),
            _ if j == self.grid.len() - 1 => cell(j - 1),
            _ => 0.5 * (cell(j - 1) + cell(j)),
        };
        w.max(self.floor)
    }

    fn convexity_weight(&self, k: usize) -> f64 {
        (0.5 * (self.w[k] + self.w[k + 1])).max(self.floor)
    }

    /// Barrier objective; `None` outside the strict interior.
    fn value(&self, v: &[f64], off: &[bool], mu: f64) -> Option<f64> {
        let mut total = 0.0;
        let mut prev_s = f64::NAN;
        for k in 0..self.cells() {
            let s = self.slope(v, k);
            let c = net_cost(self.spec, s)?;
            let (a, b, kk) = self.weights(k, off);
            total += a * s - b * 0.5 * (v[k] + v[k + 1]) - kk * c.value;
            if k > 0 {
                let gap = s - prev_s;
                if !(gap > 0.0) {
                    return None;
                }
                total += mu * self.convexity_weight(k - 1) * gap.ln();
            }
            prev_s = s;
        }
        for (j, (&vj, &lj)) in v.iter().zip(&self.lower).enumerate() {
            if j == self.zero {
                continue;
            }
            let slack = vj - lj;
            if !(slack > 0.0) {
                return None;
            }
            total += mu * self.node_weight(j, off) * slack.ln();
        }
        total.is_finite().then_some(total)
    }

    /// Gradient and negated Hessian of the barrier objective.
    fn derivatives(&self, v: &[f64], off: &[bool], mu: f64) -> Option<(Vec<f64>, Pentadiagonal)> {
        let n = v.len();
        let mut g = vec![0.0; n];
        let mut m = Pentadiagonal::zeros(n);
        for k in 0..self.cells() {
            let h = self.h[k];
            let s = self.slope(v, k);
            let c = net_cost(self.spec, s)?;
            let (a, b, kk) = self.weights(k, off);
            let ds = (a - kk * c.d1) / h;
            g[k] += -ds - 0.5 * b;
            g[k + 1] += ds - 0.5 * b;
            let curv = kk * c.d2 / (h * h);
            m.add(k, k, curv);
            m.add(k + 1, k + 1, curv);
            m.add(k, k + 1, -curv);
        }
        for k in 0..self.cells().saturating_sub(1) {
            let (h0, h1) = (self.h[k], self.h[k + 1]);
            let gap = self.slope(v, k + 1) - self.slope(v, k);
            let coef = [1.0 / h0, -1.0 / h0 - 1.0 / h1, 1.0 / h1];
            let mw = mu * self.convexity_weight(k);
            for (r, cr) in coef.iter().enumerate() {
                g[k + r] += mw * cr / gap;
                for (c, cc) in coef.iter().enumerate().skip(r) {
                    m.add(k + r, k + c, mw * cr * cc / (gap * gap));
                }
            }
        }
        for j in 0..n {
            if j == self.zero {
                continue;
            }
            let slack = v[j] - self.lower[j];
            let mw = mu * self.node_weight(j, off);
            g[j] += mw / slack;
            m.add(j, j, mw / (slack * slack));
        }
        // Pin the zero type.
        let z = self.zero;
        g[z] = 0.0;
        m.d0[z] = 1.0;
        if z >= 1 {
            m.d1[z - 1] = 0.0;
        }
        if z + 1 < n {
            m.d1[z] = 0.0;
        }
        if z >= 2 {
            m.d2[z - 2] = 0.0;
        }
        if z + 2 < n {
            m.d2[z] = 0.0;
        }
        Some((g, m))
    }

    /// Dealer profit with handed-off cells earning nothing.
    fn objective(&self, v: &[f64], off: &[bool]) -> f64 {
        (0..self.cells())
            .filter(|&k| !off[k])
            .map(|k| self.w[k] * self.cell_profit(v, k).unwrap_or(f64::NEG_INFINITY))
            .sum()
    }

    /// Strictly feasible, strictly convex starting point: the participation
    /// bound lifted by a small share of `A theta^2`.
    fn start(&self) -> Vec<f64> {
        let reach = self.grid[0].abs().max(self.grid[self.grid.len() - 1]);
        let mut a = 0.25 * self.spec.psi1(self.spec.qbar()).abs() / reach;
        for (&t, &l) in self.grid.iter().zip(&self.lower) {
            if t != 0.0 {
                a = a.max(1.5 * l / (t * t));
            }
        }
        let lift = 0.1;
        self.grid.iter().zip(&self.lower).map(|(&t, &l)| (1.0 - lift) * l + lift * a * t * t).collect()
    }

    /// Barrier path for a fixed hand-off set. Returns the solution and the
    /// number of Newton steps taken.
    fn solve(&self, off: &[bool], cfg: &OracleConfig, budget: usize) -> Result<(Vec<f64>, usize)> {
        let mut steps = 0;
        let v = self.solve_from(self.start(), 1e-3, off, cfg, budget, &mut steps)?;
        Ok((v, steps))
    }

    /// Re-solves near a known solution: pulls it slightly toward the strictly
    /// interior start and enters the barrier path late. Falls back to a cold
    /// start when that path stalls.
    fn resolve(&self, near: &[f64], off: &[bool], cfg: &OracleConfig, budget: usize) -> Result<(Vec<f64>, usize)> {
        let mut steps = 0;
        let v0 = near.iter().zip(self.start()).map(|(a, b)| (1.0 - 1e-4) * a + 1e-4 * b).collect();
        match self.solve_from(v0, 1e-7, off, cfg, budget, &mut steps) {
            Ok(v) => Ok((v, steps)),
            Err(Error::Oracle { .. }) if steps < budget => {
                let v = self.solve_from(self.start(), 1e-3, off, cfg, budget, &mut steps)?;
                Ok((v, steps))
            }
            Err(e) => Err(e),
        }
    }

    fn solve_from(
        &self,
        mut v: Vec<f64>,
        mut mu: f64,
        off: &[bool],
        cfg: &OracleConfig,
        budget: usize,
        steps: &mut usize,
    ) -> Result<Vec<f64>> {
        let mass: f64 = self.w.iter().sum();
        let mu_final = 1e-12;
        loop {
            loop {
                if *steps >= budget {
                    return Err(Error::Oracle {
                        message: format!("Newton budget of {} steps exhausted at mu = {mu:e}", cfg.max_sweeps),
                        best_objective: self.objective(&v, off),
                    });
                }
                let (g, m) = self
                    .derivatives(&v, off, mu)
                    .ok_or_else(|| Error::Solver("oracle iterate left the model's quantity range".into()))?;
                let d = match m.solve(&g) {
                    Some(d) => d,
                    None => return Err(Error::Solver("oracle Newton system is not positive definite".into())),
                };
                *steps += 1;
                let decrement: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                if decrement <= 2.0 * cfg.step_tol * mass {
                    break;
                }
                let f0 = self.value(&v, off, mu).expect("iterate is interior");
                let mut t = 1.0;
                let mut moved = false;
                let mut gain = 0.0;
                while t > 1e-14 {
                    let trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                    if let Some(f1) = self.value(&trial, off, mu) {
                        if f1 >= f0 + 0.25 * t * decrement {
                            gain = f1 - f0;
                            v = trial;
                            moved = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !moved || t < 1e-6 || gain <= 1e-14 * (1.0 + f0.abs()) {
                    // Round-off floor: the remaining increase is below
                    // resolution. Far from the path it is a stall instead.
                    if mu <= mu_final && decrement > mass {
                        return Err(Error::Oracle {
                            message: format!("Newton path stalled with decrement {decrement:e}"),
                            best_objective: self.objective(&v, off),
                        });
                    }
                    break;
                }
            }
            if mu <= mu_final {
                return Ok(v);
            }
            mu = (mu * 0.1).max(mu_final);
        }
    }
}

/// Maximizes discretized dealer profit at CN prices `pi`.
pub fn oracle_solve(spec: &ModelSpec, pi: PricePair, cfg: &OracleConfig) -> Result<OracleSolution> {
    cfg.check()?;
    let spec = spec.with_prices(pi);
    crate::screening::ensure_valid(&spec, &crate::screening::CnConfig::default())?;
    let lo = finite_end(&spec, pi, spec.theta.lo);
    let hi = finite_end(&spec, pi, spec.theta.hi);
    let half = (cfg.n_grid - 1) / 2;
    let mut grid: Vec<f64> = (0..half).map(|i| lo * (1.0 - i as f64 / half as f64)).collect();
    grid.extend((0..=half).map(|i| hi * i as f64 / half as f64));
    let zero = half;
    let h: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let mid: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let w: Vec<f64> = mid.iter().zip(&h).map(|(&m, &h)| h * spec.pdf(m)).collect();
    let u0: Vec<f64> = grid.iter().map(|&t| spec.u0(t, pi)).collect();
    let lower: Vec<f64> = u0.iter().map(|u| u.max(0.0)).collect();
    let floor = 1e-9 * w.iter().sum::<f64>() / w.len() as f64;
    let prog = Program { spec: &spec, grid, h, mid, w, lower, zero, floor };

    let cells = prog.cells();
    // Two deterministic starts: everyone served, and everyone with a positive
    // outside option handed off. The first finds wide service, the second
    // small pockets around the reserved set.
    let starts = [vec![false; cells], (0..cells).map(|k| prog.lower[k].max(prog.lower[k + 1]) > 0.0).collect()];
    let mut run: Option<Descent> = None;
    let mut spent = 0;
    let mut last_err = None;
    for off in starts {
        match descend(&prog, off, cfg, cfg.max_sweeps.saturating_sub(spent)) {
            Ok(mut d) => {
                spent += d.steps;
                d.steps = spent;
                let better = run.as_ref().is_none_or(|r| !r.settled || (d.settled && d.objective > r.objective));
                if better {
                    let rounds = run.as_ref().map_or(0, |r| r.rounds);
                    d.rounds += rounds;
                    run = Some(d);
                } else if let Some(r) = run.as_mut() {
                    r.rounds += d.rounds;
                    r.steps = spent;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let run = match (run, last_err) {
        (Some(r), _) => r,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one start"),
    };
    if !run.settled {
        return Err(Error::Oracle {
            message: format!("hand-off set still changing after {} rounds", run.rounds),
            best_objective: run.objective,
        });
    }
    let best = polish(&prog, run, cfg)?;
    Ok(finish(&prog, best.v, u0, best.objective, best.rounds, best.steps))
}

struct Descent {
    objective: f64,
    v: Vec<f64>,
    off: Vec<bool>,
    rounds: usize,
    steps: usize,
    settled: bool,
}

/// Alternates between solving with a fixed hand-off set and re-deriving the
/// set from the cells that lose money, until the set repeats.
fn descend(prog: &Program, mut off: Vec<bool>, cfg: &OracleConfig, budget: usize) -> Result<Descent> {
    let cells = prog.cells();
    let mut seen: Vec<Vec<bool>> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<bool>)> = None;
    let mut steps = 0;
    let mut rounds = 0;
    let mut settled = false;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let (v, used) = prog.solve(&off, cfg, budget.saturating_sub(steps))?;
        steps += used;
        let obj = prog.objective(&v, &off);
        let next: Vec<bool> =
            (0..cells).map(|k| prog.cell_profit(&v, k).is_none_or(|p| p < -cfg.exclusion_tol)).collect();
        if best.as_ref().is_none_or(|b| obj > b.0) {
            best = Some((obj, v, off.clone()));
        }
        seen.push(off);
        // A repeat (including a cycle) ends the descent at the best set visited.
        if seen.contains(&next) {
            settled = true;
            break;
        }
        off = next;
    }
    let (objective, v, off) = best.expect("at least one round");
    Ok(Descent { objective, v, off, rounds, steps, settled })
}

/// Maximal runs `[start, end)` of handed-off cells.
fn runs(off: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < off.len() {
        if off[k] {
            let start = k;
            while k < off.len() && off[k] {
                k += 1;
            }
            out.push((start, k));
        } else {
            k += 1;
        }
    }
    out
}

/// The update rule judges cells one at a time and can stall short of the best
/// set; shift run ends while that helps, doubling the stride after each gain
/// and halving it after each miss.
fn polish(prog: &Program, mut cur: Descent, cfg: &OracleConfig) -> Result<Descent> {
    let cells = prog.cells() as isize;
    // Tries setting `count` cells from `k` in direction `dir` to `hand_off`.
    let attempt = |cur: &mut Descent, k: isize, dir: isize, count: isize, hand_off: bool| -> Result<bool> {
        let mut off = cur.off.clone();
        for i in 0..count {
            let c = k + dir * i;
            if c < 0 || c >= cells || off[c as usize] == hand_off {
                return Ok(false);
            }
            off[c as usize] = hand_off;
        }
        let budget = cfg.max_sweeps.saturating_sub(cur.steps);
        if budget == 0 {
            return Err(Error::Oracle {
                message: format!("Newton budget of {} steps exhausted while polishing", cfg.max_sweeps),
                best_objective: cur.objective,
            });
        }
        let (v, used) = match prog.resolve(&cur.v, &off, cfg, budget) {
            Ok(r) => r,
            Err(Error::Oracle { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        cur.steps += used;
        cur.rounds += 1;
        let obj = prog.objective(&v, &off);
        if obj > cur.objective + 1e-15 {
            cur.objective = obj;
            cur.v = v;
            cur.off = off;
            return Ok(true);
        }
        Ok(false)
    };
    loop {
        let mut improved = false;
        'moves: for (a, b) in runs(&cur.off) {
            let (a, b) = (a as isize, b as isize);
            let moves = [(a, 1, false), (b - 1, -1, false), (a - 1, -1, true), (b, 1, true)];
            for (k, dir, hand_off) in moves {
                if !attempt(&mut cur, k, dir, 1, hand_off)? {
                    continue;
                }
                let mut next = k + dir;
                let mut stride = 2;
                while stride >= 1 {
                    if attempt(&mut cur, next, dir, stride, hand_off)? {
                        next += dir * stride;
                        stride *= 2;
                    } else {
                        stride /= 2;
                    }
                }
                improved = true;
                break 'moves;
            }
        }
        if !improved {
            return Ok(cur);
        }
    }
}

fn finish(
    prog: &Program,
    v: Vec<f64>,
    u0: Vec<f64>,
    objective: f64,
    rounds: usize,
    newton_steps: usize,
) -> OracleSolution {
    let spec = prog.spec;
    let n = v.len();
    let slopes: Vec<f64> = (0..prog.cells()).map(|k| prog.slope(&v, k)).collect();
    let mut q = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let s = match j {
            0 => slopes[0],
            _ if j == n - 1 => slopes[n - 2],
            _ => 0.5 * (slopes[j - 1] + slopes[j]),
        };
        let qj = spec.psi1_inv(s).unwrap_or(f64::NAN);
        let t = prog.grid[j];
        let tj = spec.utility(t, qj) - v[j];
        let label = if v[j].abs() <= BIND_TOL {
            RegionLabel::Reserved
        } else if v[j] - u0[j] <= BIND_TOL {
            if tj - spec.cost(qj) >= -BIND_TOL {
                RegionLabel::Matched
            } else {
                RegionLabel::Excluded
            }
        } else {
            RegionLabel::FullService
        };
        q.push(qj);
        tau.push(tj);
        labels.push(label);
    }
    OracleSolution { grid: prog.grid.clone(), v, q, tau, u0, labels, objective, rounds, newton_steps }
}

/// Pass/fail thresholds for [`oracle_compare`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareTolerances {
    pub v_sup: f64,
    /// Relative objective gap.
    pub objective_rel: f64,
    /// Partition boundaries may differ by this many oracle grid steps.
    pub boundary_steps: f64,
}

impl Default for CompareTolerances {
    fn default() -> Self {
        Self { v_sup: 5e-3, objective_rel: 1e-4, boundary_steps: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryMatch {
    pub theta: f64,
    pub left: RegionLabel,
    pub right: RegionLabel,
    /// Distance to the nearest oracle boundary with the same labels, in grid steps.
    pub steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    /// Sup-norm of realized utility differences over the oracle grid.
    pub v_sup: f64,
    pub v_sup_at: f64,
    pub objective_semi: f64,
    pub objective_oracle: f64,
    /// Oracle minus semi-analytic profit.
    pub objective_gap: f64,
    pub relative_gap: f64,
    pub boundaries: Vec<BoundaryMatch>,
    pub boundary_steps: f64,
    pub pass_v: bool,
    pub pass_objective: bool,
    pub pass_partition: bool,
    pub pass: bool,
}

/// Compares a semi-analytic book with an oracle solution on the oracle grid.
pub fn oracle_compare(sol: &BookSolution, ora: &OracleSolution, tol: &CompareTolerances) -> OracleComparison {
    let welfare = sol.welfare();
    let mut v_sup = 0.0;
    let mut v_sup_at = 0.0;
    for (&t, &v) in ora.grid.iter().zip(&ora.v) {
        let d = (crate::book::interp(&sol.grid, &welfare, t) - v).abs();
        if d > v_sup || d.is_nan() {
            v_sup = d;
            v_sup_at = t;
        }
    }
    let h = ora.step();
    let (lo, hi) = (ora.grid[0], ora.grid[ora.grid.len() - 1]);
    let found = ora.boundaries();
    let boundaries: Vec<BoundaryMatch> = sol
        .partition
        .intervals
        .windows(2)
        .map(|w| (w[0].hi, w[0].label, w[1].label))
        .filter(|&(t, _, _)| t > lo + h && t < hi - h)
        .map(|(theta, left, right)| {
            let steps = found
                .iter()
                .filter(|b| b.1 == left && b.2 == right)
                .map(|b| (b.0 - theta).abs() / h)
                .fold(f64::INFINITY, f64::min);
            BoundaryMatch { theta, left, right, steps }
        })
        .collect();
    let boundary_steps = boundaries.iter().map(|b| b.steps).fold(0.0, f64::max);
    let objective_gap = ora.objective - sol.dealer_profit;
    let relative_gap = objective_gap.abs() / sol.dealer_profit.abs().max(f64::MIN_POSITIVE);
    let pass_v = v_sup <= tol.v_sup;
    let pass_objective = relative_gap <= tol.objective_rel;
    let pass_partition = boundary_steps <= tol.boundary_steps;
    OracleComparison {
        v_sup,
        v_sup_at,
        objective_semi: sol.dealer_profit,
        objective_oracle: ora.objective,
        objective_gap,
        relative_gap,
        boundaries,
        boundary_steps,
        pass_v,
        pass_objective,
        pass_partition,
        pass: pass_v && pass_objective && pass_partition,
    }
}

/// Reserved-set ends of an oracle solution, if the reserved set is a single run of nodes.
pub fn oracle_reserved(ora: &OracleSolution) -> Option<(f64, f64)> {
    let idx: Vec<usize> = (0..ora.labels.len()).filter(|&j| ora.labels[j] == RegionLabel::Reserved).collect();
    let (&a, &b) = (idx.first()?, idx.last()?);
    (b - a + 1 == idx.len()).then(|| (ora.grid[a], ora.grid[b]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{solve_benchmark, BenchmarkConfig};
    use crate::presets::*;
    use crate::screening::{solve_cn, CnConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mussa_rosen_closed_form() {
        let spec = mussa_rosen(1.0);
        let ora = oracle_solve(&spec, PricePair::default(), &OracleConfig::with_grid(401)).unwrap();
        let h = ora.step();
        for (&t, &v) in ora.grid.iter().zip(&ora.v) {
            let want = if t.abs() > 0.5 { (t.abs() - 0.5).powi(2) } else { 0.0 };
            assert_abs_diff_eq!(v, want, epsilon = 2.0 * h);
        }
        let (a, b) = oracle_reserved(&ora).unwrap();
        assert!((a + 0.5).abs() <= 2.0 * h && (b - 0.5).abs() <= 2.0 * h, "{a} {b}");
        assert_abs_diff_eq!(ora.objective, 1.0 / 12.0, epsilon = 1e-5);
    }

    #[test]
    fn tent_benchmark_agrees() {
        let spec = tent_benchmark();
        let sol = solve_benchmark(&spec, &BenchmarkConfig::default()).unwrap();
        let ora = oracle_solve(&spec, PricePair::default(), &OracleConfig::default()).unwrap();
        let (a, b) = oracle_reserved(&ora).unwrap();
        let r = 1.0 - 1.0 / 3f64.sqrt();
        assert!((a + r).abs() <= 2.0 * ora.step() && (b - r).abs() <= 2.0 * ora.step(), "{a} {b}");
        let cmp = oracle_compare(&sol, &ora, &CompareTolerances::default());
        assert!(cmp.pass, "{cmp:?}");
    }

    #[test]
    fn affine_option_excludes_nobody() {
        let spec = tent_affine();
        let ora = oracle_solve(&spec, spec.prices, &OracleConfig::default()).unwrap();
        assert!(!ora.labels.contains(&RegionLabel::Excluded));
        assert!(ora.labels.contains(&RegionLabel::Matched));
        let sol = solve_cn(&spec, spec.prices, &CnConfig::default()).unwrap();
        let cmp = oracle_compare(&sol, &ora, &CompareTolerances::default());
        assert!(cmp.pass_v && cmp.pass_objective, "{cmp:?}");
    }

    #[test]
    fn power_option_agrees() {
        let spec = tent_power();
        let ora = oracle_solve(&spec, spec.prices, &OracleConfig::default()).unwrap();
        let sol = solve_cn(&spec, spec.prices, &CnConfig::default()).unwrap();
        let cmp = oracle_compare(&sol, &ora, &CompareTolerances::default());
        assert!(cmp.pass_v, "{cmp:?}");
        assert!(ora.labels.contains(&RegionLabel::Excluded));
    }

    #[test]
    fn identical_inputs_have_no_gap() {
        let spec = mussa_rosen(1.0);
        let ora = oracle_solve(&spec, PricePair::default(), &OracleConfig::with_grid(201)).unwrap();
        let cmp = oracle_compare(&as_book(&ora), &ora, &CompareTolerances::default());
        assert_eq!(cmp.v_sup, 0.0);
        assert_eq!(cmp.objective_gap, 0.0);
        assert_eq!(cmp.boundary_steps, 0.0);
    }

    #[test]
    fn single_node_runs_are_folded() {
        use RegionLabel::*;
        let labels =
            vec![Reserved, Reserved, FullService, FullService, Excluded, Excluded, Matched, FullService, FullService];
        let n = labels.len();
        let ora = OracleSolution {
            grid: (0..n).map(|j| j as f64).collect(),
            v: vec![0.0; n],
            q: vec![0.0; n],
            tau: vec![0.0; n],
            u0: vec![0.0; n],
            labels,
            objective: 0.0,
            rounds: 0,
            newton_steps: 0,
        };
        assert_eq!(
            ora.boundaries(),
            vec![(1.5, Reserved, FullService), (3.5, FullService, Excluded), (6.0, Excluded, FullService)]
        );
    }

    fn as_book(ora: &OracleSolution) -> BookSolution {
        let spec = mussa_rosen(1.0);
        let mut sol = solve_benchmark(&spec, &BenchmarkConfig::default()).unwrap();
        sol.grid = ora.grid.clone();
        sol.v = ora.v.clone();
        sol.u0 = ora.u0.clone();
        sol.dealer_profit = ora.objective;
        let pieces = ora.labels.iter().enumerate().map(|(j, &label)| crate::book::Interval {
            lo: if j == 0 { ora.grid[0] } else { 0.5 * (ora.grid[j - 1] + ora.grid[j]) },
            hi: if j + 1 == ora.grid.len() { ora.grid[j] } else { 0.5 * (ora.grid[j] + ora.grid[j + 1]) },
            label,
        });
        sol.partition = crate::book::Partition::from_pieces(pieces);
        sol
    }
}
