//! Fixed points of the map from outside-option prices to the dealer's quotes.

use serde::{Deserialize, Serialize};

use crate::book::{interp, BookSolution, SpreadReport};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, OutsideFamily, PricePair, Side};
use crate::numerics::find_revisit;
use crate::screening::{solve_cn, CnConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMode {
    /// Each price tracks the dealer's quote on its side.
    BestBidAsk,
    /// Both prices move to the half-difference of the quotes.
    MidQuote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub mode: EquilibriumMode,
    pub pi0: PricePair,
    pub sup_norm_tol: f64,
    pub max_iters: usize,
    pub cycle_window: usize,
    pub cn: CnConfig,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            mode: EquilibriumMode::BestBidAsk,
            pi0: PricePair::default(),
            sup_norm_tol: 1e-5,
            max_iters: 50,
            cycle_window: 8,
            cn: CnConfig::default(),
        }
    }
}

impl EquilibriumConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.sup_norm_tol > 0.0) {
            return Err(Error::Parameter(format!("sup_norm_tol must be positive, got {}", self.sup_norm_tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        self.cn.check()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumStatus {
    Converged,
    CycleDetected,
    MaxIters,
}

/// One solved iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub pi: PricePair,
    pub spread: SpreadReport,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub excluded: Vec<(f64, f64)>,
    pub dealer_profit: f64,
    /// Sup-norm change in realized utility from the previous iterate.
    pub sup_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub iterates: Vec<IterateRecord>,
    pub status: EquilibriumStatus,
    pub pi_star: Option<PricePair>,
    /// Prices revisited when a cycle was detected.
    pub cycle: Vec<PricePair>,
    /// The outside option is monotone in its price, so the order-theoretic
    /// existence argument applies.
    pub monotone_family: bool,
    #[serde(skip)]
    pub final_book: Option<BookSolution>,
}

impl EquilibriumResult {
    /// Number of comparisons between consecutive books.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn write_history_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        use crate::book::fmt_num;
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record([
            "iteration",
            "pi_minus",
            "pi_plus",
            "theta_lo0",
            "theta_hi0",
            "gamma_minus",
            "gamma_plus",
            "excluded_lo",
            "excluded_hi",
            "t_minus",
            "t_plus",
            "dealer_profit",
            "sup_change",
        ])
        .map_err(io)?;
        for (i, r) in self.iterates.iter().enumerate() {
            let (elo, ehi) = match (r.excluded.first(), r.excluded.last()) {
                (Some(a), Some(b)) => (fmt_num(a.0), fmt_num(b.1)),
                _ => (String::new(), String::new()),
            };
            wr.write_record([
                i.to_string(),
                fmt_num(r.pi.minus),
                fmt_num(r.pi.plus),
                fmt_num(r.spread.theta_lo0),
                fmt_num(r.spread.theta_hi0),
                fmt_num(r.gamma_minus),
                fmt_num(r.gamma_plus),
                elo,
                ehi,
                fmt_num(r.spread.t_minus),
                fmt_num(r.spread.t_plus),
                fmt_num(r.dealer_profit),
                r.sup_change.map(fmt_num).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Next price pair under `mode`, leaving price components the outside option
/// ignores untouched.
pub fn next_prices(spec: &ModelSpec, mode: EquilibriumMode, pi: PricePair, spread: &SpreadReport) -> PricePair {
    match mode {
        EquilibriumMode::BestBidAsk => {
            let (dm, dp) = spec.outside.price_dependence();
            PricePair::new(if dm { spread.t_minus } else { pi.minus }, if dp { spread.t_plus } else { pi.plus })
        }
        EquilibriumMode::MidQuote => {
            let m = 0.5 * (spread.t_plus - spread.t_minus);
            PricePair::new(m, m)
        }
    }
}

fn check_price_bound(spec: &ModelSpec, pi: PricePair) -> Result<()> {
    if let OutsideFamily::DarkPoolQuadratic { alpha, p } = spec.outside.family {
        let kappa = spec.outside.kappa;
        if p * pi.plus * pi.plus >= 4.0 * alpha * kappa {
            let bound = if p > 0.0 { 2.0 * (alpha * kappa / p).sqrt() } else { f64::INFINITY };
            return Err(Error::Parameter(format!(
                "dark-pool price {} violates the hard bound |pi| < 2 sqrt(alpha kappa / p) = {bound}",
                pi.plus
            )));
        }
    }
    Ok(())
}

/// Sup-norm distance between realized utilities on a uniform grid of `n` points.
pub fn welfare_distance(a: &BookSolution, b: &BookSolution, n: usize) -> f64 {
    let (lo, hi) = (a.grid[0], *a.grid.last().unwrap());
    let wa = a.welfare();
    let wb = b.welfare();
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|t| (interp(&a.grid, &wa, t) - interp(&b.grid, &wb, t)).abs())
        .fold(0.0, f64::max)
}

fn record(sol: &BookSolution, sup_change: Option<f64>) -> IterateRecord {
    IterateRecord {
        pi: sol.prices,
        spread: sol.spread,
        gamma_minus: sol.side(Side::Negative).gamma,
        gamma_plus: sol.side(Side::Positive).gamma,
        excluded: sol.excluded_intervals(),
        dealer_profit: sol.dealer_profit,
        sup_change,
    }
}

fn history_string(iterates: &[IterateRecord]) -> String {
    iterates.iter().map(|r| format!("({}, {})", r.pi.minus, r.pi.plus)).collect::<Vec<_>>().join(" -> ")
}

/// Iterates the price map from `cfg.pi0` until consecutive books agree.
pub fn iterate_equilibrium(spec: &ModelSpec, cfg: &EquilibriumConfig) -> Result<EquilibriumResult> {
    cfg.check()?;
    let monotone_family = spec.outside.monotone_in_price();
    let mut iterates: Vec<IterateRecord> = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut pi = cfg.pi0;
    let mut prev: Option<BookSolution> = None;
    for i in 0..=cfg.max_iters {
        let solved = check_price_bound(spec, pi).and_then(|_| solve_cn(spec, pi, &cfg.cn));
        let sol = match solved {
            Ok(s) => s,
            Err(e @ Error::Parameter(_)) if i == 0 => return Err(e),
            Err(Error::Parameter(m)) => {
                return Err(Error::Parameter(format!("iterate {i}: {m}; history: {}", history_string(&iterates))))
            }
            Err(e) => {
                return Err(Error::Solver(format!(
                    "iterate {i} at prices ({}, {}) failed: {e}; history: {}",
                    pi.minus,
                    pi.plus,
                    history_string(&iterates)
                )))
            }
        };
        let change = prev.as_ref().map(|p| welfare_distance(p, &sol, cfg.cn.grid_n));
        iterates.push(record(&sol, change));
        history.push(vec![pi.minus, pi.plus]);
        let next = next_prices(spec, cfg.mode, pi, &sol.spread);
        if change.is_some_and(|c| c <= cfg.sup_norm_tol) {
            return Ok(EquilibriumResult {
                iterates,
                status: EquilibriumStatus::Converged,
                pi_star: Some(next),
                cycle: Vec::new(),
                monotone_family,
                final_book: Some(sol),
            });
        }
        // A repeat of the current price is a fixed point, settled by the next solve.
        let earlier = &history[..history.len() - 1];
        if let Some(j) = find_revisit(earlier, &[next.minus, next.plus], cfg.cycle_window, 1e-9) {
            let cycle = history[j..].iter().map(|h| PricePair::new(h[0], h[1])).collect();
            return Ok(EquilibriumResult {
                iterates,
                status: EquilibriumStatus::CycleDetected,
                pi_star: None,
                cycle,
                monotone_family,
                final_book: Some(sol),
            });
        }
        prev = Some(sol);
        pi = next;
    }
    Ok(EquilibriumResult {
        iterates,
        status: EquilibriumStatus::MaxIters,
        pi_star: None,
        cycle: Vec::new(),
        monotone_family,
        final_book: prev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    /// `(pi_plus, t_plus)` pairs in input order.
    pub values: Vec<(f64, f64)>,
    /// Indices `i` with `t_plus[i + 1] < t_plus[i] - tol`.
    pub violations: Vec<usize>,
    /// False when the family itself is not monotone in price; the report is then informational.
    pub family_monotone: bool,
}

/// Evaluates the ask-side quote on a sorted list of ask-side prices.
pub fn check_monotone_map(spec: &ModelSpec, pi_list: &[f64], cfg: &CnConfig) -> Result<MonotoneReport> {
    if pi_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("price list must be sorted".into()));
    }
    let mut values = Vec::with_capacity(pi_list.len());
    for &p in pi_list {
        let pi = PricePair::new(spec.prices.minus, p);
        let sol = solve_cn(spec, pi, cfg)?;
        values.push((p, sol.spread.t_plus));
    }
    let violations = values.windows(2).enumerate().filter(|(_, w)| w[1].1 < w[0].1 - 1e-9).map(|(i, _)| i).collect();
    Ok(MonotoneReport { values, violations, family_monotone: spec.outside.monotone_in_price() })
}
