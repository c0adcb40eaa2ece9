//! Recomputes the worked examples from the bundled model files and lines the
//! results up against their published values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::benchmark::{closed_form_check_dp, solve_benchmark, BenchmarkConfig};
use crate::book::{fmt_num, BookSolution};
use crate::config::{self, Config};
use crate::darkpool::dp_solve;
use crate::equilibrium::iterate_equilibrium;
use crate::error::{Error, Result};
use crate::model::Side;
use crate::screening::solve_cn;

/// One reproduced quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub case: String,
    pub quantity: String,
    pub expected: f64,
    pub achieved: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
}

impl Report {
    fn check(&mut self, case: &str, quantity: &str, expected: f64, achieved: f64, tolerance: f64) {
        let pass = achieved.is_finite() && (achieved - expected).abs() <= tolerance;
        self.rows.push(Row { case: case.into(), quantity: quantity.into(), expected, achieved, tolerance, pass });
    }

    fn flag(&mut self, case: &str, quantity: &str, holds: bool) {
        self.check(case, quantity, 1.0, if holds { 1.0 } else { 0.0 }, 0.0);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Fixed-width table of achieved against expected values.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:<30} {:>14} {:>14} {:>10}  result",
            "case", "quantity", "expected", "achieved", "tolerance"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<22} {:<30} {:>14.6} {:>14.6} {:>10.1e}  {}",
                r.case,
                r.quantity,
                r.expected,
                r.achieved,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        let _ = writeln!(s, "{} of {} checks passed", self.rows.len() - failed, self.rows.len());
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["case", "quantity", "expected", "achieved", "tolerance", "pass"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                r.quantity.clone(),
                fmt_num(r.expected),
                fmt_num(r.achieved),
                fmt_num(r.tolerance),
                r.pass.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `./configs` when present, otherwise the directory bundled with the sources.
pub fn default_configs_dir() -> PathBuf {
    let local = PathBuf::from("configs");
    if local.is_dir() {
        local
    } else {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }
}

fn load(dir: &Path, file: &str) -> Result<Config> {
    config::load(&dir.join(file))
}

fn emit(out: Option<&Path>, name: &str, sol: &BookSolution) -> Result<()> {
    if let Some(dir) = out {
        let p = dir.join(format!("{name}_book.csv"));
        sol.write_csv(fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)?;
    }
    Ok(())
}

/// Largest deviation of the reported multiplier from `1/2 + theta` on the reserved set.
fn reserved_multiplier_gap(sol: &BookSolution) -> f64 {
    sol.grid
        .iter()
        .zip(&sol.gamma)
        .filter(|(&t, _)| t >= sol.spread.theta_lo0 && t <= sol.spread.theta_hi0)
        .map(|(&t, &g)| (g - (0.5 + t)).abs())
        .fold(0.0, f64::max)
}

/// Runs every case; book curves go to `out` when given.
pub fn reproduce(configs: &Path, out: Option<&Path>) -> Result<Report> {
    let mut rep = Report::default();

    let c = load(configs, "mussa_rosen.toml")?;
    let sol = solve_cn(&c.spec, c.spec.prices, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let case = "uniform-quadratic";
    rep.check(case, "theta_lo0", -0.5, sol.spread.theta_lo0, 1e-8);
    rep.check(case, "theta_hi0", 0.5, sol.spread.theta_hi0, 1e-8);
    rep.check(case, "t_minus", -1.0, sol.spread.t_minus, 1e-8);
    rep.check(case, "t_plus", 1.0, sol.spread.t_plus, 1e-8);
    rep.check(case, "multiplier - (1/2 + theta)", 0.0, reserved_multiplier_gap(&sol), 1e-8);

    let c = load(configs, "tent_density.toml")?;
    let sol = solve_cn(&c.spec, c.spec.prices, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let bench = sol.clone();
    let case = "tent density";
    rep.check(case, "theta_lo0", -0.4226, sol.spread.theta_lo0, 1e-3);
    rep.check(case, "theta_hi0", 0.4226, sol.spread.theta_hi0, 1e-3);
    rep.check(case, "t_minus", -1.359, sol.spread.t_minus, 5e-3);
    rep.check(case, "t_plus", 1.359, sol.spread.t_plus, 5e-3);

    let c = load(configs, "tent_affine_option.toml")?;
    let sol = solve_cn(&c.spec, c.spec.prices, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let case = "affine option";
    let (neg, pos) = (sol.side(Side::Negative), sol.side(Side::Positive));
    rep.check(case, "t_minus", -1.282, sol.spread.t_minus, 5e-3);
    rep.check(case, "t_plus", 1.282, sol.spread.t_plus, 5e-3);
    rep.check(case, "multiplier (bid side)", 0.030, neg.gamma, 2e-3);
    rep.check(case, "multiplier (ask side)", 0.970, pos.gamma, 2e-3);
    rep.check(case, "tangency (bid side)", -0.675, neg.touch_points.first().copied().unwrap_or(f64::NAN), 5e-3);
    rep.check(case, "tangency (ask side)", 0.675, pos.touch_points.first().copied().unwrap_or(f64::NAN), 5e-3);
    rep.check(case, "excluded intervals", 0.0, sol.excluded_intervals().len() as f64, 0.0);

    let c = load(configs, "hard_exclusion.toml")?;
    let sol = solve_cn(&c.spec, c.spec.prices, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let case = "hard exclusion";
    rep.check(case, "multiplier (bid side)", 0.25, sol.side(Side::Negative).gamma, 1e-6);
    rep.check(case, "multiplier (ask side)", 0.75, sol.side(Side::Positive).gamma, 1e-6);
    rep.check(case, "theta_lo0", -0.25, sol.spread.theta_lo0, 1e-6);

    let c = load(configs, "tent_power_option.toml")?;
    let sol = solve_cn(&c.spec, c.spec.prices, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let case = "power option";
    let pos = sol.side(Side::Positive);
    let ex = sol.excluded_intervals();
    rep.check(case, "theta_hi0", 0.007, sol.spread.theta_hi0, 1e-3);
    rep.check(case, "multiplier (ask side)", 0.5105, pos.gamma, 1e-3);
    rep.check(case, "first crossing", 0.0159, pos.touch_points.first().copied().unwrap_or(f64::NAN), 1e-3);
    rep.check(case, "excluded lo", 0.0159, ex.first().map_or(f64::NAN, |e| e.0), 1e-3);
    rep.check(case, "excluded hi", 0.1667, ex.first().map_or(f64::NAN, |e| e.1), 1e-3);
    rep.check(case, "exit", 0.4761, pos.exit.unwrap_or(f64::NAN), 1e-3);
    rep.check(case, "t_plus", 0.0281, sol.spread.t_plus, 1e-3);
    rep.check(case, "t_minus - benchmark", 0.0, sol.spread.t_minus - bench.spread.t_minus, 1e-9);

    let res = iterate_equilibrium(&c.spec, &c.equilibrium)?;
    if let Some(dir) = out {
        let p = dir.join(format!("{}_iterates.csv", c.name));
        res.write_history_csv(fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)?;
    }
    // (ask price, theta_lo0, theta_hi0, ask multiplier, excluded lo, excluded hi)
    let table = [
        (0.5, -0.423, 0.0070, 0.5105, 0.0159, 0.1667),
        (0.0281, -0.423, 0.0040, 0.5061, 0.0083, 0.4872),
        (0.0161, -0.423, 0.0040, 0.5060, 0.0082, 0.4954),
        (0.0158, -0.423, 0.0040, 0.5060, 0.0082, 0.4955),
    ];
    for (k, row) in table.iter().enumerate() {
        let case = format!("price iterate {}", k + 1);
        let Some(it) = res.iterates.get(k) else {
            rep.check(&case, "iterate present", 1.0, 0.0, 0.0);
            continue;
        };
        let ex = it.excluded.first().copied().unwrap_or((f64::NAN, f64::NAN));
        rep.check(&case, "ask price", row.0, it.pi.plus, 1e-3);
        rep.check(&case, "theta_lo0", row.1, it.spread.theta_lo0, 1e-3);
        rep.check(&case, "theta_hi0", row.2, it.spread.theta_hi0, 1e-3);
        rep.check(&case, "multiplier (ask side)", row.3, it.gamma_plus, 1e-3);
        rep.check(&case, "excluded lo", row.4, ex.0, 1e-3);
        rep.check(&case, "excluded hi", row.5, ex.1, 1e-3);
    }
    let case = "price fixed point";
    rep.check(case, "iterations to tolerance", 4.0, res.iterations() as f64, 1.0);
    let star = res.pi_star.map_or((f64::NAN, f64::NAN), |p| (p.minus, p.plus));
    rep.check(case, "bid price", 0.0, star.0, 1e-3);
    rep.check(case, "ask price", 0.015, star.1, 1e-3);

    let c = load(configs, "dark_pool.toml")?;
    let (params, pi) = c.darkpool.ok_or_else(|| Error::Config("dark_pool.toml has no [darkpool] section".into()))?;
    let closed = closed_form_check_dp(params.alpha, params.beta, params.eps)?;
    let spec = params.spec(pi)?;
    let base = solve_benchmark(&spec, &BenchmarkConfig::from(&c.solver))?;
    let case = "liquidation, no pool";
    rep.check(case, "theta_lo0", closed.theta_lo0, base.spread.theta_lo0, 1e-6);
    rep.check(case, "theta_hi0", closed.theta_hi0, base.spread.theta_hi0, 1e-6);
    rep.check(case, "t_minus", closed.spread.0, base.spread.t_minus, 1e-6);
    rep.check(case, "t_plus", closed.spread.1, base.spread.t_plus, 1e-6);
    let (sol, chk) = dp_solve(&params, pi, &c.solver)?;
    emit(out, &c.name, &sol)?;
    let case = "liquidation with pool";
    rep.check(case, "theta_lo0", chk.theta_lo0, sol.spread.theta_lo0, 1e-6);
    rep.check(case, "theta_hi0", chk.theta_hi0, sol.spread.theta_hi0, 1e-6);
    rep.check(case, "quantity slope (bid side)", params.quantity_slope(), chk.q_slope_lo, 1e-6);
    rep.check(case, "quantity slope (ask side)", params.quantity_slope(), chk.q_slope_hi, 1e-6);
    rep.flag(case, "spread inside benchmark", chk.contained);

    Ok(rep)
}
