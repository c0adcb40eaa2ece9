//! Command-line front end.

pub mod reproduce;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::benchmark::{closed_form_check_dp, solve_benchmark, BenchmarkConfig};
use crate::config::{self, Config};
use crate::darkpool::{dp_equilibrium, dp_solve, DarkPoolParams};
use crate::equilibrium::{iterate_equilibrium, EquilibriumMode};
use crate::error::{Error, Result};
use crate::model::{validate, PricePair};
use crate::oracle::{oracle_compare, oracle_solve, CompareTolerances};
use crate::screening::solve_cn;

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for solver failures.
pub const EXIT_SOLVER: i32 = 3;
/// Exit status when reproduced values miss their targets.
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "screenbook", version, about = "Optimal dealer books with trader outside options")]
struct Cli {
    /// Output directory; the SCREENBOOK_OUT environment variable takes precedence.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the number of book grid points.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Override the quadrature tolerance.
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Both prices from the best bid and ask.
    Best,
    /// Both prices from the mid quote.
    Mid,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a model file and run the model checks.
    Validate { config: PathBuf },
    /// Solve the book without outside options.
    SolveBenchmark { config: PathBuf },
    /// Solve the book against the outside option at given prices.
    SolveCn {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        pi_minus: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        pi_plus: Option<f64>,
    },
    /// Iterate prices to a fixed point.
    Equilibrium {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Starting prices as `MINUS,PLUS`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        pi0: Option<PricePair>,
    },
    /// Liquidation next to a dark pool: solve and check against closed forms.
    Darkpool {
        /// Model file with a `[darkpool]` section supplying defaults.
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        /// Pool price (the starting price with `--equilibrium`).
        #[arg(long, allow_hyphen_values = true)]
        pi0: Option<f64>,
        /// Also iterate the mid-quote price map.
        #[arg(long)]
        equilibrium: bool,
    },
    /// Brute-force reference solution, compared with the semi-analytic book.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        pi_minus: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        pi_plus: Option<f64>,
    },
    /// Compare the semi-analytic book with the oracle; exit 4 on failure.
    Compare {
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        pi_minus: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        pi_plus: Option<f64>,
    },
    /// Recompute the worked examples and report achieved against expected values.
    ReproducePaper {
        /// Directory holding the bundled model files.
        #[arg(long)]
        configs: Option<PathBuf>,
        /// Golden summary to check against (or to rewrite with --update-golden).
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Rewrite the golden summary instead of checking it.
        #[arg(long)]
        update_golden: bool,
    },
}

fn parse_pair(s: &str) -> std::result::Result<PricePair, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [m, p] => {
            let m = m.trim().parse::<f64>().map_err(|e| e.to_string())?;
            let p = p.trim().parse::<f64>().map_err(|e| e.to_string())?;
            Ok(PricePair::new(m, p))
        }
        _ => Err(format!("expected MINUS,PLUS, got `{s}`")),
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    config: Option<String>,
    output_dir: String,
    grid_n: Option<usize>,
    quad_tol: Option<f64>,
    deterministic: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let out = std::env::var_os("SCREENBOOK_OUT").map(PathBuf::from).unwrap_or_else(|| cli.out.clone());
    match execute(&cli, &out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<fs::File> {
        let p = self.path(name);
        fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        self.text(name, &(text + "\n"))
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    }
}

fn load(cli: &Cli, path: &Path) -> Result<Config> {
    let mut c = config::load(path)?;
    if let Some(n) = cli.grid_n {
        c.solver.grid_n = n;
    }
    if let Some(t) = cli.quad_tol {
        c.solver.quad_tol = t;
    }
    c.solver.check()?;
    c.equilibrium.cn = c.solver.clone();
    Ok(c)
}

fn prices(c: &Config, minus: Option<f64>, plus: Option<f64>) -> PricePair {
    PricePair::new(minus.unwrap_or(c.spec.prices.minus), plus.unwrap_or(c.spec.prices.plus))
}

fn execute(cli: &Cli, out_dir: &Path) -> Result<i32> {
    let (name, config_path) = match &cli.command {
        Command::Validate { config } => ("validate", Some(config)),
        Command::SolveBenchmark { config } => ("solve-benchmark", Some(config)),
        Command::SolveCn { config, .. } => ("solve-cn", Some(config)),
        Command::Equilibrium { config, .. } => ("equilibrium", Some(config)),
        Command::Darkpool { config, .. } => ("darkpool", config.as_ref()),
        Command::Oracle { config, .. } => ("oracle", Some(config)),
        Command::Compare { config, .. } => ("compare", Some(config)),
        Command::ReproducePaper { configs, .. } => ("reproduce-paper", configs.as_ref()),
    };
    let out = Outputs::new(out_dir)?;
    out.json(
        &format!("manifest_{name}.json"),
        &RunManifest {
            subcommand: name,
            config: config_path.map(|p| p.display().to_string()),
            output_dir: out_dir.display().to_string(),
            grid_n: cli.grid_n,
            quad_tol: cli.quad_tol,
            deterministic: true,
        },
    )?;

    match &cli.command {
        Command::Validate { config } => {
            let c = load(cli, config)?;
            let report = validate(&c.spec, 257)?;
            for check in &report.checks {
                let status = if check.passed { "ok" } else { "FAIL" };
                println!("{status:>4}  {:<28} {:?}  {}", check.name, check.severity, check.detail);
            }
            out.json(&format!("{}_validation.json", c.name), &report)?;
            if report.is_ok() {
                println!("{}: valid", c.name);
                Ok(0)
            } else {
                eprintln!("{}: model checks failed", c.name);
                Ok(EXIT_CONFIG)
            }
        }
        Command::SolveBenchmark { config } => {
            let c = load(cli, config)?;
            let sol = solve_benchmark(&c.spec, &BenchmarkConfig::from(&c.solver))?;
            sol.write_csv(out.create(&format!("{}_benchmark.csv", c.name))?)?;
            out.json(&format!("{}_benchmark.json", c.name), &sol.summary_json())?;
            print_book(&c.name, &sol);
            Ok(0)
        }
        Command::SolveCn { config, pi_minus, pi_plus } => {
            let c = load(cli, config)?;
            let pi = prices(&c, *pi_minus, *pi_plus);
            let sol = solve_cn(&c.spec, pi, &c.solver)?;
            sol.write_csv(out.create(&format!("{}_cn.csv", c.name))?)?;
            out.json(&format!("{}_cn.json", c.name), &sol.summary_json())?;
            print_book(&c.name, &sol);
            Ok(0)
        }
        Command::Equilibrium { config, mode, pi0 } => {
            let c = load(cli, config)?;
            let mut cfg = c.equilibrium.clone();
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Best => EquilibriumMode::BestBidAsk,
                    ModeArg::Mid => EquilibriumMode::MidQuote,
                };
            }
            if let Some(p) = pi0 {
                cfg.pi0 = *p;
            }
            let res = match &c.darkpool {
                Some((params, _)) => dp_equilibrium(params, cfg.pi0.plus, &cfg)?,
                None => iterate_equilibrium(&c.spec, &cfg)?,
            };
            res.write_history_csv(out.create(&format!("{}_equilibrium.csv", c.name))?)?;
            out.json(&format!("{}_equilibrium.json", c.name), &res)?;
            println!("{}: {:?} after {} iterations", c.name, res.status, res.iterations());
            for it in &res.iterates {
                println!(
                    "  pi = ({:.6}, {:.6})  spread = ({:.6}, {:.6})  gamma+ = {:.6}",
                    it.pi.minus, it.pi.plus, it.spread.t_minus, it.spread.t_plus, it.gamma_plus
                );
            }
            if let Some(p) = res.pi_star {
                println!("  pi* = ({:.6}, {:.6})", p.minus, p.plus);
            }
            Ok(0)
        }
        Command::Darkpool { config, alpha, beta, eps, p, kappa, pi0, equilibrium } => {
            let base = match config {
                Some(path) => Some(load(cli, path)?),
                None => None,
            };
            let from_file = base.as_ref().and_then(|c| c.darkpool);
            let need = |v: Option<f64>, file: Option<f64>, flag: &str| {
                v.or(file).ok_or_else(|| Error::Config(format!("--{flag} is required without a [darkpool] model file")))
            };
            let params = DarkPoolParams {
                alpha: need(*alpha, from_file.map(|d| d.0.alpha), "alpha")?,
                beta: need(*beta, from_file.map(|d| d.0.beta), "beta")?,
                eps: eps.or(from_file.map(|d| d.0.eps)).unwrap_or(0.0),
                p: need(*p, from_file.map(|d| d.0.p), "p")?,
                kappa: need(*kappa, from_file.map(|d| d.0.kappa), "kappa")?,
            };
            params.check()?;
            let pi = pi0.or(from_file.map(|d| d.1)).unwrap_or(0.0);
            let name = base.as_ref().map_or("darkpool".to_string(), |c| c.name.clone());
            let solver = base.as_ref().map(|c| c.solver.clone()).unwrap_or_default();
            let (sol, check) = dp_solve(&params, pi, &solver)?;
            let closed = closed_form_check_dp(params.alpha, params.beta, params.eps)?;
            sol.write_csv(out.create(&format!("{name}_darkpool.csv"))?)?;
            out.json(
                &format!("{name}_darkpool.json"),
                &serde_json::json!({ "params": params, "pi": pi, "cross_check": check, "closed_form": closed }),
            )?;
            println!(
                "{name}: spread ({:.6}, {:.6}) vs benchmark ({:.6}, {:.6})",
                check.spread.0, check.spread.1, check.benchmark_spread.0, check.benchmark_spread.1
            );
            println!(
                "  reserved set [{:.6}, {:.6}], quantity slope {:.6}",
                check.theta_lo0, check.theta_hi0, check.q_slope
            );
            if *equilibrium {
                let mut cfg = base.as_ref().map(|c| c.equilibrium.clone()).unwrap_or_default();
                cfg.mode = EquilibriumMode::MidQuote;
                let res = dp_equilibrium(&params, pi, &cfg)?;
                res.write_history_csv(out.create(&format!("{name}_darkpool_equilibrium.csv"))?)?;
                out.json(&format!("{name}_darkpool_equilibrium.json"), &res)?;
                println!("  mid-quote iteration: {:?} after {} iterations", res.status, res.iterations());
            }
            Ok(0)
        }
        Command::Oracle { config, n, pi_minus, pi_plus } | Command::Compare { config, n, pi_minus, pi_plus } => {
            let compare_only = matches!(cli.command, Command::Compare { .. });
            let c = load(cli, config)?;
            let pi = prices(&c, *pi_minus, *pi_plus);
            let mut ocfg = c.oracle.clone();
            if let Some(n) = n {
                ocfg.n_grid = *n;
            }
            let ora = oracle_solve(&c.spec, pi, &ocfg)?;
            let sol = solve_cn(&c.spec, pi, &c.solver)?;
            let cmp = oracle_compare(&sol, &ora, &CompareTolerances::default());
            if compare_only {
                out.json(&format!("{}_compare.json", c.name), &cmp)?;
            } else {
                ora.write_csv(out.create(&format!("{}_oracle.csv", c.name))?)?;
                out.json(
                    &format!("{}_oracle.json", c.name),
                    &serde_json::json!({
                        "n_grid": ora.grid.len(),
                        "objective": ora.objective,
                        "rounds": ora.rounds,
                        "newton_steps": ora.newton_steps,
                        "comparison": cmp,
                    }),
                )?;
            }
            println!(
                "{}: oracle objective {:.9}, semi-analytic {:.9}, sup|dv| = {:.3e}, boundaries within {:.2} steps: {}",
                c.name,
                cmp.objective_oracle,
                cmp.objective_semi,
                cmp.v_sup,
                cmp.boundary_steps,
                if cmp.pass { "pass" } else { "FAIL" }
            );
            Ok(if compare_only && !cmp.pass { EXIT_MISMATCH } else { 0 })
        }
        Command::ReproducePaper { configs, golden, update_golden } => {
            let dir = configs.clone().unwrap_or_else(reproduce::default_configs_dir);
            let report = reproduce::reproduce(&dir, Some(&out.dir))?;
            let table = report.table();
            print!("{table}");
            out.text("reproduce.txt", &table)?;
            let csv = report.to_csv()?;
            out.text("reproduce.csv", &csv)?;
            let golden = golden.clone().unwrap_or_else(|| dir.join("golden").join("reproduce.csv"));
            if *update_golden {
                if let Some(parent) = golden.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&golden, &csv)?;
                println!("golden summary written to {}", golden.display());
            } else if golden.exists() {
                let want = fs::read_to_string(&golden)?;
                if want != csv {
                    eprintln!("reproduced summary differs from {}", golden.display());
                    return Ok(EXIT_MISMATCH);
                }
            }
            Ok(if report.all_pass() { 0 } else { EXIT_MISMATCH })
        }
    }
}

fn print_book(name: &str, sol: &crate::book::BookSolution) {
    println!(
        "{name}: spread ({:.6}, {:.6}), reserved [{:.6}, {:.6}], dealer profit {:.9}",
        sol.spread.t_minus, sol.spread.t_plus, sol.spread.theta_lo0, sol.spread.theta_hi0, sol.dealer_profit
    );
    for iv in &sol.partition.intervals {
        println!("  [{:>10.6}, {:>10.6}]  {}", iv.lo, iv.hi, iv.label.as_str());
    }
}
