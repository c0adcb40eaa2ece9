//! TOML model files. The schema is documented in `docs/model-format.md`.

use std::path::Path;

use serde::Deserialize;

use crate::darkpool::DarkPoolParams;
use crate::equilibrium::{EquilibriumConfig, EquilibriumMode};
use crate::error::{Error, Result};
use crate::model::{
    CostSpec, Density, ModelSpec, OutsideFamily, OutsideOption, Poly, PowerSide, PreferenceSpec, PricePair, TypeSpace,
};
use crate::numerics::MonotoneCubic;
use crate::oracle::OracleConfig;
use crate::screening::CnConfig;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    description: Option<String>,
    quantity_bound: Option<f64>,
    types: Option<TypesSection>,
    density: Option<DensitySection>,
    preferences: Option<PreferencesSection>,
    cost: Option<CostSection>,
    outside: Option<OutsideSection>,
    prices: Option<PricePair>,
    #[serde(default)]
    solver: CnConfig,
    #[serde(default)]
    equilibrium: EquilibriumSection,
    #[serde(default)]
    oracle: OracleConfig,
    darkpool: Option<DarkPoolSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypesSection {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DensitySection {
    Uniform,
    PiecewiseLinear { xs: Vec<f64>, fs: Vec<f64> },
    Tabulated { xs: Vec<f64>, fs: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreferencesSection {
    psi1: Vec<f64>,
    psi2: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    c: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum OutsideSection {
    Trivial,
    PowerPlus {
        #[serde(default)]
        kappa: f64,
        negative: Option<PowerSide>,
        positive: Option<PowerSide>,
    },
    AffinePieces {
        #[serde(default)]
        kappa: f64,
        /// `[slope, intercept]` pairs.
        pieces: Vec<[f64; 2]>,
    },
    DarkPool {
        #[serde(default)]
        kappa: f64,
        alpha: f64,
        p: f64,
    },
    HardExclusion {
        lo: f64,
        hi: f64,
    },
    Tabulated {
        #[serde(default)]
        kappa: f64,
        thetas: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EquilibriumSection {
    mode: EquilibriumMode,
    pi0: PricePair,
    sup_norm_tol: f64,
    max_iters: usize,
    cycle_window: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        let d = EquilibriumConfig::default();
        Self {
            mode: d.mode,
            pi0: d.pi0,
            sup_norm_tol: d.sup_norm_tol,
            max_iters: d.max_iters,
            cycle_window: d.cycle_window,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DarkPoolSection {
    alpha: f64,
    beta: f64,
    #[serde(default)]
    eps: f64,
    p: f64,
    kappa: f64,
    /// Pool price.
    #[serde(default)]
    pi: f64,
}

/// A parsed and validated model file.
#[derive(Debug, Clone)]
pub struct Config {
    pub name: String,
    pub description: Option<String>,
    pub spec: ModelSpec,
    pub solver: CnConfig,
    pub equilibrium: EquilibriumConfig,
    pub oracle: OracleConfig,
    /// Set when the model comes from a `[darkpool]` section.
    pub darkpool: Option<(DarkPoolParams, f64)>,
}

/// Reads and validates a model file.
pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse(&text, &path.display().to_string(), &stem)
}

/// Parses model-file `text`; `origin` prefixes error messages and `fallback_name`
/// is used when the file has no `name`.
pub fn parse(text: &str, origin: &str, fallback_name: &str) -> Result<Config> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {}", e.to_string().trim_end())))?;
    let at = |section: &str, e: Error| {
        let msg = match e {
            Error::Parameter(m) | Error::Config(m) => m,
            other => other.to_string(),
        };
        match section_line(text, section) {
            Some(line) => Error::Config(format!("{origin}:{line}: [{section}] {msg}")),
            None => Error::Config(format!("{origin}: [{section}] {msg}")),
        }
    };
    raw.solver.check().map_err(|e| at("solver", e))?;
    raw.oracle.check().map_err(|e| at("oracle", e))?;

    let (spec, darkpool) = match &raw.darkpool {
        Some(dp) => {
            for (present, section) in [
                (raw.types.is_some(), "types"),
                (raw.density.is_some(), "density"),
                (raw.preferences.is_some(), "preferences"),
                (raw.cost.is_some(), "cost"),
                (raw.outside.is_some(), "outside"),
            ] {
                if present {
                    return Err(at(section, Error::Config("cannot be combined with [darkpool]".into())));
                }
            }
            let params = DarkPoolParams { alpha: dp.alpha, beta: dp.beta, eps: dp.eps, p: dp.p, kappa: dp.kappa };
            params.check_price(dp.pi).map_err(|e| at("darkpool", e))?;
            let spec = params.spec(dp.pi).map_err(|e| at("darkpool", e))?;
            (spec, Some((params, dp.pi)))
        }
        None => (build_spec(&raw, &at)?, None),
    };
    let eq = &raw.equilibrium;
    let equilibrium = EquilibriumConfig {
        mode: eq.mode,
        pi0: eq.pi0,
        sup_norm_tol: eq.sup_norm_tol,
        max_iters: eq.max_iters,
        cycle_window: eq.cycle_window,
        cn: raw.solver.clone(),
    };
    equilibrium.check().map_err(|e| at("equilibrium", e))?;
    Ok(Config {
        name: raw.name.clone().unwrap_or_else(|| fallback_name.to_string()),
        description: raw.description.clone(),
        spec,
        solver: raw.solver.clone(),
        equilibrium,
        oracle: raw.oracle.clone(),
        darkpool,
    })
}

fn build_spec(raw: &RawConfig, at: &dyn Fn(&str, Error) -> Error) -> Result<ModelSpec> {
    let missing = |s: &str| Error::Config(format!("missing section [{s}]"));
    let types = raw.types.as_ref().ok_or_else(|| missing("types"))?;
    let theta = TypeSpace::new(types.lo, types.hi).map_err(|e| at("types", e))?;
    let density = match raw.density.as_ref().ok_or_else(|| missing("density"))? {
        DensitySection::Uniform => Density::uniform(types.lo, types.hi),
        DensitySection::PiecewiseLinear { xs, fs } => Density::piecewise_linear(xs.clone(), fs.clone()),
        DensitySection::Tabulated { xs, fs } => Density::tabulated(xs.clone(), fs.clone()),
    }
    .map_err(|e| at("density", e))?;
    let prefs = raw.preferences.as_ref().ok_or_else(|| missing("preferences"))?;
    let cost = raw.cost.as_ref().ok_or_else(|| missing("cost"))?;
    let outside = match raw.outside.clone().unwrap_or(OutsideSection::Trivial) {
        OutsideSection::Trivial => Ok(OutsideOption::trivial()),
        OutsideSection::PowerPlus { kappa, negative, positive } => OutsideOption::new(
            OutsideFamily::PowerPlus {
                negative: negative.unwrap_or(PowerSide::ZERO),
                positive: positive.unwrap_or(PowerSide::ZERO),
            },
            kappa,
        ),
        OutsideSection::AffinePieces { kappa, pieces } => OutsideOption::new(
            OutsideFamily::AffinePieces { pieces: pieces.iter().map(|p| (p[0], p[1])).collect() },
            kappa,
        ),
        OutsideSection::DarkPool { kappa, alpha, p } => {
            OutsideOption::new(OutsideFamily::DarkPoolQuadratic { alpha, p }, kappa)
        }
        OutsideSection::HardExclusion { lo, hi } => OutsideOption::new(OutsideFamily::HardExclusion { lo, hi }, 0.0),
        OutsideSection::Tabulated { kappa, thetas, values } => MonotoneCubic::new(thetas, values)
            .and_then(|curve| OutsideOption::new(OutsideFamily::Tabulated { curve }, kappa)),
    }
    .map_err(|e| at("outside", e))?;
    ModelSpec::new(
        theta,
        density,
        PreferenceSpec { psi1: Poly::new(prefs.psi1.clone()), psi2: Poly::new(prefs.psi2.clone()) },
        CostSpec { c: Poly::new(cost.c.clone()) },
        outside,
        raw.prices.unwrap_or_default(),
        raw.quantity_bound,
    )
    .map_err(|e| at("preferences", e))
}

/// One-based line of the `[section]` header (or of a dotted sub-table).
fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let t = l.trim();
            t == format!("[{section}]") || t.starts_with(&format!("[{section}."))
        })
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const POWER: &str = r#"
name = "power"

[types]
lo = -1.0
hi = 1.0

[density]
kind = "piecewise_linear"
xs = [-1.0, 0.0, 1.0]
fs = [0.25, 0.75, 0.25]

[preferences]
psi1 = [0.0, 1.0]
psi2 = [0.0, 0.0, 0.25]

[cost]
c = [0.0, 0.0, 0.5]

[outside]
kind = "power_plus"
kappa = 0.001

[outside.positive]
a = 0.3333333333333333
b = 0.3333333333333333
exponent = 1.2

[prices]
minus = 0.0
plus = 0.5

[equilibrium]
mode = "best_bid_ask"
pi0 = { minus = 0.0, plus = 0.5 }
"#;

    #[test]
    fn parses_power_model() {
        let c = parse(POWER, "power.toml", "x").unwrap();
        assert_eq!(c.name, "power");
        assert_eq!(c.spec.prices, PricePair::new(0.0, 0.5));
        assert_eq!(c.spec, crate::presets::tent_power());
        assert_eq!(c.equilibrium.pi0.plus, 0.5);
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let bad = POWER.replace("lo = -1.0", "lo = -1.0.0");
        let e = parse(&bad, "bad.toml", "x").unwrap_err().to_string();
        assert!(e.contains("line 5"), "{e}");
    }

    #[test]
    fn semantic_errors_point_at_the_section() {
        let bad = POWER.replace("hi = 1.0", "hi = -0.5");
        let e = parse(&bad, "bad.toml", "x").unwrap_err().to_string();
        assert!(e.contains("bad.toml:4: [types]"), "{e}");
        let bad = POWER.replace("kappa = 0.001", "kappa = -1.0");
        let e = parse(&bad, "bad.toml", "x").unwrap_err().to_string();
        assert!(e.contains(":20: [outside]"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = POWER.replace("[cost]\n", "[cost]\nfoo = 1\n");
        assert!(parse(&bad, "bad.toml", "x").is_err());
    }

    #[test]
    fn dark_pool_section() {
        let text = "[darkpool]\nalpha = 1.0\nbeta = 1.0\np = 0.3\nkappa = 0.02\n";
        let c = parse(text, "dp.toml", "dp").unwrap();
        assert_eq!(c.name, "dp");
        assert!(c.darkpool.is_some());
        let both = format!("{text}[types]\nlo = -1.0\nhi = 1.0\n");
        assert!(parse(&both, "dp.toml", "dp").is_err());
    }
}
