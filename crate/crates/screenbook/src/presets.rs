//! Ready-made models used by the examples, the CLI and the tests.

use crate::model::*;

fn linear_quadratic(
    theta: TypeSpace,
    density: Density,
    psi2: f64,
    outside: OutsideOption,
    prices: PricePair,
) -> ModelSpec {
    ModelSpec::new(
        theta,
        density,
        PreferenceSpec { psi1: Poly::new(vec![0.0, 1.0]), psi2: Poly::new(vec![0.0, 0.0, psi2]) },
        CostSpec { c: Poly::new(vec![0.0, 0.0, 0.5]) },
        outside,
        prices,
        None,
    )
    .expect("preset parameters are valid")
}

/// Uniform types on `[-r, r]`, `u = theta q`, `C = q^2 / 2`, no outside option.
pub fn mussa_rosen(r: f64) -> ModelSpec {
    linear_quadratic(
        TypeSpace::new(-r, r).expect("r > 0"),
        Density::uniform(-r, r).expect("r > 0"),
        0.0,
        OutsideOption::trivial(),
        PricePair::default(),
    )
}

/// Mussa–Rosen types that cannot trade outside `[-r0, r0]` except with the dealer.
pub fn hard_exclusion(r: f64, r0: f64) -> ModelSpec {
    let mut s = mussa_rosen(r);
    s.outside = OutsideOption::new(OutsideFamily::HardExclusion { lo: -r0, hi: r0 }, 0.0).expect("0 < r0 < r");
    s
}

/// Tent density on `[-1, 1]` peaking at zero, `u = theta q + q^2 / 4`, `C = q^2 / 2`.
pub fn tent(outside: OutsideOption, prices: PricePair) -> ModelSpec {
    linear_quadratic(
        TypeSpace::new(-1.0, 1.0).unwrap(),
        Density::piecewise_linear(vec![-1.0, 0.0, 1.0], vec![0.25, 0.75, 0.25]).unwrap(),
        0.25,
        outside,
        prices,
    )
}

pub fn tent_benchmark() -> ModelSpec {
    tent(OutsideOption::trivial(), PricePair::default())
}

/// Tent model whose outside option is a price-sensitive power law on the ask side.
pub fn tent_power_at(pi_plus: f64) -> ModelSpec {
    tent(
        OutsideOption::new(
            OutsideFamily::PowerPlus {
                negative: PowerSide::ZERO,
                positive: PowerSide { a: 1.0 / 3.0, b: 1.0 / 3.0, exponent: 1.2 },
            },
            0.001,
        )
        .unwrap(),
        PricePair::new(0.0, pi_plus),
    )
}

pub fn tent_power() -> ModelSpec {
    tent_power_at(0.5)
}

/// Tent model with a symmetric affine outside option `max(0.975 |theta| - 0.52, 0)`.
pub fn tent_affine() -> ModelSpec {
    tent(
        OutsideOption::new(OutsideFamily::AffinePieces { pieces: vec![(0.975, 0.0), (-0.975, 0.0)] }, 0.52).unwrap(),
        PricePair::default(),
    )
}
