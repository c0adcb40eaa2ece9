//! Random model generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use screenbook::darkpool::DarkPoolParams;
use screenbook::model::{
    CostSpec, Density, ModelSpec, OutsideFamily, OutsideOption, Poly, PowerSide, PreferenceSpec, PricePair, TypeSpace,
};

/// Uniform types, `u = theta q + c2 q^2`, `C = cost q^2`, and a power-law
/// outside option on each side whose level falls with the price.
pub fn random_power_spec<R: Rng>(rng: &mut R) -> ModelSpec {
    let r = rng.gen_range(0.5..1.5);
    let c2 = rng.gen_range(0.0..0.2);
    let cost = rng.gen_range(0.4..1.0);
    let side = |rng: &mut R| PowerSide {
        a: rng.gen_range(0.1..0.4),
        b: rng.gen_range(0.05..0.3),
        exponent: rng.gen_range(1.1..2.0),
    };
    let negative = side(rng);
    let positive = side(rng);
    let kappa = rng.gen_range(0.001..0.02);
    ModelSpec::new(
        TypeSpace::new(-r, r).unwrap(),
        Density::uniform(-r, r).unwrap(),
        PreferenceSpec { psi1: Poly::new(vec![0.0, 1.0]), psi2: Poly::new(vec![0.0, 0.0, c2]) },
        CostSpec { c: Poly::new(vec![0.0, 0.0, cost]) },
        OutsideOption::new(OutsideFamily::PowerPlus { negative, positive }, kappa).unwrap(),
        PricePair::default(),
        None,
    )
    .unwrap()
}

/// Two price pairs, the second at least as favourable to traders' outside option.
pub fn random_price_pairs<R: Rng>(rng: &mut R) -> (PricePair, PricePair) {
    let hi = PricePair::new(rng.gen_range(0.1..0.5), rng.gen_range(0.1..0.5));
    let lo = PricePair::new(hi.minus * rng.gen_range(0.0..1.0), hi.plus * rng.gen_range(0.0..1.0));
    (hi, lo)
}

/// A dark-pool draw inside the regime where the dealer can match the pool
/// profitably for every type (rejection sampling).
pub fn random_dark_pool<R: Rng>(rng: &mut R) -> (DarkPoolParams, f64) {
    loop {
        let alpha = rng.gen_range(0.5..2.0);
        let beta = rng.gen_range(0.5..2.0);
        let params = DarkPoolParams {
            alpha,
            beta,
            eps: rng.gen_range(0.0..0.5 * alpha),
            p: rng.gen_range(0.05..1.0),
            kappa: rng.gen_range(0.01..0.1),
        };
        let pi = rng.gen_range(-0.5..0.5) * params.price_bound().min(1.0);
        if params.matching_always_profitable(pi) {
            return (params, pi);
        }
    }
}
