//! Property tests over randomly drawn models.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use screenbook::benchmark::{solve_benchmark, BenchmarkConfig};
use screenbook::book::{check_invariants, welfare_compare, RegionLabel};
use screenbook::model::{PricePair, Side};
use screenbook::numerics::{find_root, isotonic_regression, Pentadiagonal, RootConfig};
use screenbook::presets::{hard_exclusion, mussa_rosen};
use screenbook::screening::{solve_cn, CnConfig};
use screenbook::Error;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn cn_books_satisfy_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = common::random_power_spec(&mut rng);
        let (pi, _) = common::random_price_pairs(&mut rng);
        let sol = match solve_cn(&spec, pi, &CnConfig::default()) {
            Err(Error::Structure(_)) => return Err(TestCaseError::reject("unsupported binding pattern")),
            r => r.unwrap(),
        };
        let rep = check_invariants(&spec, &sol);
        prop_assert!(rep.is_ok(), "seed {seed}: {:?}", rep.violations);
        for (j, &t) in sol.grid.iter().enumerate() {
            let (v, u0) = (sol.v[j], spec.u0(t, pi));
            match sol.labels[j] {
                RegionLabel::Excluded => prop_assert!(v <= u0 + 1e-9, "excluded type {t} prefers the dealer"),
                _ => prop_assert!(v >= u0 - 1e-9, "served type {t} prefers the pool"),
            }
        }
        for side in [Side::Negative, Side::Positive] {
            let g = sol.side(side).gamma;
            prop_assert!((0.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn outside_options_only_help_traders(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = common::random_power_spec(&mut rng);
        let (hi, lo) = common::random_price_pairs(&mut rng);
        let cfg = CnConfig::default();
        let (h, l) = match (solve_cn(&spec, hi, &cfg), solve_cn(&spec, lo, &cfg)) {
            (Ok(h), Ok(l)) => (h, l),
            (Err(Error::Structure(_)), _) | (_, Err(Error::Structure(_))) => {
                return Err(TestCaseError::reject("unsupported binding pattern"))
            }
            (h, l) => { h.unwrap(); l.unwrap(); unreachable!() }
        };
        let bench = solve_benchmark(&spec, &BenchmarkConfig::from(&cfg)).unwrap();
        for (base, other) in [(&bench, &h), (&h, &l)] {
            let d = welfare_compare(base, other, 1e-8).unwrap();
            prop_assert!(d.welfare_dominates, "welfare {:e}", d.welfare_max_violation);
            prop_assert!(d.reserved_included, "reserved {:e}", d.reserved_max_violation);
            prop_assert!(d.spread_narrows, "spread {:e}", d.spread_violation);
        }
        // A binding outside option strictly shrinks the reserved set.
        let gap = bench.grid.iter().zip(&bench.v).map(|(&t, &v)| spec.u0(t, hi) - v).fold(f64::MIN, f64::max);
        if gap > 1e-6 {
            prop_assert!(h.spread.theta_hi0 - h.spread.theta_lo0 < bench.spread.theta_hi0 - bench.spread.theta_lo0);
        }
    }

    #[test]
    fn hard_exclusion_multiplier(r in 0.5f64..2.0, share in 0.05f64..0.95) {
        let r0 = share * r;
        let spec = hard_exclusion(r, r0);
        let sol = solve_cn(&spec, PricePair::default(), &CnConfig::default()).unwrap();
        let want = (r - r0) / (2.0 * r);
        prop_assert!((sol.side(Side::Negative).gamma - want).abs() <= 1e-6);
        prop_assert!((sol.spread.theta_lo0 + r0 / 2.0).abs() <= 1e-6);
    }

    #[test]
    fn mussa_rosen_reserved_set(r in 0.2f64..3.0) {
        let sol = solve_benchmark(&mussa_rosen(r), &BenchmarkConfig::default()).unwrap();
        prop_assert!((sol.spread.theta_lo0 + r / 2.0).abs() <= 1e-8);
        prop_assert!((sol.spread.theta_hi0 - r / 2.0).abs() <= 1e-8);
        let rep = check_invariants(&mussa_rosen(r), &sol);
        prop_assert!(rep.is_ok(), "{:?}", rep.violations);
    }

    #[test]
    fn isotonic_fit_is_monotone_and_mean_preserving(
        pts in prop::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 1..60)
    ) {
        let (ys, ws): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = isotonic_regression(&ys, &ws);
        prop_assert!(fit.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let mean = |v: &[f64]| v.iter().zip(&ws).map(|(a, w)| a * w).sum::<f64>();
        prop_assert!((mean(&fit) - mean(&ys)).abs() <= 1e-9 * (1.0 + mean(&ys).abs()));
    }

    #[test]
    fn pentadiagonal_solve_inverts(diag in prop::collection::vec(1.0f64..4.0, 3..40), off in -0.3f64..0.3) {
        let n = diag.len();
        let mut m = Pentadiagonal::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.add(i, i, d);
            if i + 1 < n { m.add(i, i + 1, off); }
            if i + 2 < n { m.add(i, i + 2, 0.5 * off); }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = m.solve(&b).unwrap();
        for (a, c) in m.mul(&x).iter().zip(&b) {
            prop_assert!((a - c).abs() <= 1e-10);
        }
    }

    #[test]
    fn roots_are_bracketed(c in -0.9f64..0.9) {
        let x = find_root(|x| x * x * x - c, -1.0, 1.0, &RootConfig::default()).unwrap();
        prop_assert!((x * x * x - c).abs() <= 1e-10);
    }
}
