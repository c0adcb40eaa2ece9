//! Randomized liquidation models against their closed forms.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use screenbook::book::check_invariants;
use screenbook::darkpool::dp_solve;
use screenbook::model::Side;
use screenbook::screening::CnConfig;

#[test]
fn random_draws_match_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for draw in 0..20 {
        let (params, pi) = common::random_dark_pool(&mut rng);
        let (sol, ck) = dp_solve(&params, pi, &CnConfig::default()).unwrap_or_else(|e| panic!("draw {draw}: {e}"));
        let ctx = format!("draw {draw}: {params:?} pi = {pi}");
        assert!((sol.spread.theta_lo0 - ck.theta_lo0).abs() <= 1e-6, "{ctx}");
        assert!((sol.spread.theta_hi0 - ck.theta_hi0).abs() <= 1e-6, "{ctx}");
        for (side, paste) in [(Side::Negative, ck.paste_minus), (Side::Positive, ck.paste_plus)] {
            let st = sol.side(side);
            if st.tangent {
                assert!((st.touch_points[0] - paste).abs() <= 1e-6, "{ctx}: {side:?} tangency");
            }
        }
        assert!((ck.q_slope_lo - params.quantity_slope()).abs() <= 1e-6, "{ctx}");
        assert!((ck.q_slope_hi - params.quantity_slope()).abs() <= 1e-6, "{ctx}");
        assert!(ck.contained, "{ctx}: spread {:?} vs {:?}", ck.spread, ck.benchmark_spread);
        let spec = params.spec(pi).unwrap();
        let rep = check_invariants(&spec, &sol);
        assert!(rep.is_ok(), "{ctx}: {:?}", rep.violations);
    }
}
