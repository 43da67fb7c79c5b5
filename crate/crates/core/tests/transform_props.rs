mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revgame_core::plan::expected_payoff;
use revgame_core::{bound_plan, monotonize_plan, verify_spe};

use common::*;

#[test]
fn transforms_preserve_equilibrium_and_weakly_raise_payoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (game, lambda, k, plan) in random_spe_plans(40, &mut rng) {
        let bounded = bound_plan(&game, &plan);
        let mono = monotonize_plan(&game, &bounded);
        for p in [&bounded, &mono] {
            assert!(verify_spe(&game, p, k, lambda, 400, 1e-6)
                .unwrap()
                .verdict
                .is_pass());
        }
        for j in 1..=20 {
            let h = plan.horizon() * j as f64 / 20.0;
            let v0 = expected_payoff(&game, &plan, lambda, h).unwrap();
            let v1 = expected_payoff(&game, &bounded, lambda, h).unwrap();
            let v2 = expected_payoff(&game, &mono, lambda, h).unwrap();
            assert!(v1 >= v0 - 1e-9 && v2 >= v1 - 1e-9, "h={h}: {v0} {v1} {v2}");
        }
        let levels: Vec<f64> = mono
            .actions()
            .iter()
            .map(|&a| game.cooperation_level(a))
            .collect();
        assert!(levels.windows(2).all(|w| w[1] <= w[0]));
        assert!(levels
            .iter()
            .all(|&l| (0.0..=game.max_cooperation()).contains(&l)));
        assert_eq!(monotonize_plan(&game, &mono), mono);
        assert_eq!(bound_plan(&game, &mono), mono);
    }
}
