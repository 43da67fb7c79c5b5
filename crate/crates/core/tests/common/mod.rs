//! Oracles and generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use revgame_core::game::Orientation;
use revgame_core::plan::{exp_mass, MpcPlan, PiecewisePlan};
use revgame_core::synthesis::choose_slot_count;
use revgame_core::{verify_spe, StageGame};

/// Closed-form PD deviation gain and retaliation loss.
pub fn pd_gain(a: f64) -> f64 {
    a * a
}

pub fn pd_loss(a: f64) -> f64 {
    2.0 * a - a * a
}

/// Closed-form Cournot(10, 5, 1) primitives.
pub fn cournot_gain(q: f64) -> f64 {
    (5.0 - 3.0 * q).powi(2) / 4.0
}

pub fn cournot_loss(q: f64) -> f64 {
    (5.0 - 2.0 * q) * q - 25.0 / 9.0
}

/// Widest cooperation level that stays inside the action space.
fn level_span(game: &StageGame) -> f64 {
    match game.orientation() {
        Orientation::Increasing => game.action_hi() - game.nash_action(),
        Orientation::Decreasing => game.nash_action() - game.action_lo(),
    }
}

/// Random plan on the synthesis slot geometry whose every slot satisfies the
/// incentive constraint at both slot ends. Each cooperation level is drawn
/// uniformly below the most cooperative feasible one, so the result is
/// usually neither monotone nor (for Cournot) bounded by `a*`.
pub fn random_slot_plan<R: Rng>(
    game: &StageGame,
    lambda: f64,
    horizon: f64,
    k: f64,
    rng: &mut R,
) -> PiecewisePlan {
    let c = choose_slot_count(lambda, horizon, k, 0.01, 200);
    let kappa = 1.0 - k;
    let ends: Vec<f64> = (0..=c).map(|n| horizon * kappa.powi(n as i32)).collect();
    let span = level_span(game);
    // dense near the Nash action, where slots close to the deadline live
    let mut levels: Vec<f64> = (0..=200).map(|i| span * i as f64 / 200.0).collect();
    levels.extend((0..160).map(|j| span * 0.5f64.powf(j as f64 / 8.0)));
    let gain = |a: f64| game.deviation_gain(a).unwrap();
    let loss = |a: f64| game.retaliation_loss(a).unwrap();
    let start_ok = |a: f64, n: usize| {
        loss(a) * exp_mass(lambda, ends[n], ends[n - 1]) >= gain(a) * (-lambda * ends[n - 1]).exp()
    };
    let mut pick = |ok: &dyn Fn(f64) -> bool| -> f64 {
        let top = levels
            .iter()
            .copied()
            .filter(|&l| ok(game.action_at_level(l)))
            .fold(0.0, f64::max);
        for _ in 0..50 {
            let a = game.action_at_level(rng.random_range(0.0..=top));
            if ok(a) {
                return a;
            }
        }
        game.action_at_level(top)
    };

    let mut actions = vec![game.nash_action(); c];
    let r_c = ends[c];
    actions[c - 1] = pick(&|a| {
        start_ok(a, c)
            && loss(a) * exp_mass(lambda, kappa * r_c, r_c) >= gain(a) * (-lambda * r_c).exp()
    });
    for n in (1..c).rev() {
        let next = actions[n];
        let r_n = ends[n];
        actions[n - 1] = pick(&|a| {
            start_ok(a, n)
                && loss(next) * exp_mass(lambda, kappa * r_n, r_n)
                    >= gain(a) * (-lambda * r_n).exp()
        });
    }
    let ultimate = actions[c - 1];
    MpcPlan::new(horizon, k, actions, ultimate, 0.0)
        .unwrap()
        .to_piecewise()
}

/// `count` random plans that also pass the grid verifier, alternating between
/// the PD and Cournot(10, 5, 1). Each entry is `(game, lambda, k, plan)`.
pub fn random_spe_plans<R: Rng>(
    count: usize,
    rng: &mut R,
) -> Vec<(StageGame, f64, f64, PiecewisePlan)> {
    let games = [
        StageGame::continuous_pd(),
        StageGame::cournot(10.0, 5.0, 1.0).unwrap(),
    ];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let game = games[out.len() % 2].clone();
        let lambda = rng.random_range(0.5..2.0);
        let horizon = rng.random_range(1.0..30.0);
        let k = rng.random_range(0.2..0.8);
        let plan = random_slot_plan(&game, lambda, horizon, k, rng);
        if verify_spe(&game, &plan, k, lambda, 400, 1e-6)
            .unwrap()
            .verdict
            .is_pass()
        {
            out.push((game, lambda, k, plan));
        }
    }
    out
}

/// Largest grid action in `[0, 1]` (resolution `1 / points`) satisfying the
/// PD recurrence constraint `a^2 <= L(a_next) (e^{lambda tau} - 1)`.
pub fn pd_grid_best(lambda: f64, tau_next: f64, a_next: f64, points: usize) -> f64 {
    let budget = pd_loss(a_next) * (lambda * tau_next).exp_m1();
    (0..=points)
        .map(|i| i as f64 / points as f64)
        .filter(|&a| pd_gain(a) <= budget)
        .fold(0.0, f64::max)
}
