//! Projections of arbitrary plans onto bounded and monotone ones.

use crate::game::StageGame;
use crate::plan::PiecewisePlan;

/// Clips every action into the cooperation interval between `a^N` and `a*`.
pub fn bound_plan(game: &StageGame, plan: &PiecewisePlan) -> PiecewisePlan {
    plan.map_actions(|a| game.clamp_cooperative(a))
}

/// Makes cooperation non-increasing toward the deadline.
///
/// Whenever a segment is more cooperative than an earlier one, every segment
/// after the last earlier segment that is at least as cooperative is raised to
/// its level. Plans that are already monotone come back unchanged.
pub fn monotonize_plan(game: &StageGame, plan: &PiecewisePlan) -> PiecewisePlan {
    let mut actions = plan.actions().to_vec();
    let level = |a: f64| game.cooperation_level(a);
    loop {
        let violation = (1..actions.len()).find(|&j| {
            let lj = level(actions[j]);
            actions[..j].iter().any(|&a| level(a) < lj)
        });
        let Some(j) = violation else { break };
        let lj = level(actions[j]);
        let start = actions[..j]
            .iter()
            .rposition(|&a| level(a) >= lj)
            .map_or(0, |i| i + 1);
        let target = actions[j];
        for a in &mut actions[start..j] {
            *a = target;
        }
    }
    plan.with_actions(actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(actions: &[f64]) -> PiecewisePlan {
        let n = actions.len();
        let bps = (0..n).map(|i| -((n - 1 - i) as f64)).collect();
        PiecewisePlan::new(n as f64, bps, actions.to_vec()).unwrap()
    }

    #[test]
    fn raises_dip_to_later_peak() {
        let g = StageGame::continuous_pd();
        let out = monotonize_plan(&g, &plan(&[0.8, 0.3, 0.6]));
        assert_eq!(out.actions(), &[0.8, 0.6, 0.6]);
    }

    #[test]
    fn raises_prefix_when_nothing_earlier_dominates() {
        let g = StageGame::continuous_pd();
        let out = monotonize_plan(&g, &plan(&[0.2, 0.9, 0.5, 0.1]));
        assert_eq!(out.actions(), &[0.9, 0.9, 0.5, 0.1]);
    }

    #[test]
    fn bounding_examples() {
        let pd = StageGame::continuous_pd();
        let out = bound_plan(&pd, &plan(&[1.4, 0.5]));
        assert_eq!(out.actions(), &[1.0, 0.5]);
        let cournot = StageGame::cournot(10.0, 5.0, 1.0).unwrap();
        let out = bound_plan(&cournot, &plan(&[1.0, 1.3, 1.5]));
        assert_eq!(out.actions(), &[1.25, 1.3, 1.5]);
        let bounded = plan(&[1.25, 1.3, 1.5]);
        assert_eq!(bound_plan(&cournot, &bounded), bounded);
    }

    #[test]
    fn monotone_input_is_unchanged() {
        let g = StageGame::continuous_pd();
        let p = plan(&[1.0, 0.7, 0.7, 0.2, 0.0]);
        assert_eq!(monotonize_plan(&g, &p), p);
        let c = StageGame::cournot(10.0, 5.0, 1.0).unwrap();
        let p = plan(&[1.25, 1.4, 1.6]);
        assert_eq!(monotonize_plan(&c, &p), p);
    }
}
