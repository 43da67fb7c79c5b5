use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{ErrorModel, SimConfig, StrategyKind, COMPLIANCE_TOL};
use crate::game::StageGame;

/// Revision-opportunity times in `(-T, 0]`, strictly increasing.
pub fn sample_revision_times<R: Rng + ?Sized>(lambda: f64, horizon: f64, rng: &mut R) -> Vec<f64> {
    let gap = Exp::new(lambda).expect("lambda must be positive");
    let mut times = Vec::new();
    let mut now = -horizon;
    loop {
        now += gap.sample(rng);
        if now > 0.0 {
            break;
        }
        if now > -horizon {
            times.push(now);
        }
    }
    times
}

/// One revision opportunity as seen by both players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Calendar time of the opportunity.
    pub time: f64,
    /// Action each player intended to play.
    pub prescribed: [f64; 2],
    /// Action actually played.
    pub realized: [f64; 2],
    /// Each player's plan action `x(t)` at this time.
    pub plan_action: [f64; 2],
    pub in_window: [bool; 2],
    pub erred: [bool; 2],
    /// Whether this opportunity opened a retaliation window for the player.
    pub triggered: [bool; 2],
    /// Calendar time the player's window ends after this opportunity.
    pub retaliation_until: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub payoffs: [f64; 2],
    pub final_actions: [f64; 2],
    pub opportunities: usize,
    /// Retaliation windows opened, summed over players.
    pub triggers: usize,
    /// Empty unless tracing was requested.
    pub trace: Vec<TraceStep>,
}

/// Plays one game under `config` with the given RNG.
pub fn run_episode<R: Rng + ?Sized>(
    game: &StageGame,
    config: &SimConfig,
    rng: &mut R,
    record_trace: bool,
) -> Episode {
    let times = sample_revision_times(config.lambda, config.horizon, rng);
    let agents = &config.agents;
    let mut standing = [0, 1].map(|i| agents[i].plan.action_at(config.horizon));
    let mut until: [Option<f64>; 2] = [None, None];
    let mut injected = config.injected_deviation;
    let mut triggers = 0;
    let mut trace = Vec::new();

    for &time in &times {
        let t = -time;
        let plan_action = [0, 1].map(|i| agents[i].plan.action_at(t));
        let in_window = [0, 1].map(|i| until[i].is_some_and(|end| time <= end));
        let prescribed = [0, 1].map(|i| {
            if in_window[i] {
                game.nash_action()
            } else {
                plan_action[i]
            }
        });
        let mut realized = prescribed;
        let mut erred = [false; 2];
        for i in 0..2 {
            if config.error_rate > 0.0 && rng.random::<f64>() < config.error_rate {
                erred[i] = true;
                realized[i] = match config.error_model {
                    ErrorModel::UniformRandom => {
                        rng.random_range(game.action_lo()..=game.action_hi())
                    }
                    ErrorModel::Defect => game.nash_action(),
                };
            }
        }
        if let Some(d) = injected {
            if time > d.after_time {
                realized[d.player] = d.action;
                injected = None;
            }
        }

        let mut triggered = [false; 2];
        for i in 0..2 {
            if in_window[i] || agents[i].kind == StrategyKind::Constant {
                continue;
            }
            let expected = plan_action[i];
            if realized
                .iter()
                .any(|&a| (a - expected).abs() > COMPLIANCE_TOL)
            {
                triggered[i] = true;
                triggers += 1;
                until[i] = Some(match agents[i].kind {
                    StrategyKind::Lr => time + agents[i].k * t,
                    _ => 0.0,
                });
            }
        }
        standing = realized;
        if record_trace {
            trace.push(TraceStep {
                time,
                prescribed,
                realized,
                plan_action,
                in_window,
                erred,
                triggered,
                retaliation_until: until,
            });
        }
    }

    Episode {
        payoffs: [
            game.payoff(standing[0], standing[1]),
            game.payoff(standing[1], standing[0]),
        ],
        final_actions: standing,
        opportunities: times.len(),
        triggers,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::PiecewisePlan;
    use crate::simulator::AgentSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_count_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let total: usize = (0..n)
            .map(|_| sample_revision_times(1.0, 50.0, &mut rng).len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!(
            (mean - 50.0).abs() < 3.0 * (50.0f64 / n as f64).sqrt() * 1.5,
            "{mean}"
        );
    }

    #[test]
    fn times_are_increasing_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let times = sample_revision_times(2.0, 10.0, &mut rng);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert!(times.iter().all(|&t| t > -10.0 && t <= 0.0));
    }

    #[test]
    fn gap_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut gaps = Vec::new();
        while gaps.len() < 100_000 {
            let times = sample_revision_times(2.0, 1000.0, &mut rng);
            gaps.extend(times.windows(2).map(|w| w[1] - w[0]));
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn short_horizon_rarely_sees_opportunities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hits = (0..10_000)
            .filter(|_| !sample_revision_times(1.0, 1e-6, &mut rng).is_empty())
            .count();
        assert!(hits <= 2);
    }

    #[test]
    fn constant_cooperation_without_errors() {
        let g = StageGame::continuous_pd();
        let plan = PiecewisePlan::constant(20.0, 1.0).unwrap();
        let agent = AgentSpec {
            kind: StrategyKind::Lr,
            plan: plan.into(),
            k: 0.3,
        };
        let config = SimConfig::symmetric(1.0, 20.0, agent, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ep = run_episode(&g, &config, &mut rng, true);
        assert_eq!(ep.payoffs, [1.0, 1.0]);
        assert_eq!(ep.triggers, 0);
        assert!(ep.trace.iter().all(|s| s.realized == s.plan_action));
    }
}
