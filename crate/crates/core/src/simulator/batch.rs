use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::run_episode;
use super::SimConfig;
use crate::error::Result;
use crate::game::StageGame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub payoffs: [f64; 2],
    pub final_actions: [f64; 2],
    pub opportunities: usize,
    pub triggers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_payoff: [f64; 2],
    pub std_error: [f64; 2],
    /// Mean of the two players' average payoff.
    pub mean_average: f64,
    pub average_std_error: f64,
    pub n: usize,
    /// False when `n = 1`; the standard errors are then reported as 0.
    pub std_error_defined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<Vec<EpisodeRecord>>,
}

/// RNG for episode `r`: one ChaCha stream per episode under the master seed.
pub fn episode_rng(master_seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(r as u64);
    rng
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Runs `config.replications` independent episodes. Episodes may run on any
/// number of threads; the reduction always walks them in index order.
pub fn run_batch(game: &StageGame, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let n = config.replications;
    let records: Vec<EpisodeRecord> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = episode_rng(config.master_seed, r);
            let ep = run_episode(game, config, &mut rng, false);
            EpisodeRecord {
                payoffs: ep.payoffs,
                final_actions: ep.final_actions,
                opportunities: ep.opportunities,
                triggers: ep.triggers,
            }
        })
        .collect();
    let (m0, se0) = mean_and_se(records.iter().map(|e| e.payoffs[0]), n);
    let (m1, se1) = mean_and_se(records.iter().map(|e| e.payoffs[1]), n);
    let (ma, sea) = mean_and_se(
        records.iter().map(|e| 0.5 * (e.payoffs[0] + e.payoffs[1])),
        n,
    );
    Ok(SimResult {
        mean_payoff: [m0, m1],
        std_error: [se0, se1],
        mean_average: ma,
        average_std_error: sea,
        n,
        std_error_defined: n > 1,
        episodes: config.record_episodes.then_some(records),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::PiecewisePlan;
    use crate::simulator::{AgentSpec, StrategyKind};

    fn config(n: usize) -> SimConfig {
        let plan = PiecewisePlan::new(5.0, vec![-2.0, 0.0], vec![1.0, 0.4]).unwrap();
        let agent = AgentSpec {
            kind: StrategyKind::Lr,
            plan: plan.into(),
            k: 0.5,
        };
        let mut c = SimConfig::symmetric(1.0, 5.0, agent, n);
        c.error_rate = 0.2;
        c.master_seed = 42;
        c
    }

    #[test]
    fn single_replication_flags_undefined_error() {
        let r = run_batch(&StageGame::continuous_pd(), &config(1)).unwrap();
        assert_eq!(r.n, 1);
        assert!(!r.std_error_defined);
        assert_eq!(r.std_error, [0.0, 0.0]);
    }

    #[test]
    fn same_seed_same_result() {
        let g = StageGame::continuous_pd();
        let mut c = config(500);
        c.record_episodes = true;
        let a = run_batch(&g, &c).unwrap();
        let b = run_batch(&g, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes.as_ref().unwrap().len(), 500);
    }

    #[test]
    fn rejects_bad_config() {
        let g = StageGame::continuous_pd();
        let mut c = config(10);
        c.error_rate = 1.0;
        assert!(run_batch(&g, &c).is_err());
        let mut c = config(10);
        c.horizon = 6.0;
        assert!(run_batch(&g, &c).is_err());
    }
}
