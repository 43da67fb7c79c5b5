//! Monte-Carlo play of revision games.
//!
//! Revision opportunities arrive by a Poisson process shared by both players.
//! At each opportunity both players revise simultaneously, possibly with a
//! trembling-hand error, and payoffs are realized from the actions standing at
//! the deadline.

mod batch;
mod episode;
mod sweep;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use batch::{episode_rng, run_batch, EpisodeRecord, SimResult};
pub use episode::{run_episode, sample_revision_times, Episode, TraceStep};
pub use sweep::{format_real, sweep, sweep_csv, StrategySpec, SweepConfig, SweepRow, CSV_HEADER};

use crate::error::{domain, Result};
use crate::plan::{check_lambda, LrStrategy, PiecewisePlan};

/// Actions within this distance of the prescription count as compliant.
pub const COMPLIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Retaliate on `(-t, -t + k t]`, then return to the plan.
    Lr,
    /// Retaliate until the deadline.
    Gt,
    /// Follow the plan and never retaliate.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// The erroneous action is uniform over the action interval.
    UniformRandom,
    /// The erroneous action is the stage Nash action.
    Defect,
}

impl ErrorModel {
    pub fn label(self) -> &'static str {
        match self {
            ErrorModel::UniformRandom => "uniform_random",
            ErrorModel::Defect => "defect",
        }
    }
}

/// Strategy template for one player.
#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub kind: StrategyKind,
    pub plan: Arc<PiecewisePlan>,
    pub k: f64,
}

impl AgentSpec {
    pub fn lr(strategy: &LrStrategy) -> Self {
        AgentSpec {
            kind: StrategyKind::Lr,
            plan: Arc::new(strategy.plan.clone()),
            k: strategy.k,
        }
    }

    pub fn gt(plan: PiecewisePlan) -> Self {
        AgentSpec {
            kind: StrategyKind::Gt,
            plan: Arc::new(plan),
            k: 1.0,
        }
    }

    pub fn constant(plan: PiecewisePlan) -> Self {
        AgentSpec {
            kind: StrategyKind::Constant,
            plan: Arc::new(plan),
            k: 0.0,
        }
    }
}

/// Forces `player` to play `action` at the first opportunity strictly after
/// calendar time `after_time`, without counting it as an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedDeviation {
    pub after_time: f64,
    pub player: usize,
    pub action: f64,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub lambda: f64,
    pub horizon: f64,
    pub error_rate: f64,
    pub error_model: ErrorModel,
    pub replications: usize,
    pub master_seed: u64,
    pub agents: [AgentSpec; 2],
    pub record_episodes: bool,
    pub injected_deviation: Option<InjectedDeviation>,
}

impl SimConfig {
    /// Both players use `agent`, no errors, uniform error model, seed 0.
    pub fn symmetric(lambda: f64, horizon: f64, agent: AgentSpec, replications: usize) -> Self {
        SimConfig {
            lambda,
            horizon,
            error_rate: 0.0,
            error_model: ErrorModel::UniformRandom,
            replications,
            master_seed: 0,
            agents: [agent.clone(), agent],
            record_episodes: false,
            injected_deviation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(domain(format!("T must be > 0, got {}", self.horizon)));
        }
        if !(0.0..1.0).contains(&self.error_rate) {
            return Err(domain(format!(
                "error_rate must be in [0, 1), got {}",
                self.error_rate
            )));
        }
        if self.replications < 1 {
            return Err(domain("replications must be >= 1"));
        }
        for agent in &self.agents {
            if agent.plan.is_empty() || agent.plan.horizon() < self.horizon * (1.0 - 1e-12) {
                return Err(domain(format!(
                    "plan horizon {} shorter than T={}",
                    agent.plan.horizon(),
                    self.horizon
                )));
            }
            if agent.kind == StrategyKind::Lr && !(agent.k > 0.0 && agent.k < 1.0) {
                return Err(domain(format!("k must be in (0, 1), got {}", agent.k)));
            }
        }
        if let Some(d) = self.injected_deviation {
            if d.player > 1 {
                return Err(domain(format!("player index {} out of range", d.player)));
            }
        }
        Ok(())
    }
}
