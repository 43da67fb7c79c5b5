//! Incentive-constraint certification for limited-retaliation plans.
//!
//! A one-shot deviation at remaining time `t` gains `G(x(t)) e^{-lambda t}`
//! in expectation and costs the retaliation loss integrated over the window
//! `[kappa t, t]`. The plan is an equilibrium iff the loss covers the gain at
//! every `t`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::game::StageGame;
use crate::plan::{check_k, check_lambda, exp_mass, MpcPlan, PiecewisePlan};

/// Default approximate-equilibrium slack.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Offset used to sample both one-sided limits at a breakpoint.
pub const BREAKPOINT_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    PassWithEpsilon,
    Fail,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        !matches!(self, Verdict::Fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeReport {
    /// Checked calendar times `-t`.
    pub grid: Vec<f64>,
    /// Expected retaliation loss minus expected deviation gain at each grid time.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub min_margin_time: f64,
    pub verdict: Verdict,
    pub epsilon_used: f64,
}

fn check_time(plan: &PiecewisePlan, t: f64) -> Result<()> {
    if t > 0.0 && t <= plan.horizon() {
        Ok(())
    } else {
        Err(domain(format!("time {t} outside (0, {}]", plan.horizon())))
    }
}

/// Expected retaliation loss minus expected deviation gain for a deviation
/// at remaining time `t`, integrated exactly segment by segment.
pub fn incentive_margin(
    game: &StageGame,
    plan: &PiecewisePlan,
    k: f64,
    lambda: f64,
    t: f64,
) -> Result<f64> {
    check_k(k)?;
    check_lambda(lambda)?;
    check_time(plan, t)?;
    let window_start = (1.0 - k) * t;
    let mut loss = 0.0;
    for seg in plan.segments() {
        if seg.t_hi <= window_start || seg.t_lo > t {
            continue;
        }
        let lo = seg.t_lo.max(window_start);
        let hi = seg.t_hi.min(t);
        if hi > lo {
            loss += game.retaliation_loss(seg.action)? * exp_mass(lambda, lo, hi);
        }
    }
    let gain = game.deviation_gain(plan.action_at(t))? * (-lambda * t).exp();
    Ok(loss - gain)
}

/// Times (remaining) at which [`verify_spe`] evaluates the margin.
pub fn verification_grid(plan: &PiecewisePlan, grid_points: usize) -> Vec<f64> {
    let horizon = plan.horizon();
    let floor = if plan.relaxed_tail() > 0.0 {
        plan.relaxed_tail()
    } else {
        BREAKPOINT_OFFSET * horizon
    };
    let mut times = vec![floor, horizon];
    for seg in plan.segments() {
        for edge in [seg.t_lo, seg.t_hi] {
            for t in [edge - BREAKPOINT_OFFSET, edge, edge + BREAKPOINT_OFFSET] {
                if t >= floor && t <= horizon {
                    times.push(t);
                }
            }
        }
    }
    let fill = grid_points.max(2);
    for i in 0..fill {
        times.push((floor + (horizon - floor) * i as f64 / (fill - 1) as f64).min(horizon));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Certifies the incentive constraint on a grid that contains every
/// breakpoint, both one-sided limits around it, and a uniform fill.
///
/// Times inside the plan's relaxed tail are not checked.
pub fn verify_spe(
    game: &StageGame,
    plan: &PiecewisePlan,
    k: f64,
    lambda: f64,
    grid_points: usize,
    epsilon: f64,
) -> Result<SpeReport> {
    if grid_points < 100 {
        return Err(domain(format!(
            "grid_points must be >= 100, got {grid_points}"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if plan.is_empty() {
        return Err(Error::InvalidPlan("cannot verify an empty plan".into()));
    }
    check_k(k)?;
    check_lambda(lambda)?;
    let times = verification_grid(plan, grid_points);
    let margins = times
        .iter()
        .map(|&t| incentive_margin(game, plan, k, lambda, t))
        .collect::<Result<Vec<_>>>()?;
    let (idx, &min_margin) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is never empty");
    let verdict = if min_margin >= 0.0 {
        Verdict::Pass
    } else if min_margin >= -epsilon {
        Verdict::PassWithEpsilon
    } else {
        Verdict::Fail
    };
    Ok(SpeReport {
        grid: times.iter().map(|t| -t).collect(),
        margins,
        min_margin,
        min_margin_time: -times[idx],
        verdict,
        epsilon_used: epsilon,
    })
}

/// Reference value for [`incentive_margin`] from composite midpoint
/// quadrature of the loss integral, ignoring segment structure.
pub fn quadrature_oracle_margin(
    game: &StageGame,
    plan: &PiecewisePlan,
    k: f64,
    lambda: f64,
    t: f64,
    n_steps: usize,
) -> Result<f64> {
    check_k(k)?;
    check_lambda(lambda)?;
    check_time(plan, t)?;
    if n_steps < 10_000 {
        return Err(domain(format!("n_steps must be >= 10^4, got {n_steps}")));
    }
    let lo = (1.0 - k) * t;
    let h = (t - lo) / n_steps as f64;
    let mut sum = 0.0;
    for i in 0..n_steps {
        let s = lo + (i as f64 + 0.5) * h;
        let a = plan.action_at(s);
        sum += game.retaliation_loss(a)? * lambda * (-lambda * s).exp();
    }
    let loss = sum * h;
    let gain = game.deviation_gain(plan.action_at(t))? * (-lambda * t).exp();
    Ok(loss - gain)
}

/// Margins of the per-slot constraint at both ends of slot `n`: the limit as
/// the deviation time approaches the start of the slot, and the deviation at
/// the slot's last instant (the recurrence bound).
pub fn decomposed_slot_check(
    game: &StageGame,
    plan: &MpcPlan,
    lambda: f64,
    n: usize,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    let c = plan.slot_count();
    if n == 0 || n > c {
        return Err(Error::SlotIndex { index: n, count: c });
    }
    let a_n = plan.action(n).unwrap();
    let a_next = plan.action(n + 1).unwrap();
    let start = plan.slot_end(n - 1);
    let end = plan.slot_end(n);
    let gain = game.deviation_gain(a_n)?;
    let loss_n = game.retaliation_loss(a_n)?;
    let loss_next = game.retaliation_loss(a_next)?;

    let at_start = loss_n * exp_mass(lambda, end, start) - gain * (-lambda * start).exp();
    let window_start = plan.kappa() * end;
    let at_end = loss_next * exp_mass(lambda, window_start, end) - gain * (-lambda * end).exp();
    Ok((at_start, at_end))
}
