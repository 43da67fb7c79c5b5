//! Cooperative plans and their expected payoff.
//!
//! Times come in two conventions. Public breakpoints use calendar time in
//! `(-T, 0]`, the deadline being `0`. Internally most formulas use the
//! *remaining* time `t = -calendar`, so a segment covering calendar
//! `(-t_hi, -t_lo]` is the remaining-time interval `[t_lo, t_hi)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::game::StageGame;

/// `e^{-lambda a} - e^{-lambda b}` for `a <= b`, the probability that the last
/// revision opportunity falls in remaining time `[a, b)`.
pub fn exp_mass(lambda: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    -(-lambda * a).exp() * (-lambda * (b - a)).exp_m1()
}

/// One constant piece of a plan, in remaining time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub action: f64,
}

/// A general piecewise-constant plan on `(-T, 0]`.
///
/// `breakpoints[i]` is the calendar time at which segment `i` ends; segment
/// `i` starts where segment `i - 1` ends (segment 0 starts at `-T`). The last
/// breakpoint is the deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePlan {
    #[serde(rename = "T")]
    horizon: f64,
    breakpoints: Vec<f64>,
    actions: Vec<f64>,
    /// Remaining-time span `[0, relaxed_tail)` before the deadline in which the
    /// incentive constraint is only required approximately.
    #[serde(default)]
    relaxed_tail: f64,
}

impl PiecewisePlan {
    pub fn new(horizon: f64, breakpoints: Vec<f64>, actions: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidPlan(format!(
                "horizon must be >= 0, got {horizon}"
            )));
        }
        if breakpoints.len() != actions.len() {
            return Err(Error::InvalidPlan(format!(
                "{} breakpoints but {} actions",
                breakpoints.len(),
                actions.len()
            )));
        }
        if horizon == 0.0 {
            if !breakpoints.is_empty() {
                return Err(Error::InvalidPlan("zero-length plan must be empty".into()));
            }
        } else {
            if breakpoints.is_empty() {
                return Err(Error::InvalidPlan("plan needs at least one segment".into()));
            }
            let mut prev = -horizon;
            for &b in &breakpoints {
                if !(b > prev) {
                    return Err(Error::InvalidPlan(format!(
                        "breakpoints must increase strictly within (-T, 0]: {b} after {prev}"
                    )));
                }
                prev = b;
            }
            if prev != 0.0 {
                return Err(Error::InvalidPlan(format!(
                    "last breakpoint must be 0, got {prev}"
                )));
            }
        }
        if let Some(a) = actions.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidPlan(format!("non-finite action {a}")));
        }
        Ok(PiecewisePlan {
            horizon,
            breakpoints,
            actions,
            relaxed_tail: 0.0,
        })
    }

    pub fn constant(horizon: f64, action: f64) -> Result<Self> {
        Self::new(horizon, vec![0.0], vec![action])
    }

    /// Empty plan of zero length.
    pub fn empty() -> Self {
        PiecewisePlan {
            horizon: 0.0,
            breakpoints: vec![],
            actions: vec![],
            relaxed_tail: 0.0,
        }
    }

    pub fn with_relaxed_tail(mut self, relaxed_tail: f64) -> Self {
        self.relaxed_tail = relaxed_tail.clamp(0.0, self.horizon);
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn relaxed_tail(&self) -> f64 {
        self.relaxed_tail
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Segments from the start of the game toward the deadline.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(move |(i, &action)| Segment {
                t_lo: -self.breakpoints[i],
                t_hi: if i == 0 {
                    self.horizon
                } else {
                    -self.breakpoints[i - 1]
                },
                action,
            })
    }

    /// Index of the segment holding remaining time `t`; `t >= T` maps to the
    /// first segment (the initial action).
    pub fn segment_index(&self, t: f64) -> usize {
        let calendar = -t;
        self.breakpoints
            .partition_point(|&b| b < calendar)
            .min(self.actions.len().saturating_sub(1))
    }

    /// Planned action `x(t)` at remaining time `t`.
    pub fn action_at(&self, t: f64) -> f64 {
        self.actions[self.segment_index(t)]
    }

    /// Same breakpoints with every action mapped through `f`.
    pub fn map_actions(&self, f: impl Fn(f64) -> f64) -> Self {
        PiecewisePlan {
            actions: self.actions.iter().map(|&a| f(a)).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn with_actions(&self, actions: Vec<f64>) -> Self {
        debug_assert_eq!(actions.len(), self.actions.len());
        PiecewisePlan {
            actions,
            ..self.clone()
        }
    }
}

/// Geometric slot boundaries `[-T, -kappa T, ..., -kappa^c T]`, `kappa = 1 - k`.
pub fn slot_boundaries(horizon: f64, k: f64, slots: usize) -> Result<Vec<f64>> {
    check_horizon(horizon)?;
    check_k(k)?;
    if slots < 1 {
        return Err(domain("slot count must be >= 1"));
    }
    let kappa = 1.0 - k;
    Ok((0..=slots)
        .map(|n| -(horizon * kappa.powi(n as i32)))
        .collect())
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("horizon T must be > 0, got {horizon}")))
    }
}

pub(crate) fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "retaliation coefficient k must lie in (0, 1), got {k}"
        )))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "arrival rate lambda must be > 0, got {lambda}"
        )))
    }
}

/// Piecewise description of the ultimate slot when it follows a continuous
/// trajectory rather than a single action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltimateTail {
    pub breakpoints: Vec<f64>,
    pub actions: Vec<f64>,
}

/// Monotone piecewise-constant plan on geometric slots.
///
/// Slot `n` (1-based) covers calendar `(-kappa^{n-1} T, -kappa^n T]` and plays
/// `actions[n - 1]`; the ultimate slot `(-kappa^c T, 0]` plays
/// `ultimate_action`, or follows `tail` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MpcPlanFile")]
pub struct MpcPlan {
    #[serde(rename = "T")]
    horizon: f64,
    k: f64,
    #[serde(skip)]
    kappa: f64,
    epsilon: f64,
    boundaries: Vec<f64>,
    actions: Vec<f64>,
    ultimate_action: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<UltimateTail>,
}

#[derive(Deserialize)]
struct MpcPlanFile {
    #[serde(rename = "T")]
    horizon: f64,
    k: f64,
    epsilon: f64,
    boundaries: Vec<f64>,
    actions: Vec<f64>,
    ultimate_action: f64,
    #[serde(default)]
    tail: Option<UltimateTail>,
}

impl TryFrom<MpcPlanFile> for MpcPlan {
    type Error = Error;

    fn try_from(f: MpcPlanFile) -> Result<Self> {
        let mut plan = MpcPlan::new(f.horizon, f.k, f.actions, f.ultimate_action, f.epsilon)?;
        if f.boundaries.len() != plan.boundaries.len() {
            return Err(Error::InvalidPlan(format!(
                "expected {} boundaries, found {}",
                plan.boundaries.len(),
                f.boundaries.len()
            )));
        }
        for (&given, &expected) in f.boundaries.iter().zip(&plan.boundaries) {
            if (given - expected).abs() > 1e-9 * f.horizon {
                return Err(Error::InvalidPlan(format!(
                    "boundary {given} does not match the slot geometry ({expected})"
                )));
            }
        }
        plan.boundaries = f.boundaries;
        if let Some(tail) = f.tail {
            plan = plan.with_tail(tail)?;
        }
        Ok(plan)
    }
}

impl MpcPlan {
    pub fn new(
        horizon: f64,
        k: f64,
        actions: Vec<f64>,
        ultimate_action: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let boundaries = slot_boundaries(horizon, k, actions.len())?;
        if !(epsilon >= 0.0) {
            return Err(domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) || *boundaries.last().unwrap() >= 0.0 {
            return Err(Error::InvalidPlan(
                "slot boundaries collapsed; too many slots".into(),
            ));
        }
        if actions
            .iter()
            .chain(std::iter::once(&ultimate_action))
            .any(|a| !a.is_finite())
        {
            return Err(Error::InvalidPlan("non-finite action".into()));
        }
        Ok(MpcPlan {
            horizon,
            k,
            kappa: 1.0 - k,
            epsilon,
            boundaries,
            actions,
            ultimate_action,
            tail: None,
        })
    }

    pub(crate) fn with_tail(mut self, tail: UltimateTail) -> Result<Self> {
        let start = *self.boundaries.last().unwrap();
        let mut prev = start;
        if tail.breakpoints.is_empty() || tail.breakpoints.len() != tail.actions.len() {
            return Err(Error::InvalidPlan("malformed ultimate tail".into()));
        }
        for &b in &tail.breakpoints {
            if !(b > prev) {
                return Err(Error::InvalidPlan("tail breakpoints must increase".into()));
            }
            prev = b;
        }
        if prev != 0.0 {
            return Err(Error::InvalidPlan("tail must end at the deadline".into()));
        }
        self.tail = Some(tail);
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of regular slots `c`.
    pub fn slot_count(&self) -> usize {
        self.actions.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    /// `a_n` for `1 <= n <= c`; `n = c + 1` is the ultimate action.
    pub fn action(&self, n: usize) -> Option<f64> {
        match n {
            0 => None,
            n if n <= self.actions.len() => Some(self.actions[n - 1]),
            n if n == self.actions.len() + 1 => Some(self.ultimate_action),
            _ => None,
        }
    }

    pub fn terminal_action(&self) -> f64 {
        *self.actions.last().unwrap()
    }

    pub fn ultimate_action(&self) -> f64 {
        self.ultimate_action
    }

    pub fn tail(&self) -> Option<&UltimateTail> {
        self.tail.as_ref()
    }

    /// Remaining time `kappa^n T` at the end of slot `n`.
    pub fn slot_end(&self, n: usize) -> f64 {
        -self.boundaries[n]
    }

    /// Length of the ultimate slot, `kappa^c T`.
    pub fn ultimate_length(&self) -> f64 {
        self.slot_end(self.slot_count())
    }

    pub fn to_piecewise(&self) -> PiecewisePlan {
        let mut breakpoints: Vec<f64> = self.boundaries[1..].to_vec();
        let mut actions = self.actions.clone();
        match &self.tail {
            Some(tail) => {
                breakpoints.extend_from_slice(&tail.breakpoints);
                actions.extend_from_slice(&tail.actions);
            }
            None => {
                breakpoints.push(0.0);
                actions.push(self.ultimate_action);
            }
        }
        PiecewisePlan {
            horizon: self.horizon,
            breakpoints,
            actions,
            relaxed_tail: 0.0,
        }
        .with_relaxed_tail(self.ultimate_length())
    }

    /// Checks the bounded-and-monotone invariants against `game`.
    pub fn check_invariants(&self, game: &StageGame) -> Result<()> {
        let top = game.max_cooperation();
        let tol = 1e-12 * top.max(1.0);
        let mut prev = f64::INFINITY;
        let tail_actions = self.tail.iter().flat_map(|t| t.actions.iter());
        for &a in self
            .actions
            .iter()
            .chain(std::iter::once(&self.ultimate_action))
            .chain(tail_actions)
        {
            let level = game.cooperation_level(a);
            if level < -tol || level > top + tol {
                return Err(Error::InvalidPlan(format!(
                    "action {a} outside the cooperative range"
                )));
            }
            if level > prev + tol {
                return Err(Error::InvalidPlan(format!(
                    "cooperation increases toward the deadline at action {a}"
                )));
            }
            prev = level;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A limited-retaliation strategy: follow `plan`, and after any deviation at
/// remaining time `t` play the stage Nash action on `(-t, -t + k t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrStrategy {
    pub plan: PiecewisePlan,
    pub k: f64,
}

impl LrStrategy {
    pub fn new(plan: PiecewisePlan, k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(LrStrategy { plan, k })
    }

    pub fn from_mpc(plan: &MpcPlan) -> Self {
        LrStrategy {
            plan: plan.to_piecewise(),
            k: plan.k(),
        }
    }
}

/// Expected stage payoff when both players follow `plan` over the last
/// `horizon` units of time: the initial action pays if no opportunity
/// arrives, otherwise the action at the last opportunity pays.
pub fn expected_payoff(
    game: &StageGame,
    plan: &PiecewisePlan,
    lambda: f64,
    horizon: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    if !(horizon >= 0.0) || horizon > plan.horizon() * (1.0 + 1e-12) {
        return Err(domain(format!(
            "horizon {horizon} outside [0, {}]",
            plan.horizon()
        )));
    }
    if plan.is_empty() {
        return Err(domain("cannot evaluate an empty plan"));
    }
    let horizon = horizon.min(plan.horizon());
    // the action in force just after the window opens at -horizon
    let initial = plan
        .segments()
        .find(|s| s.t_lo < horizon)
        .map_or_else(|| plan.action_at(0.0), |s| s.action);
    let mut value = game.symmetric_payoff(initial)? * (-lambda * horizon).exp();
    for seg in plan.segments() {
        if seg.t_lo >= horizon {
            continue;
        }
        let mass = exp_mass(lambda, seg.t_lo, seg.t_hi.min(horizon));
        value += game.symmetric_payoff(seg.action)? * mass;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_boundary_examples() {
        let b = slot_boundaries(50.0, 0.33, 2).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], -50.0);
        assert!((b[1] + 33.5).abs() < 1e-12);
        assert!((b[2] + 22.445).abs() < 1e-12);
        assert_eq!(
            slot_boundaries(1.0, 0.5, 3).unwrap(),
            vec![-1.0, -0.5, -0.25, -0.125]
        );
        let single = slot_boundaries(7.0, 0.2, 1).unwrap();
        assert_eq!(single.len(), 2);
        assert!((single[1] + 0.8 * 7.0).abs() < 1e-12);
    }

    #[test]
    fn slot_boundary_errors() {
        assert!(slot_boundaries(0.0, 0.5, 1).is_err());
        assert!(slot_boundaries(1.0, 1.0, 1).is_err());
        assert!(slot_boundaries(1.0, 0.0, 1).is_err());
        assert!(slot_boundaries(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn piecewise_lookup() {
        let p = PiecewisePlan::new(1.0, vec![-0.5, 0.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(p.action_at(1.0), 1.0);
        assert_eq!(p.action_at(0.75), 1.0);
        // calendar -0.5 belongs to the first segment (-1, -0.5]
        assert_eq!(p.action_at(0.5), 1.0);
        assert_eq!(p.action_at(0.4999), 0.5);
        assert_eq!(p.action_at(0.0), 0.5);
        let segs: Vec<_> = p.segments().collect();
        assert_eq!(
            segs[0],
            Segment {
                t_lo: 0.5,
                t_hi: 1.0,
                action: 1.0
            }
        );
        assert_eq!(
            segs[1],
            Segment {
                t_lo: 0.0,
                t_hi: 0.5,
                action: 0.5
            }
        );
    }

    #[test]
    fn piecewise_validation() {
        assert!(PiecewisePlan::new(1.0, vec![-0.5, -0.5, 0.0], vec![1.0; 3]).is_err());
        assert!(PiecewisePlan::new(1.0, vec![-0.5], vec![1.0]).is_err());
        assert!(PiecewisePlan::new(1.0, vec![-1.5, 0.0], vec![1.0; 2]).is_err());
        assert!(PiecewisePlan::new(1.0, vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewisePlan::new(0.0, vec![], vec![]).unwrap().is_empty());
    }

    #[test]
    fn constant_plan_payoff_is_stage_payoff() {
        let g = StageGame::continuous_pd();
        for (a, lambda, t) in [(1.0, 1.0, 10.0), (0.3, 2.5, 0.1), (0.7, 0.2, 40.0)] {
            let p = PiecewisePlan::constant(t, a).unwrap();
            let v = expected_payoff(&g, &p, lambda, t).unwrap();
            assert!((v - g.symmetric_payoff(a).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_segment_payoff() {
        let g = StageGame::continuous_pd();
        let p = PiecewisePlan::new(1.0, vec![-0.5, 0.0], vec![1.0, 0.5]).unwrap();
        let e = std::f64::consts::E;
        let expected = 1.0 / e + ((-0.5f64).exp() - 1.0 / e) + 0.75 * (1.0 - (-0.5f64).exp());
        let v = expected_payoff(&g, &p, 1.0, 1.0).unwrap();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.9017).abs() < 1e-4);
    }

    #[test]
    fn truncated_horizon() {
        let g = StageGame::continuous_pd();
        let p = PiecewisePlan::new(1.0, vec![-0.5, 0.0], vec![1.0, 0.5]).unwrap();
        // last 0.5 units only see the second segment
        let v = expected_payoff(&g, &p, 1.0, 0.5).unwrap();
        assert!((v - 0.75).abs() < 1e-14);
        assert!(expected_payoff(&g, &p, 1.0, 1.5).is_err());
    }

    #[test]
    fn mpc_plan_json_roundtrip_is_bit_exact() {
        let plan =
            MpcPlan::new(50.0, 0.33, vec![1.0, 0.1 + 0.2, 1.0 / 3.0], 1.0 / 3.0, 1e-6).unwrap();
        let text = plan.to_json().unwrap();
        let back = MpcPlan::from_json(&text).unwrap();
        assert_eq!(back, plan);
        for (a, b) in back.actions().iter().zip(plan.actions()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mpc_plan_rejects_mismatched_boundaries() {
        let text = r#"{"T": 1.0, "k": 0.5, "epsilon": 0.0, "boundaries": [-1.0, -0.4],
                       "actions": [0.5], "ultimate_action": 0.5}"#;
        assert!(MpcPlan::from_json(text).is_err());
    }

    #[test]
    fn mpc_to_piecewise() {
        let plan = MpcPlan::new(1.0, 0.5, vec![1.0, 0.6, 0.2], 0.2, 0.0).unwrap();
        let p = plan.to_piecewise();
        assert_eq!(p.breakpoints(), &[-0.5, -0.25, -0.125, 0.0]);
        assert_eq!(p.actions(), &[1.0, 0.6, 0.2, 0.2]);
        assert_eq!(p.relaxed_tail(), 0.125);
    }

    #[test]
    fn mpc_invariants() {
        let g = StageGame::continuous_pd();
        assert!(MpcPlan::new(1.0, 0.5, vec![1.0, 0.6], 0.6, 0.0)
            .unwrap()
            .check_invariants(&g)
            .is_ok());
        assert!(MpcPlan::new(1.0, 0.5, vec![0.6, 1.0], 1.0, 0.0)
            .unwrap()
            .check_invariants(&g)
            .is_err());
    }
}
