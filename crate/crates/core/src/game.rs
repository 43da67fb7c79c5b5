//! Symmetric two-player stage games.
//!
//! Everything downstream (plans, incentive checks, simulation) talks about
//! actions through the *cooperation level* `cl(a) = orientation * (a - a^N)`,
//! so a game where smaller actions cooperate (Cournot quantities) runs through
//! the same code path as one where larger actions cooperate (continuous PD).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::roots::golden_section_max;

/// Tolerance used when deciding whether two payoff values tie.
const TIE_TOL: f64 = 1e-14;

pub type PayoffFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Direction in which actions become more cooperative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Larger actions are more cooperative (`a* > a^N`).
    Increasing,
    /// Smaller actions are more cooperative (`a* < a^N`).
    Decreasing,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Increasing => 1.0,
            Orientation::Decreasing => -1.0,
        }
    }
}

#[derive(Clone)]
enum Kind {
    ContinuousPd,
    Cournot { p0: f64, c: f64, b: f64 },
    Custom(PayoffFn),
}

impl fmt::Debug for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::ContinuousPd => write!(f, "ContinuousPd"),
            Kind::Cournot { p0, c, b } => write!(f, "Cournot {{ p0: {p0}, c: {c}, b: {b} }}"),
            Kind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A symmetric stage game on an action interval.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone, Debug)]
pub struct StageGame {
    kind: Kind,
    action_lo: f64,
    action_hi: f64,
    nash_action: f64,
    optimal_action: f64,
    orientation: Orientation,
}

/// File-loadable game description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "lowercase")]
pub enum GameSpec {
    Pd,
    Cournot { p0: f64, c: f64, b: f64 },
}

impl GameSpec {
    pub fn build(&self) -> Result<StageGame> {
        match *self {
            GameSpec::Pd => Ok(StageGame::continuous_pd()),
            GameSpec::Cournot { p0, c, b } => StageGame::cournot(p0, c, b),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl StageGame {
    /// Continuous prisoner's dilemma `pi_i = 2 a_j - a_i^2` on `[0, 1]`.
    pub fn continuous_pd() -> Self {
        StageGame {
            kind: Kind::ContinuousPd,
            action_lo: 0.0,
            action_hi: 1.0,
            nash_action: 0.0,
            optimal_action: 1.0,
            orientation: Orientation::Increasing,
        }
    }

    /// Cournot duopoly with inverse demand `p0 - b (q_i + q_j)` and unit cost `c`.
    pub fn cournot(p0: f64, c: f64, b: f64) -> Result<Self> {
        if !(p0.is_finite() && c.is_finite() && b.is_finite()) {
            return Err(Error::InvalidGame(
                "cournot parameters must be finite".into(),
            ));
        }
        if p0 <= c {
            return Err(Error::InvalidGame(format!(
                "cournot requires p0 > c (p0={p0}, c={c})"
            )));
        }
        if b <= 0.0 {
            return Err(Error::InvalidGame(format!(
                "cournot requires b > 0 (b={b})"
            )));
        }
        let margin = p0 - c;
        Ok(StageGame {
            kind: Kind::Cournot { p0, c, b },
            action_lo: 0.0,
            action_hi: margin / b,
            nash_action: margin / (3.0 * b),
            optimal_action: margin / (4.0 * b),
            orientation: Orientation::Decreasing,
        })
    }

    /// A user-supplied game. Best responses are found numerically, so the
    /// payoff should be unimodal in the player's own action.
    pub fn custom<F>(
        action_lo: f64,
        action_hi: f64,
        nash_action: f64,
        optimal_action: f64,
        payoff: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(action_lo.is_finite() && action_hi.is_finite()) || action_lo >= action_hi {
            return Err(Error::InvalidGame(format!(
                "action interval [{action_lo}, {action_hi}] is empty or unbounded"
            )));
        }
        for (name, a) in [
            ("nash_action", nash_action),
            ("optimal_action", optimal_action),
        ] {
            if !(action_lo..=action_hi).contains(&a) {
                return Err(Error::InvalidGame(format!(
                    "{name}={a} lies outside [{action_lo}, {action_hi}]"
                )));
            }
        }
        let orientation = if optimal_action > nash_action {
            Orientation::Increasing
        } else if optimal_action < nash_action {
            Orientation::Decreasing
        } else {
            return Err(Error::InvalidGame(
                "optimal action equals Nash action; no room for cooperation".into(),
            ));
        };
        const PROBES: usize = 21;
        let step = (action_hi - action_lo) / (PROBES - 1) as f64;
        for i in 0..PROBES {
            for j in 0..PROBES {
                let (ai, aj) = (action_lo + i as f64 * step, action_lo + j as f64 * step);
                let v = payoff(ai, aj);
                if !v.is_finite() {
                    return Err(Error::InvalidGame(format!("payoff({ai}, {aj}) = {v}")));
                }
            }
        }
        Ok(StageGame {
            kind: Kind::Custom(Arc::new(payoff)),
            action_lo,
            action_hi,
            nash_action,
            optimal_action,
            orientation,
        })
    }

    pub fn action_lo(&self) -> f64 {
        self.action_lo
    }

    pub fn action_hi(&self) -> f64 {
        self.action_hi
    }

    pub fn nash_action(&self) -> f64 {
        self.nash_action
    }

    pub fn optimal_action(&self) -> f64 {
        self.optimal_action
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::ContinuousPd => "pd",
            Kind::Cournot { .. } => "cournot",
            Kind::Custom(_) => "custom",
        }
    }

    /// Player i's stage payoff `pi_i(a_i, a_j)`.
    pub fn payoff(&self, a_i: f64, a_j: f64) -> f64 {
        match self.kind {
            Kind::ContinuousPd => 2.0 * a_j - a_i * a_i,
            Kind::Cournot { p0, c, b } => (p0 - b * (a_i + a_j) - c) * a_i,
            Kind::Custom(ref f) => f(a_i, a_j),
        }
    }

    pub fn check_action(&self, a: f64) -> Result<()> {
        let slack = 1e-12 * (self.action_hi - self.action_lo).max(1.0);
        if a.is_finite() && a >= self.action_lo - slack && a <= self.action_hi + slack {
            Ok(())
        } else {
            Err(domain(format!(
                "action {a} outside [{}, {}]",
                self.action_lo, self.action_hi
            )))
        }
    }

    /// `pi(a) = pi_i(a, a)`.
    pub fn symmetric_payoff(&self, a: f64) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.payoff(a, a))
    }

    /// Stage Nash payoff `pi^N`.
    pub fn nash_payoff(&self) -> f64 {
        match self.kind {
            Kind::Cournot { p0, c, b } => (p0 - c) * (p0 - c) / (9.0 * b),
            _ => self.payoff(self.nash_action, self.nash_action),
        }
    }

    pub fn best_response(&self, a_opponent: f64) -> Result<f64> {
        self.check_action(a_opponent)?;
        Ok(self.best_response_unchecked(a_opponent))
    }

    fn best_response_unchecked(&self, a_j: f64) -> f64 {
        match self.kind {
            Kind::ContinuousPd => 0.0,
            Kind::Cournot { p0, c, b } => {
                ((p0 - c - b * a_j) / (2.0 * b)).clamp(self.action_lo, self.action_hi)
            }
            Kind::Custom(ref f) => {
                let width = self.action_hi - self.action_lo;
                let searched = golden_section_max(
                    self.action_lo,
                    self.action_hi,
                    1e-12 * width.max(1.0),
                    |x| f(x, a_j),
                );
                let candidates = [searched, self.action_lo, self.action_hi, self.nash_action];
                let best = candidates
                    .iter()
                    .map(|&x| f(x, a_j))
                    .fold(f64::NEG_INFINITY, f64::max);
                let tol = TIE_TOL * best.abs().max(1.0);
                candidates
                    .iter()
                    .copied()
                    .filter(|&x| f(x, a_j) >= best - tol)
                    .min_by(|x, y| {
                        let dx = (x - self.nash_action).abs();
                        let dy = (y - self.nash_action).abs();
                        dx.total_cmp(&dy)
                    })
                    .unwrap_or(searched)
            }
        }
    }

    /// Largest one-shot gain from best-responding against `(a, a)`.
    pub fn deviation_gain(&self, a: f64) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.deviation_gain_unchecked(a))
    }

    pub(crate) fn deviation_gain_unchecked(&self, a: f64) -> f64 {
        let br = self.best_response_unchecked(a);
        (self.payoff(br, a) - self.payoff(a, a)).max(0.0)
    }

    /// Loss from mutual defection relative to the cooperative profile `(a, a)`.
    pub fn retaliation_loss(&self, a: f64) -> Result<f64> {
        self.check_action(a)?;
        Ok(self.retaliation_loss_unchecked(a))
    }

    pub(crate) fn retaliation_loss_unchecked(&self, a: f64) -> f64 {
        if a == self.nash_action {
            return 0.0;
        }
        self.payoff(a, a) - self.nash_payoff()
    }

    pub fn cooperation_level(&self, a: f64) -> f64 {
        self.orientation.sign() * (a - self.nash_action)
    }

    /// Cooperation level of the optimal action.
    pub fn max_cooperation(&self) -> f64 {
        self.cooperation_level(self.optimal_action)
    }

    pub fn action_at_level(&self, level: f64) -> f64 {
        self.nash_action + self.orientation.sign() * level
    }

    /// Clips `a` into the cooperative range between `a^N` and `a*`.
    pub fn clamp_cooperative(&self, a: f64) -> f64 {
        let level = self.cooperation_level(a);
        if level <= 0.0 {
            self.nash_action
        } else if level >= self.max_cooperation() {
            self.optimal_action
        } else {
            a
        }
    }

    /// The more cooperative of two actions.
    pub fn more_cooperative(&self, a: f64, b: f64) -> f64 {
        if self.cooperation_level(a) >= self.cooperation_level(b) {
            a
        } else {
            b
        }
    }

    /// The less cooperative of two actions.
    pub fn less_cooperative(&self, a: f64, b: f64) -> f64 {
        if self.cooperation_level(a) <= self.cooperation_level(b) {
            a
        } else {
            b
        }
    }

    /// Samples the assumptions the equilibrium construction relies on.
    pub fn validate(&self, grid_size: usize) -> Result<GameValidationReport> {
        if grid_size < 3 {
            return Err(domain(format!("grid_size must be >= 3, got {grid_size}")));
        }
        let top = self.max_cooperation();
        let coop_grid: Vec<f64> = (0..grid_size)
            .map(|i| {
                if i + 1 == grid_size {
                    self.optimal_action
                } else {
                    self.action_at_level(top * i as f64 / (grid_size - 1) as f64)
                }
            })
            .collect();

        let increasing = |name: &str, f: &dyn Fn(f64) -> f64| -> ValidationCheck {
            let values: Vec<f64> = coop_grid.iter().map(|&a| f(a)).collect();
            let mut passed = true;
            let mut worst = 0.0f64;
            for w in values.windows(2) {
                if !(w[1] > w[0]) {
                    passed = false;
                    worst = worst.max(w[0] - w[1]);
                }
            }
            ValidationCheck {
                name: name.to_string(),
                passed,
                worst_violation: worst,
            }
        };

        let mut checks = vec![
            increasing("symmetric_payoff_increasing", &|a| self.payoff(a, a)),
            increasing("deviation_gain_increasing", &|a| {
                self.deviation_gain_unchecked(a)
            }),
            increasing("retaliation_loss_increasing", &|a| {
                self.retaliation_loss_unchecked(a)
            }),
        ];

        let width = self.action_hi - self.action_lo;
        let mut worst_negative = 0.0f64;
        for i in 0..grid_size {
            let a = self.action_lo + width * i as f64 / (grid_size - 1) as f64;
            let br = self.best_response_unchecked(a);
            let raw = self.payoff(br, a) - self.payoff(a, a);
            worst_negative = worst_negative.max(-raw);
        }
        let gain_tol = 1e-9 * self.nash_payoff().abs().max(1.0);
        checks.push(ValidationCheck {
            name: "deviation_gain_nonnegative".into(),
            passed: worst_negative <= gain_tol,
            worst_violation: worst_negative.max(0.0),
        });

        let loss_at_nash = self.retaliation_loss_unchecked(self.nash_action).abs();
        checks.push(ValidationCheck {
            name: "retaliation_loss_zero_at_nash".into(),
            passed: loss_at_nash <= 1e-12,
            worst_violation: loss_at_nash,
        });

        Ok(GameValidationReport { checks, grid_size })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub grid_size: usize,
}

impl GameValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}
