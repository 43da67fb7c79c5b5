//! Welfare-maximizing monotone piecewise-constant plans by backward induction.
//!
//! The terminal slot is fixed first (the most cooperative action that a
//! retaliation confined to the ultimate slot can still deter, up to the
//! relaxation `epsilon`), then each earlier slot takes the most cooperative
//! action whose deviation gain is covered by the retaliation loss earned in
//! the following slot.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::game::StageGame;
use crate::plan::{
    check_horizon, check_k, check_lambda, exp_mass, MpcPlan, PiecewisePlan, UltimateTail,
};
use crate::roots::{bisect_boundary, BISECTION_TOL};

/// Grid used to bracket the terminal action before bisection.
const TERMINAL_SCAN_POINTS: usize = 1000;

/// Cooperation below this fraction of `cl(a*)` counts as no cooperation.
pub const NEGLIGIBLE_COOPERATION: f64 = 1e-3;

/// Denominator guard for the grim-trigger ODE.
pub const ODE_SINGULARITY_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// The ultimate slot repeats the terminal action under the relaxed constraint.
    EpsilonRelax,
    /// The ultimate slot follows the grim-trigger ODE trajectory.
    GtOde,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub epsilon: f64,
    pub tail_policy: TailPolicy,
    /// Upper bound on the expected number of revision opportunities in the
    /// ultimate slot, `lambda kappa^c T`.
    pub tail_mass: f64,
    pub max_slots: usize,
    pub ode_steps: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            epsilon: crate::equilibrium::DEFAULT_EPSILON,
            tail_policy: TailPolicy::EpsilonRelax,
            tail_mass: 0.01,
            max_slots: 200,
            ode_steps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub plan: MpcPlan,
    /// The terminal action sustains no meaningful cooperation, so neither
    /// does any earlier slot.
    pub non_cooperative: bool,
}

/// Smallest `c >= 1` with `lambda kappa^c T <= tail_mass`, capped at `max_slots`.
pub fn choose_slot_count(
    lambda: f64,
    horizon: f64,
    k: f64,
    tail_mass: f64,
    max_slots: usize,
) -> usize {
    let kappa = 1.0 - k;
    let mut c = 1;
    while c < max_slots && lambda * horizon * kappa.powi(c as i32) > tail_mass {
        c += 1;
    }
    c.max(1)
}

/// Most cooperative action `a` in `[a^N, a*]` with
/// `G(a) e^{-lambda tau} <= L(a) (1 - e^{-lambda tau}) + epsilon`.
pub fn terminal_action(game: &StageGame, lambda: f64, tau: f64, epsilon: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain(format!("slot length must be > 0, got {tau}")));
    }
    if !(epsilon >= 0.0) {
        return Err(domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let stay = (-lambda * tau).exp();
    let arrive = -(-lambda * tau).exp_m1();
    Ok(most_cooperative_feasible(game, |a| {
        game.deviation_gain_unchecked(a) * stay
            <= game.retaliation_loss_unchecked(a) * arrive + epsilon
    }))
}

/// Scans the cooperative range from `a*` toward `a^N` for the most
/// cooperative action satisfying `feasible`, then refines by bisection.
fn most_cooperative_feasible(game: &StageGame, feasible: impl Fn(f64) -> bool) -> f64 {
    if feasible(game.optimal_action()) {
        return game.optimal_action();
    }
    let top = game.max_cooperation();
    let tol = BISECTION_TOL * top.max(1.0);
    let level_at = |i: usize| top * i as f64 / TERMINAL_SCAN_POINTS as f64;
    let best = (1..TERMINAL_SCAN_POINTS)
        .rev()
        .find(|&i| feasible(game.action_at_level(level_at(i))));
    let (lo, hi) = match best {
        Some(i) => (level_at(i), level_at(i + 1)),
        None => (0.0, level_at(1)),
    };
    let level = bisect_boundary(lo, hi, tol, |l| {
        l == 0.0 || feasible(game.action_at_level(l))
    });
    if level == 0.0 {
        game.nash_action()
    } else {
        game.action_at_level(level)
    }
}

/// Most cooperative `a_n`, no less cooperative than `a_next` and no more than
/// `a*`, with `G(a_n) <= L(a_next) (e^{lambda tau_next} - 1)`.
pub fn recurrence_step(game: &StageGame, lambda: f64, tau_next: f64, a_next: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(tau_next > 0.0 && tau_next.is_finite()) {
        return Err(domain(format!("slot length must be > 0, got {tau_next}")));
    }
    game.check_action(a_next)?;
    let top = game.max_cooperation();
    let level_next = game.cooperation_level(a_next);
    let tol = 1e-12 * top.max(1.0);
    if level_next < -tol || level_next > top + tol {
        return Err(domain(format!(
            "a_next={a_next} outside the cooperative range"
        )));
    }
    let budget = game.retaliation_loss_unchecked(a_next) * (lambda * tau_next).exp_m1();
    let gain_next = game.deviation_gain_unchecked(a_next);
    if gain_next > budget {
        let slack = 1e-14 * game.nash_payoff().abs().max(1.0);
        if gain_next <= budget + slack {
            return Ok(a_next);
        }
        return Err(Error::Infeasible(format!(
            "G(a_next)={gain_next} exceeds the retaliation budget {budget}"
        )));
    }
    if game.deviation_gain_unchecked(game.optimal_action()) <= budget {
        return Ok(game.optimal_action());
    }
    let level = bisect_boundary(
        level_next.max(0.0),
        top,
        BISECTION_TOL * top.max(1.0),
        |l| game.deviation_gain_unchecked(game.action_at_level(l)) <= budget,
    );
    if level == level_next.max(0.0) {
        return Ok(a_next);
    }
    Ok(game.action_at_level(level))
}

/// Builds the welfare-maximizing bounded monotone plan for retaliation
/// coefficient `k` on horizon `T`.
pub fn synthesize_plan(
    game: &StageGame,
    lambda: f64,
    horizon: f64,
    k: f64,
    options: &SynthesisOptions,
) -> Result<Synthesis> {
    check_lambda(lambda)?;
    check_horizon(horizon)?;
    check_k(k)?;
    let epsilon = options.epsilon;
    if !(epsilon >= 0.0) {
        return Err(domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if options.max_slots < 1 {
        return Err(domain("max_slots must be >= 1"));
    }
    let c = choose_slot_count(lambda, horizon, k, options.tail_mass, options.max_slots);
    let skeleton = MpcPlan::new(
        horizon,
        k,
        vec![game.nash_action(); c],
        game.nash_action(),
        epsilon,
    )?;
    let ends: Vec<f64> = (0..=c).map(|n| skeleton.slot_end(n)).collect();

    // The binding deviation in the last regular slot happens at its final
    // instant, where the retaliation window lies inside the ultimate slot.
    let anchor = k * ends[c];
    let cap = terminal_action(game, lambda, anchor, epsilon)?;
    let mut tail = None;
    let terminal = match options.tail_policy {
        TailPolicy::EpsilonRelax => cap,
        TailPolicy::GtOde => {
            let reach = gt_ode_tail(game, lambda, ends[c - 1], options.ode_steps)?;
            let x_g = reach.value_at_start();
            let ultimate = gt_ode_tail(game, lambda, ends[c], options.ode_steps)?;
            // Retaliation from the end of slot c now runs over the trajectory,
            // which is less cooperative than a constant a_c would be.
            let window_start = (1.0 - k) * ends[c];
            let segments: Vec<_> = ultimate
                .plan
                .segments()
                .filter(|s| s.t_hi > window_start)
                .collect();
            let discount = (-lambda * ends[c]).exp();
            let with_tail = most_cooperative_feasible(game, |a| {
                let loss: f64 = segments
                    .iter()
                    .map(|s| {
                        let x = game.less_cooperative(s.action, a);
                        game.retaliation_loss_unchecked(x)
                            * exp_mass(lambda, s.t_lo.max(window_start), s.t_hi)
                    })
                    .sum();
                game.deviation_gain_unchecked(a) * discount <= loss + epsilon
            });
            let a_c = game.less_cooperative(game.less_cooperative(x_g, cap), with_tail);
            let clipped = ultimate.plan.map_actions(|a| game.less_cooperative(a, a_c));
            tail = Some(UltimateTail {
                breakpoints: clipped.breakpoints().to_vec(),
                actions: clipped.actions().to_vec(),
            });
            a_c
        }
    };

    let mut actions = vec![terminal; c];
    for n in (1..c).rev() {
        let a_next = actions[n];
        let tau_next = ends[n] - ends[n + 1];
        actions[n - 1] = match recurrence_step(game, lambda, tau_next, a_next) {
            Ok(a) => a,
            Err(Error::Infeasible(msg)) => {
                // Only reachable right after an epsilon-relaxed terminal slot.
                let margin = game.retaliation_loss_unchecked(a_next)
                    * exp_mass(lambda, ends[n + 1], ends[n])
                    - game.deviation_gain_unchecked(a_next) * (-lambda * ends[n]).exp();
                if margin >= -epsilon {
                    a_next
                } else {
                    return Err(Error::Infeasible(format!("slot {n}: {msg}")));
                }
            }
            Err(e) => return Err(e),
        };
    }

    let mut plan = MpcPlan::new(horizon, k, actions, terminal, epsilon)?;
    if let Some(tail) = tail {
        plan = plan.with_tail(tail)?;
    }
    let strict = terminal_action(game, lambda, anchor, 0.0)?;
    let non_cooperative =
        game.cooperation_level(strict) <= NEGLIGIBLE_COOPERATION * game.max_cooperation();
    Ok(Synthesis {
        plan,
        non_cooperative,
    })
}

/// Trajectory of the grim-trigger plan ODE.
#[derive(Debug, Clone)]
pub struct OdeTail {
    /// The trajectory as a plan on `(-t_start, 0]`; each piece holds the value
    /// at its end nearest the deadline.
    pub plan: PiecewisePlan,
    /// `(remaining time, action)` nodes, starting at the deadline.
    pub nodes: Vec<(f64, f64)>,
    /// Set when a near-zero denominator stopped the integration early; the
    /// plan then holds the last good value over the rest of the interval.
    pub truncated: bool,
}

impl OdeTail {
    /// Action at the far end of the interval.
    pub fn value_at_start(&self) -> f64 {
        self.nodes.last().map(|n| n.1).unwrap_or(f64::NAN)
    }
}

fn gain_slope(game: &StageGame, a: f64) -> f64 {
    let h = 1e-6 * (game.action_hi() - game.action_lo());
    let lo = (a - h).max(game.action_lo());
    let hi = (a + h).min(game.action_hi());
    (game.deviation_gain_unchecked(hi) - game.deviation_gain_unchecked(lo)) / (hi - lo)
}

/// Calendar-time slope `lambda (G(x) - L(x)) / G'(x)` of the grim-trigger plan.
/// At the stage Nash action both numerator and denominator vanish; the slope
/// there is taken just inside the cooperative side.
pub fn gt_ode_slope(game: &StageGame, lambda: f64, x: f64) -> Option<f64> {
    let top = game.max_cooperation();
    let offset = 1e-5 * top;
    let x = if game.cooperation_level(x) < offset {
        game.action_at_level(offset)
    } else {
        x
    };
    let slope = gain_slope(game, x);
    if slope.abs() < ODE_SINGULARITY_GUARD {
        return None;
    }
    let num = game.deviation_gain_unchecked(x) - game.retaliation_loss_unchecked(x);
    Some(lambda * num / slope)
}

/// Integrates the grim-trigger plan backward from `x(0) = a^N` over the last
/// `t_start` units of time with fixed-step RK4.
pub fn gt_ode_tail(game: &StageGame, lambda: f64, t_start: f64, steps: usize) -> Result<OdeTail> {
    check_lambda(lambda)?;
    if !(t_start >= 0.0 && t_start.is_finite()) {
        return Err(domain(format!("t_start must be >= 0, got {t_start}")));
    }
    if steps < 10 {
        return Err(domain(format!("steps must be >= 10, got {steps}")));
    }
    if t_start == 0.0 {
        return Ok(OdeTail {
            plan: PiecewisePlan::empty(),
            nodes: vec![],
            truncated: false,
        });
    }
    let h = t_start / steps as f64;
    // dx/dt in remaining time is the negated calendar slope.
    let rate = |x: f64| gt_ode_slope(game, lambda, x).map(|s| -s);
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut x = game.nash_action();
    nodes.push((0.0, x));
    let mut truncated = false;
    for i in 0..steps {
        let step = (|| {
            let k1 = rate(x)?;
            let k2 = rate(game.clamp_cooperative(x + 0.5 * h * k1))?;
            let k3 = rate(game.clamp_cooperative(x + 0.5 * h * k2))?;
            let k4 = rate(game.clamp_cooperative(x + h * k3))?;
            Some(h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        match step {
            Some(dx) => x = game.clamp_cooperative(x + dx),
            None => truncated = true,
        }
        if truncated {
            break;
        }
        nodes.push(((i + 1) as f64 * h, x));
    }
    let last = x;
    let mut breakpoints = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    for i in (0..steps).rev() {
        breakpoints.push(0.0 - i as f64 * h);
        actions.push(nodes.get(i).map(|n| n.1).unwrap_or(last));
    }
    let plan = PiecewisePlan::new(t_start, breakpoints, actions)?;
    Ok(OdeTail {
        plan,
        nodes,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{verify_spe, Verdict};

    fn pd() -> StageGame {
        StageGame::continuous_pd()
    }

    /// Independent brute-force scan of the terminal inequality for the PD.
    fn scan_pd_terminal(lambda: f64, tau: f64, eps: f64) -> f64 {
        let p = (-lambda * tau).exp();
        (0..=1_000_000)
            .map(|i| i as f64 / 1e6)
            .filter(|&a| a * a * p <= (2.0 * a - a * a) * (1.0 - p) + eps)
            .fold(0.0, f64::max)
    }

    #[test]
    fn terminal_action_examples() {
        let g = pd();
        let a = terminal_action(&g, 1.0, std::f64::consts::LN_2, 0.0).unwrap();
        assert!((a - 1.0).abs() < 1e-9);
        let tau = -(0.8f64).ln();
        let a = terminal_action(&g, 1.0, tau, 0.0).unwrap();
        assert!((a - 0.4).abs() < 1e-9);
        assert!((a - scan_pd_terminal(1.0, tau, 0.0)).abs() < 2e-6);
        let a = terminal_action(&g, 1.0, 1e-9, 0.0).unwrap();
        assert!(a < 1e-8);
    }

    #[test]
    fn terminal_action_with_relaxation() {
        let g = pd();
        for (tau, eps) in [(0.01, 1e-6), (0.3, 1e-3), (2.0, 0.0)] {
            let a = terminal_action(&g, 1.0, tau, eps).unwrap();
            let b = scan_pd_terminal(1.0, tau, eps);
            assert!((a - b).abs() < 2e-6, "tau={tau}: {a} vs {b}");
        }
    }

    #[test]
    fn recurrence_examples() {
        let g = pd();
        let tau = (1.25f64).ln();
        assert!((recurrence_step(&g, 1.0, tau, 0.4).unwrap() - 0.4).abs() < 1e-9);
        let tau = (2.0f64).ln();
        assert!((recurrence_step(&g, 1.0, tau, 0.4).unwrap() - 0.8).abs() < 1e-9);
        assert_eq!(recurrence_step(&g, 1.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(recurrence_step(&g, 1.0, 30.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn recurrence_infeasible() {
        let g = pd();
        // G(0.9) = 0.81 > L(0.9) (e^{0.01} - 1)
        assert!(matches!(
            recurrence_step(&g, 1.0, 0.01, 0.9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn cournot_recurrence_moves_toward_collusion() {
        let g = StageGame::cournot(10.0, 5.0, 1.0).unwrap();
        let a = recurrence_step(&g, 1.0, 0.5, 1.6).unwrap();
        assert!((1.25..1.6).contains(&a));
        let budget = g.retaliation_loss(1.6).unwrap() * (0.5f64).exp_m1();
        assert!(g.deviation_gain(a).unwrap() <= budget);
    }

    #[test]
    fn slot_count_rule() {
        assert_eq!(choose_slot_count(1.0, 50.0, 0.33, 0.01, 200), 22);
        assert_eq!(choose_slot_count(1.0, 1e-4, 0.33, 0.01, 200), 1);
        assert_eq!(choose_slot_count(1.0, 50.0, 0.01, 0.01, 200), 200);
    }

    #[test]
    fn pd_plan_shape() {
        let g = pd();
        let s = synthesize_plan(&g, 1.0, 50.0, 0.33, &SynthesisOptions::default()).unwrap();
        let plan = &s.plan;
        assert!(!s.non_cooperative);
        plan.check_invariants(&g).unwrap();
        assert_eq!(plan.action(1), Some(1.0));
        assert!(plan.terminal_action() < 0.05);
        let report = verify_spe(&g, &plan.to_piecewise(), 0.33, 1.0, 1000, 1e-6).unwrap();
        assert!(report.verdict.is_pass(), "min margin {}", report.min_margin);
    }

    #[test]
    fn tiny_horizon_warns() {
        let s = synthesize_plan(&pd(), 1.0, 1e-4, 0.33, &SynthesisOptions::default()).unwrap();
        assert!(s.non_cooperative);
    }

    #[test]
    fn forced_nash_terminal_gives_trivial_plan() {
        let g = pd();
        let mut a = 0.0;
        for n in 0..30 {
            a = recurrence_step(&g, 1.0, 0.5 * (n + 1) as f64, a).unwrap();
            assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn cournot_plan_rises_toward_nash() {
        let g = StageGame::cournot(10.0, 5.0, 1.0).unwrap();
        let s = synthesize_plan(&g, 1.0, 20.0, 0.35, &SynthesisOptions::default()).unwrap();
        let acts = s.plan.actions();
        assert!((acts[0] - 1.25).abs() < 1e-9);
        assert!(acts.windows(2).all(|w| w[1] >= w[0]));
        assert!(*acts.last().unwrap() > 1.6);
        s.plan.check_invariants(&g).unwrap();
    }

    #[test]
    fn gt_ode_pd_closed_form() {
        // with D = G the PD slope is x - 1, so x(t) = 1 - e^{-lambda t}
        let g = pd();
        let tail = gt_ode_tail(&g, 1.0, 2.0, 2000).unwrap();
        assert!(!tail.truncated);
        for &(t, x) in tail.nodes.iter().skip(10) {
            assert!((x - (1.0 - (-t).exp())).abs() < 1e-4, "t={t}: {x}");
        }
        assert!(tail.nodes.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(tail.nodes[0].1, 0.0);
    }

    #[test]
    fn gt_ode_empty_and_errors() {
        let g = pd();
        assert!(gt_ode_tail(&g, 1.0, 0.0, 10).unwrap().plan.is_empty());
        assert!(gt_ode_tail(&g, 1.0, 1.0, 5).is_err());
    }

    #[test]
    fn gt_ode_tail_policy_plan() {
        let g = pd();
        let opts = SynthesisOptions {
            tail_policy: TailPolicy::GtOde,
            ..Default::default()
        };
        let s = synthesize_plan(&g, 1.0, 50.0, 0.33, &opts).unwrap();
        s.plan.check_invariants(&g).unwrap();
        assert!(s.plan.tail().is_some());
        let report = verify_spe(&g, &s.plan.to_piecewise(), 0.33, 1.0, 1000, 1e-6).unwrap();
        assert_ne!(report.verdict, Verdict::Fail);
    }
}
