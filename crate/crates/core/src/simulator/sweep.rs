use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_batch, AgentSpec, ErrorModel, SimConfig, StrategyKind};
use crate::error::{domain, Result};
use crate::game::StageGame;
use crate::plan::PiecewisePlan;
use crate::synthesis::{gt_ode_tail, synthesize_plan, SynthesisOptions};

pub const CSV_HEADER: &str = "T,strategy,k,error_rate,error_model,mean,std_error,n,seed,error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    /// Limited retaliation on the synthesized plan.
    Lr,
    /// Grim trigger on the same synthesized plan.
    Gt,
    /// Grim trigger on the grim-trigger ODE plan over the whole horizon.
    GtOde,
}

impl StrategySpec {
    pub fn label(self) -> &'static str {
        match self {
            StrategySpec::Lr => "lr",
            StrategySpec::Gt => "gt",
            StrategySpec::GtOde => "gt_ode",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lr" => Some(StrategySpec::Lr),
            "gt" => Some(StrategySpec::Gt),
            "gt_ode" => Some(StrategySpec::GtOde),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub lambda: f64,
    pub t_values: Vec<f64>,
    pub k_values: Vec<f64>,
    pub error_rates: Vec<f64>,
    pub error_model: ErrorModel,
    pub strategies: Vec<StrategySpec>,
    pub replications: usize,
    pub master_seed: u64,
    pub synthesis: SynthesisOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub strategy: StrategySpec,
    pub k: f64,
    pub error_rate: f64,
    pub error_model: ErrorModel,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub error: Option<String>,
}

fn agent_for(
    game: &StageGame,
    spec: StrategySpec,
    lambda: f64,
    horizon: f64,
    k: f64,
    lr_plan: &std::result::Result<Arc<PiecewisePlan>, String>,
    ode_steps: usize,
) -> std::result::Result<AgentSpec, String> {
    match spec {
        StrategySpec::Lr => Ok(AgentSpec {
            kind: StrategyKind::Lr,
            plan: lr_plan.clone()?,
            k,
        }),
        StrategySpec::Gt => Ok(AgentSpec {
            kind: StrategyKind::Gt,
            plan: lr_plan.clone()?,
            k: 1.0,
        }),
        StrategySpec::GtOde => gt_ode_tail(game, lambda, horizon, ode_steps)
            .map(|tail| AgentSpec::gt(tail.plan))
            .map_err(|e| e.to_string()),
    }
}

/// Simulates every `(k, error rate, T, strategy)` cell, in that nesting order.
///
/// Plans are synthesized once per `(T, k)`. Every cell uses the same master
/// seed, so strategies are compared on common random numbers. A cell that
/// cannot be built or simulated yields a row carrying the error message.
pub fn sweep(game: &StageGame, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if config.t_values.is_empty() {
        return Err(domain("T range is empty"));
    }
    if config.k_values.is_empty() || config.error_rates.is_empty() || config.strategies.is_empty() {
        return Err(domain("k, error-rate and strategy lists must be non-empty"));
    }
    let plans: Vec<Vec<std::result::Result<Arc<PiecewisePlan>, String>>> = config
        .k_values
        .iter()
        .map(|&k| {
            config
                .t_values
                .iter()
                .map(|&t| {
                    synthesize_plan(game, config.lambda, t, k, &config.synthesis)
                        .map(|s| Arc::new(s.plan.to_piecewise()))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (ki, &k) in config.k_values.iter().enumerate() {
        for &error_rate in &config.error_rates {
            for (ti, &horizon) in config.t_values.iter().enumerate() {
                for &strategy in &config.strategies {
                    let outcome = agent_for(
                        game,
                        strategy,
                        config.lambda,
                        horizon,
                        k,
                        &plans[ki][ti],
                        config.synthesis.ode_steps,
                    )
                    .and_then(|agent| {
                        let sim = SimConfig {
                            lambda: config.lambda,
                            horizon,
                            error_rate,
                            error_model: config.error_model,
                            replications: config.replications,
                            master_seed: config.master_seed,
                            agents: [agent.clone(), agent],
                            record_episodes: false,
                            injected_deviation: None,
                        };
                        run_batch(game, &sim).map_err(|e| e.to_string())
                    });
                    let (mean, std_error, n, error) = match outcome {
                        Ok(r) => (Some(r.mean_average), Some(r.average_std_error), r.n, None),
                        Err(msg) => (None, None, 0, Some(msg)),
                    };
                    rows.push(SweepRow {
                        horizon,
                        strategy,
                        k,
                        error_rate,
                        error_model: config.error_model,
                        mean,
                        std_error,
                        n,
                        seed: config.master_seed,
                        error,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Shortest-form rendering with 17 significant digits, like C's `%.17g`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..17).contains(&exp) {
        trim(&format!("{x:.*}", (16 - exp) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders sweep rows as CSV with a fixed header and column order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            format_real(r.horizon),
            r.strategy.label(),
            format_real(r.k),
            format_real(r.error_rate),
            r.error_model.label(),
            opt(r.mean),
            opt(r.std_error),
            r.n,
            r.seed,
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_printf_g17() {
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(50.0), "50");
        assert_eq!(format_real(0.33), "0.33000000000000002");
        assert_eq!(format_real(1e20), "1e+20");
        assert_eq!(format_real(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(format_real(-2.5), "-2.5");
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(123456.0), "123456");
    }

    #[test]
    fn formatted_values_round_trip() {
        for x in [
            std::f64::consts::PI,
            1.0 / 3.0,
            2.0f64.sqrt() * 1e-9,
            6.02e23,
            0.30000000000000004,
        ] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn row_order_and_errors() {
        let g = StageGame::continuous_pd();
        let config = SweepConfig {
            lambda: 1.0,
            t_values: vec![1.0, 2.0],
            k_values: vec![0.3, 0.6],
            error_rates: vec![0.0, 0.1],
            error_model: ErrorModel::UniformRandom,
            strategies: vec![StrategySpec::Lr, StrategySpec::Gt],
            replications: 20,
            master_seed: 9,
            synthesis: SynthesisOptions::default(),
        };
        let rows = sweep(&g, &config).unwrap();
        assert_eq!(rows.len(), 16);
        assert_eq!(
            (rows[0].k, rows[0].error_rate, rows[0].horizon),
            (0.3, 0.0, 1.0)
        );
        assert_eq!(rows[1].strategy, StrategySpec::Gt);
        assert_eq!(rows[2].horizon, 2.0);
        assert_eq!(rows[4].error_rate, 0.1);
        assert_eq!(rows[8].k, 0.6);
        assert!(rows.iter().all(|r| r.error.is_none()));
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with(CSV_HEADER));
        let empty = SweepConfig {
            t_values: vec![],
            ..config.clone()
        };
        assert!(sweep(&g, &empty).is_err());
        let bad = SweepConfig {
            k_values: vec![1.5],
            ..config
        };
        let rows = sweep(&g, &bad).unwrap();
        assert!(rows.iter().all(|r| r.error.is_some() && r.mean.is_none()));
    }
}
