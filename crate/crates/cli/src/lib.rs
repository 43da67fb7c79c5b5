//! Command implementations for the `revgame` binary.
//!
//! Every command parses its flags, calls into `revgame_core`, and writes
//! machine-readable output. Commands that write files also write a
//! `<file>.manifest.json` recording the invocation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use revgame_core::equilibrium::DEFAULT_EPSILON;
use revgame_core::plan::{expected_payoff, LrStrategy, MpcPlan};
use revgame_core::simulator::{
    episode_rng, format_real, run_batch, run_episode, sweep, sweep_csv, AgentSpec, ErrorModel,
    SimConfig, StrategySpec, SweepConfig, SweepRow,
};
use revgame_core::synthesis::{gt_ode_tail, synthesize_plan, SynthesisOptions, TailPolicy};
use revgame_core::{verify_spe, Error, GameSpec, StageGame};

pub const THREADS_ENV: &str = "REVISION_EQ_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYTIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "revgame",
    version,
    about = "Limited-retaliation plans for revision games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a stage game against the assumptions the construction needs.
    Validate(ValidateArgs),
    /// Build the welfare-maximizing plan for a retaliation coefficient.
    Synthesize(SynthesizeArgs),
    /// Certify a plan file against the incentive constraint.
    Verify(VerifyArgs),
    /// Expected payoff of a plan file.
    Payoff(PayoffArgs),
    /// Monte-Carlo play of a plan file.
    Simulate(SimulateArgs),
    /// Simulate a grid of horizons, retaliation coefficients and error rates.
    Sweep(SweepArgs),
    /// Sweep two strategies and report their difference per cell.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailArg {
    EpsilonRelax,
    GtOde,
}

impl From<TailArg> for TailPolicy {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::EpsilonRelax => TailPolicy::EpsilonRelax,
            TailArg::GtOde => TailPolicy::GtOde,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModelArg {
    UniformRandom,
    Defect,
}

impl From<ErrorModelArg> for ErrorModel {
    fn from(m: ErrorModelArg) -> Self {
        match m {
            ErrorModelArg::UniformRandom => ErrorModel::UniformRandom,
            ErrorModelArg::Defect => ErrorModel::Defect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    Lr,
    Gt,
    GtOde,
}

impl From<StrategyArg> for StrategySpec {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Lr => StrategySpec::Lr,
            StrategyArg::Gt => StrategySpec::Gt,
            StrategyArg::GtOde => StrategySpec::GtOde,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GameArg {
    /// `pd`, `cournot` (p0=10, c=5, b=1) or a path to a JSON game file.
    #[arg(long, default_value = "pd")]
    pub game: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthesisArgs {
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "epsilon-relax")]
    pub tail_policy: TailArg,
    /// Largest expected number of opportunities left in the ultimate slot.
    #[arg(long, default_value_t = 0.01)]
    pub tail_mass: f64,
    #[arg(long, default_value_t = 200)]
    pub max_slots: usize,
    #[arg(long, default_value_t = 1000)]
    pub ode_steps: usize,
}

impl SynthesisArgs {
    fn options(&self) -> SynthesisOptions {
        SynthesisOptions {
            epsilon: self.epsilon,
            tail_policy: self.tail_policy.into(),
            tail_mass: self.tail_mass,
            max_slots: self.max_slots,
            ode_steps: self.ode_steps,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long)]
    pub k: f64,
    #[command(flatten)]
    pub synthesis: SynthesisArgs,
    /// Grid size for the post-synthesis verification.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Defaults to the epsilon stored in the plan.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write the full per-time report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PayoffArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Remaining time to evaluate from; defaults to the plan horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, value_enum, default_value = "lr")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Defaults to the plan horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub error_rate: f64,
    #[arg(long, value_enum, default_value = "uniform-random")]
    pub error_model: ErrorModelArg,
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub ode_steps: usize,
    /// Dump per-step traces of the first `--trace-episodes` episodes as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub trace_episodes: usize,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub game: GameArg,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Horizons as `start:stop:step` (inclusive).
    #[arg(long = "T-range", value_name = "START:STOP:STEP")]
    pub t_range: String,
    /// Comma-separated retaliation coefficients.
    #[arg(long = "k", value_delimiter = ',', required = true)]
    pub k: Vec<f64>,
    /// Comma-separated error rates.
    #[arg(long = "errors", value_delimiter = ',', required = true)]
    pub errors: Vec<f64>,
    #[arg(long, value_enum, default_value = "uniform-random")]
    pub error_model: ErrorModelArg,
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub synthesis: SynthesisArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lr,gt")]
    pub strategies: Vec<StrategyArg>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value = "lr")]
    pub a: StrategyArg,
    #[arg(long, value_enum, default_value = "gt")]
    pub b: StrategyArg,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Analytic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Analytic(_) => EXIT_ANALYTIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Analytic(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) => CliError::Analytic(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CmdResult = Result<i32, CliError>;

/// Builds a game from a builtin name or a JSON game file.
pub fn load_game(spec: &str) -> Result<StageGame, CliError> {
    match spec {
        "pd" => Ok(StageGame::continuous_pd()),
        "cournot" => Ok(StageGame::cournot(10.0, 5.0, 1.0)?),
        path => Ok(GameSpec::load(path)?.build()?),
    }
}

fn game_inputs(spec: &str) -> Vec<PathBuf> {
    match spec {
        "pd" | "cournot" => vec![],
        path => vec![PathBuf::from(path)],
    }
}

/// Parses `start:stop:step` into the inclusive list of horizons.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("T range must be START:STOP:STEP, got {text:?}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if count < 0.0 {
        return Err(CliError::Usage(format!("T range {text:?} is empty")));
    }
    Ok((0..=count as usize)
        .map(|i| start + i as f64 * step)
        .collect())
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, P: Serialize> {
    pub command: &'a str,
    pub params: &'a P,
    pub seed: Option<u64>,
    pub version: &'a str,
    pub timestamp: u64,
    pub input_digests: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_manifest<P: Serialize>(
    out: &Path,
    command: &str,
    params: &P,
    seed: Option<u64>,
    inputs: &[PathBuf],
) -> Result<(), CliError> {
    let mut input_digests = BTreeMap::new();
    for path in inputs {
        input_digests.insert(path.display().to_string(), sha256_file(path)?);
    }
    let manifest = RunManifest {
        command,
        params,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        input_digests,
    };
    std::fs::write(
        manifest_path(out),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Prints the validation report for `game`; exit 1 if any check fails.
pub fn validate_game(game: &StageGame, grid: usize, out: &mut dyn Write) -> CmdResult {
    let report = game.validate(grid)?;
    print_json(out, &report)?;
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_ANALYTIC
    })
}

fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> CmdResult {
    let game = load_game(&args.game.game)?;
    validate_game(&game, args.grid, out)
}

fn cmd_synthesize(args: &SynthesizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let game = load_game(&args.game.game)?;
    let s = synthesize_plan(
        &game,
        args.lambda,
        args.horizon,
        args.k,
        &args.synthesis.options(),
    )?;
    let piecewise = s.plan.to_piecewise();
    let report = verify_spe(
        &game,
        &piecewise,
        args.k,
        args.lambda,
        args.grid,
        args.synthesis.epsilon,
    )?;
    let payoff = expected_payoff(&game, &piecewise, args.lambda, args.horizon)?;
    if s.non_cooperative {
        writeln!(err, "warning: the terminal action sustains no cooperation; the plan is essentially the stage Nash action")?;
    }
    if let Some(path) = &args.out {
        s.plan.save(path)?;
        write_manifest(
            path,
            "synthesize",
            args,
            None,
            &game_inputs(&args.game.game),
        )?;
    }
    print_json(
        out,
        &json!({
            "slots": s.plan.slot_count(),
            "terminal_action": s.plan.terminal_action(),
            "min_margin": report.min_margin,
            "verdict": report.verdict,
            "expected_payoff": payoff,
            "non_cooperative": s.non_cooperative,
        }),
    )?;
    Ok(if report.verdict.is_pass() {
        EXIT_OK
    } else {
        EXIT_ANALYTIC
    })
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let game = load_game(&args.game.game)?;
    let plan = MpcPlan::load(&args.plan)?;
    plan.check_invariants(&game)?;
    let epsilon = args.epsilon.unwrap_or(plan.epsilon());
    let report = verify_spe(
        &game,
        &plan.to_piecewise(),
        plan.k(),
        args.lambda,
        args.grid,
        epsilon,
    )?;
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
        let mut inputs = game_inputs(&args.game.game);
        inputs.push(args.plan.clone());
        write_manifest(path, "verify", args, None, &inputs)?;
    }
    print_json(
        out,
        &json!({
            "verdict": report.verdict,
            "min_margin": report.min_margin,
            "min_margin_time": report.min_margin_time,
            "grid_points": report.grid.len(),
            "epsilon": epsilon,
        }),
    )?;
    Ok(if report.verdict.is_pass() {
        EXIT_OK
    } else {
        EXIT_ANALYTIC
    })
}

fn cmd_payoff(args: &PayoffArgs, out: &mut dyn Write) -> CmdResult {
    let game = load_game(&args.game.game)?;
    let plan = MpcPlan::load(&args.plan)?;
    let horizon = args.horizon.unwrap_or(plan.horizon());
    let value = expected_payoff(&game, &plan.to_piecewise(), args.lambda, horizon)?;
    print_json(
        out,
        &json!({ "horizon": horizon, "expected_payoff": value }),
    )?;
    Ok(EXIT_OK)
}

fn agent_for(
    game: &StageGame,
    strategy: StrategyArg,
    plan: &MpcPlan,
    lambda: f64,
    horizon: f64,
    ode_steps: usize,
) -> Result<AgentSpec, CliError> {
    Ok(match strategy {
        StrategyArg::Lr => AgentSpec::lr(&LrStrategy::from_mpc(plan)),
        StrategyArg::Gt => AgentSpec::gt(plan.to_piecewise()),
        StrategyArg::GtOde => AgentSpec::gt(gt_ode_tail(game, lambda, horizon, ode_steps)?.plan),
    })
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let game = load_game(&args.game.game)?;
    let plan = MpcPlan::load(&args.plan)?;
    let horizon = args.horizon.unwrap_or(plan.horizon());
    let agent = agent_for(
        &game,
        args.strategy,
        &plan,
        args.lambda,
        horizon,
        args.ode_steps,
    )?;
    let config = SimConfig {
        lambda: args.lambda,
        horizon,
        error_rate: args.error_rate,
        error_model: args.error_model.into(),
        replications: args.replications,
        master_seed: args.seed,
        agents: [agent.clone(), agent],
        record_episodes: false,
        injected_deviation: None,
    };
    let result = run_batch(&game, &config)?;
    let mut inputs = game_inputs(&args.game.game);
    inputs.push(args.plan.clone());
    if let Some(path) = &args.trace {
        let mut text = String::new();
        for r in 0..args.trace_episodes.min(args.replications) {
            let mut rng = episode_rng(args.seed, r);
            let ep = run_episode(&game, &config, &mut rng, true);
            for step in &ep.trace {
                text.push_str(&serde_json::to_string(
                    &json!({ "episode": r, "step": step }),
                )?);
                text.push('\n');
            }
        }
        std::fs::write(path, text)?;
        write_manifest(path, "simulate", args, Some(args.seed), &inputs)?;
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, serde_json::to_string_pretty(&result)? + "\n")?;
            write_manifest(path, "simulate", args, Some(args.seed), &inputs)?;
        }
        None => print_json(out, &result)?,
    }
    Ok(EXIT_OK)
}

fn run_grid(grid: &GridArgs, strategies: Vec<StrategySpec>) -> Result<Vec<SweepRow>, CliError> {
    let game = load_game(&grid.game.game)?;
    let t_values = parse_range(&grid.t_range)?;
    let config = SweepConfig {
        lambda: grid.lambda,
        t_values,
        k_values: grid.k.clone(),
        error_rates: grid.errors.clone(),
        error_model: grid.error_model.into(),
        strategies,
        replications: grid.replications,
        master_seed: grid.seed,
        synthesis: grid.synthesis.options(),
    };
    Ok(sweep(&game, &config)?)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CmdResult {
    if args.strategies.is_empty() {
        return Err(CliError::Usage("no strategies given".into()));
    }
    let rows = run_grid(
        &args.grid,
        args.strategies.iter().map(|&s| s.into()).collect(),
    )?;
    emit(&sweep_csv(&rows), args.grid.out.as_deref(), out)?;
    if let Some(path) = &args.grid.out {
        write_manifest(
            path,
            "sweep",
            args,
            Some(args.grid.seed),
            &game_inputs(&args.grid.game.game),
        )?;
    }
    Ok(EXIT_OK)
}

pub const COMPARE_HEADER: &str = "T,k,error_rate,a,b,mean_a,mean_b,diff,combined_std_error,z,error";

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> CmdResult {
    if args.a == args.b {
        return Err(CliError::Usage("--a and --b must differ".into()));
    }
    let (a, b): (StrategySpec, StrategySpec) = (args.a.into(), args.b.into());
    let rows = run_grid(&args.grid, vec![a, b])?;
    let f = format_real;
    let mut text = String::from(COMPARE_HEADER);
    text.push('\n');
    for pair in rows.chunks(2) {
        let (ra, rb) = (&pair[0], &pair[1]);
        let prefix = format!(
            "{},{},{},{},{}",
            f(ra.horizon),
            f(ra.k),
            f(ra.error_rate),
            a.label(),
            b.label()
        );
        match (ra.mean, rb.mean, ra.std_error, rb.std_error) {
            (Some(ma), Some(mb), Some(sa), Some(sb)) => {
                let se = (sa * sa + sb * sb).sqrt();
                let z = if se > 0.0 {
                    f((ma - mb) / se)
                } else {
                    String::new()
                };
                text.push_str(&format!(
                    "{prefix},{},{},{},{},{z},\n",
                    f(ma),
                    f(mb),
                    f(ma - mb),
                    f(se)
                ));
            }
            _ => {
                let msg = ra
                    .error
                    .clone()
                    .or_else(|| rb.error.clone())
                    .unwrap_or_default();
                text.push_str(&format!("{prefix},,,,,,\"{}\"\n", msg.replace('"', "\"\"")));
            }
        }
    }
    emit(&text, args.grid.out.as_deref(), out)?;
    if let Some(path) = &args.grid.out {
        write_manifest(
            path,
            "compare",
            args,
            Some(args.grid.seed),
            &game_inputs(&args.grid.game.game),
        )?;
    }
    Ok(EXIT_OK)
}

/// Worker count from the environment; `None` means the rayon default.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got {v:?}"
            ))),
        },
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, out),
        Command::Synthesize(a) => cmd_synthesize(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Payoff(a) => cmd_payoff(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Compare(a) => cmd_compare(a, out),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    // Output is buffered so commands can run inside a sized worker pool.
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let result = thread_cap().and_then(|cap| match cap {
        None => dispatch(&cli, &mut stdout, &mut stderr),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            pool.install(|| dispatch(&cli, &mut stdout, &mut stderr))
        }
    });
    let _ = out.write_all(&stdout);
    let _ = err.write_all(&stderr);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
