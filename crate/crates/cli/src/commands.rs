//! Command-line interface: argument definitions and the four subcommands.
//!
//! Exit codes: 0 success, 1 a bound check failed, 2 usage or parse error,
//! 3 invalid scenario, 4 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use plant_core::controller::{drift_constant, ControllerError};
use plant_core::model::Model;
use plant_core::oracles::{
    lookahead_value, solve_profit, two_price_reduce, OracleError, PriceOption,
};
use plant_core::processes::{parse_trace, ProcessError, StateProcess};
use plant_core::simulator::{
    check_iid_bound, check_markov_bound, check_trace_bound, format_float, log_header, mean_and_se,
    run_episode, run_replications, BoundReport, EpisodeConfig, EpisodeReport, SimError,
};
use thiserror::Error;

use crate::scenario::{parse_scenario, Scenario, ScenarioError};

#[derive(Debug, Parser)]
#[command(
    name = "plantsim",
    version,
    about = "Purchasing and pricing control for assembly plants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the controller and report profit and inventory ranges.
    Simulate(SimulateArgs),
    /// Best stationary profit, the policy achieving it and its two-price form.
    Oracle(ScenarioArgs),
    /// Optimal profit of each T-slot frame of a state trace.
    Lookahead(LookaheadArgs),
    /// Check measured profit against the controller's guaranteed lower bound.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Joint state trace, one `x_id y_id` pair per line; replaces both processes.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    /// Profit weight of the controller.
    #[arg(long = "V", value_name = "FLOAT")]
    pub v: Option<f64>,
    #[arg(long, value_name = "INT")]
    pub slots: Option<u64>,
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "INT")]
    pub replications: Option<u64>,
    /// Start from empty inventory, backed by fake units.
    #[arg(long)]
    pub placeholder: bool,
    /// Price from the factorized demand base without observing the demand state.
    #[arg(long)]
    pub demand_blind: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// Sell from finished-product buffers and assemble during the slot.
    #[arg(long)]
    pub assembly_delay: bool,
    /// Per-slot CSV log of the first replication.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LookaheadArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Frame length in slots.
    #[arg(long = "T", value_name = "INT")]
    pub frame: usize,
    /// Number of frames; defaults to every complete frame of the trace.
    #[arg(long = "J", value_name = "INT")]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    /// Frame length (Markov states and traces).
    #[arg(long = "T", value_name = "INT")]
    pub frame: Option<usize>,
    /// Number of frames (traces).
    #[arg(long = "J", value_name = "INT")]
    pub frames: Option<usize>,
    /// Mixing tolerance of the optimal policy over T slots (Markov states).
    #[arg(long, value_name = "FLOAT")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Scenario(e) if e.is_validation() => 3,
            CliError::Scenario(_) => 2,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        CliError::Scenario(ScenarioError::Process(e))
    }
}

/// Runs a parsed command line. `Ok(false)` means a bound check failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Oracle(args) => oracle(args),
        Command::Lookahead(args) => lookahead(args),
        Command::Compare(args) => compare(args),
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, CliError> {
    let mut s = parse_scenario(&args.scenario)?;
    if let Some(path) = &args.trace {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let model = &s.model;
        let (xs, ys) = parse_trace(
            &text,
            |id| model.supply_index(id),
            |id| model.demand_index(id),
        )?;
        s.process_x = StateProcess::Trace { states: xs };
        s.process_y = StateProcess::Trace { states: ys };
    }
    for m in s.model.unused_materials() {
        eprintln!(
            "warning: material {} feeds no product and is never bought",
            m + 1
        );
    }
    Ok(s)
}

fn apply(s: &mut Scenario, c: &ControlArgs) {
    if c.v.is_some() {
        s.controller.v = c.v;
    }
    s.controller.placeholder |= c.placeholder;
    s.controller.demand_blind |= c.demand_blind;
    if let Some(seed) = c.seed {
        s.episode.seed = seed;
    }
    if let Some(r) = c.replications {
        s.episode.replications = r;
    }
    match (c.slots, joint_trace(s)) {
        (Some(slots), _) => s.episode.horizon = slots,
        (None, Some(trace)) => s.episode.horizon = trace.len() as u64,
        (None, None) => {}
    }
}

/// The `(x, y)` sequence when both processes are traces of equal length.
fn joint_trace(s: &Scenario) -> Option<Vec<(usize, usize)>> {
    match (&s.process_x, &s.process_y) {
        (StateProcess::Trace { states: xs }, StateProcess::Trace { states: ys })
            if xs.len() == ys.len() =>
        {
            Some(xs.iter().copied().zip(ys.iter().copied()).collect())
        }
        _ => None,
    }
}

fn require_trace(s: &Scenario) -> Result<Vec<(usize, usize)>, CliError> {
    joint_trace(s).ok_or_else(|| {
        CliError::Usage("needs trace processes of equal length for x and y (use --trace)".into())
    })
}

fn fmt_vec<T: Copy + Into<f64>>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(|&x| format_float(x.into())).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_u64s(v: &[u64]) -> String {
    let items: Vec<String> = v.iter().map(u64::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn is_bound_breach(e: &SimError) -> bool {
    matches!(
        e,
        SimError::Controller(ControllerError::InvariantViolation { .. })
    )
}

/// `None` after reporting a queue-bound breach.
fn breach_to_none<T>(result: Result<T, SimError>) -> Result<Option<T>, CliError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_bound_breach(&e) => {
            eprintln!("bound violated: {e}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn write_log(path: &Path, model: &Model, report: &EpisodeReport) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(log_header(model)).map_err(io)?;
    for record in &report.log {
        w.write_record(record.fields(model)).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn simulate(args: &SimulateArgs) -> Result<bool, CliError> {
    let mut s = load(&args.scenario)?;
    apply(&mut s, &args.control);
    let model = &s.model;
    let params = s.controller.params(model)?;
    let reps = s.episode.replications.max(1);
    let mut ec = EpisodeConfig::jpp(params.clone(), s.episode.horizon, s.episode.seed)
        .with_processes(s.process_x.clone(), s.process_y.clone());
    ec.assembly_delay = args.assembly_delay;

    let mut reports = Vec::new();
    if let Some(path) = &args.out {
        let Some(first) = breach_to_none(run_episode(model, &ec.clone().with_log()))? else {
            return Ok(false);
        };
        write_log(path, model, &first)?;
        reports.push(first);
    }
    let done = reports.len() as u64;
    if reps > done {
        let Some(rest) = breach_to_none(run_replications(
            model,
            &ec.clone().with_stream(done),
            reps - done,
        ))?
        else {
            return Ok(false);
        };
        reports.extend(rest);
    }

    let averages: Vec<f64> = reports.iter().map(|r| r.metrics.average_profit()).collect();
    let (mean, se) = if reports.len() == 1 {
        (averages[0], reports[0].metrics.batch_standard_error())
    } else {
        mean_and_se(&averages)
    };
    let slots = reports[0].metrics.slots as f64;
    let nominal = reports
        .iter()
        .map(|r| r.metrics.total_phi / slots)
        .sum::<f64>()
        / reports.len() as f64;
    let materials = model.cfg().materials();
    let mut qmin = vec![u64::MAX; materials];
    let mut qmax = vec![0; materials];
    for r in &reports {
        for m in 0..materials {
            qmin[m] = qmin[m].min(r.metrics.queue_min[m]);
            qmax[m] = qmax[m].max(r.metrics.queue_max[m]);
        }
    }
    let ignored = |r: &EpisodeReport| {
        if params.strict_bounds {
            0
        } else {
            r.metrics.upper_violations + r.metrics.lower_violations
        }
    };
    let violations: u64 = reports
        .iter()
        .map(|r| r.metrics.violations() - ignored(r))
        .sum();

    println!(
        "V = {}, theta = {}, B = {}",
        format_float(params.v),
        fmt_vec(&params.theta),
        format_float(drift_constant(model))
    );
    println!(
        "slots = {}, replications = {}, seed = {}",
        s.episode.horizon,
        reports.len(),
        s.episode.seed
    );
    println!("average profit = {mean:.6} (se {se:.6})");
    println!("average nominal profit = {nominal:.6}");
    println!(
        "inventory min = {}, max = {}",
        fmt_u64s(&qmin),
        fmt_u64s(&qmax)
    );
    println!(
        "guaranteed min = {}, max = {}",
        fmt_u64s(model.mu_max()),
        fmt_vec(&params.queue_ceiling(model))
    );
    if args.assembly_delay {
        println!(
            "startup cost = {}",
            format_float(reports[0].metrics.startup_cost)
        );
    }
    println!("violations = {violations}");
    if let Some(path) = &args.out {
        println!("wrote {}", path.display());
    }
    Ok(violations == 0)
}

fn describe_option(model: &Model, k: usize, o: PriceOption) -> String {
    match o {
        PriceOption::Idle => "withhold".into(),
        PriceOption::Offer(i) => format!("price {}", format_float(model.cfg().price(k, i))),
    }
}

fn oracle(args: &ScenarioArgs) -> Result<bool, CliError> {
    let s = load(args)?;
    let model = &s.model;
    let px = s
        .process_x
        .long_run_distribution(model.supply_states().len())?;
    let py = s
        .process_y
        .long_run_distribution(model.demand_states().len())?;
    let policy = solve_profit(model, &px, &py)?;
    let reduced = two_price_reduce(model, &policy)?;

    println!("phi_opt = {:.6}", policy.phi_opt);
    println!("purchase cost per slot = {:.6}", policy.c_hat);
    println!("sales margin per slot = {:.6}", policy.r_hat);
    println!("purchases per slot = {}", fmt_vec(&policy.a_hat));
    println!("consumption per slot = {}", fmt_vec(&policy.mu_hat));
    println!("purchasing:");
    for (x, dist) in policy.purchase_dist.iter().enumerate() {
        for (a, p) in dist {
            println!(
                "  {} (freq {:.6}): buy {} w.p. {p:.6}",
                model.supply(x).id,
                px[x],
                fmt_u64s(a)
            );
        }
    }
    println!("pricing:");
    for (k, rows) in policy.price_dist.iter().enumerate() {
        for (y, dist) in rows.iter().enumerate() {
            for &(o, p) in dist {
                println!(
                    "  product {}, {} (freq {:.6}): {} w.p. {p:.6}",
                    k + 1,
                    model.demand(y).id,
                    py[y],
                    describe_option(model, k, o)
                );
            }
        }
    }
    println!("two-price reduction:");
    for (k, rows) in reduced.entries.iter().enumerate() {
        for (y, entry) in rows.iter().enumerate() {
            let support: Vec<String> = entry
                .support
                .iter()
                .map(|&(o, p)| format!("{} w.p. {p:.6}", describe_option(model, k, o)))
                .collect();
            println!(
                "  product {}, {}: {}; demand rate {:.6}, margin {:.6} (was {:.6})",
                k + 1,
                model.demand(y).id,
                support.join(" + "),
                entry.d,
                entry.r_star,
                entry.r_hat
            );
        }
    }
    Ok(true)
}

fn frame_count(trace_len: usize, frame: usize, frames: Option<usize>) -> Result<usize, CliError> {
    if frame == 0 {
        return Err(CliError::Usage("--T must be at least 1".into()));
    }
    let j = frames.unwrap_or(trace_len / frame);
    if j == 0 || j * frame > trace_len {
        return Err(CliError::Usage(format!(
            "trace has {trace_len} slots, too few for {} frames of {frame}",
            j.max(1)
        )));
    }
    Ok(j)
}

fn lookahead(args: &LookaheadArgs) -> Result<bool, CliError> {
    let s = load(&args.scenario)?;
    let trace = require_trace(&s)?;
    let j = frame_count(trace.len(), args.frame, args.frames)?;
    let mut total = 0.0;
    for f in 0..j {
        let start = f * args.frame;
        let r = lookahead_value(&s.model, &trace[start..start + args.frame])?;
        total += r.phi_t;
        println!(
            "frame {f} (slots {start}..{}): phi_T = {:.6}",
            start + args.frame,
            r.phi_t
        );
    }
    println!("average per slot = {:.6}", total / (j * args.frame) as f64);
    Ok(true)
}

fn print_bound_report(r: &BoundReport, b: f64, v: f64) {
    println!("phi_opt = {:.6}", r.phi_opt);
    println!("bound = {:.6}", r.bound);
    println!(
        "average profit = {:.6} (se {:.6}, {} replications)",
        r.mean, r.se, r.replications
    );
    println!(
        "gap = {:.6}, B/V = {:.6}, allowed with noise = {:.6}",
        r.gap(),
        b / v,
        r.phi_opt - r.bound + 3.0 * r.se
    );
    println!(
        "inventory min = {}, max = {}",
        fmt_u64s(&r.queue_min),
        fmt_u64s(&r.queue_max)
    );
    println!("violations = {}", r.violations);
}

fn verdict(passed: bool) -> bool {
    println!("result: {}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn compare(args: &CompareArgs) -> Result<bool, CliError> {
    let mut s = load(&args.scenario)?;
    apply(&mut s, &args.control);
    let model = &s.model;
    let params = s.controller.params(model)?;
    let b = drift_constant(model);
    let (seed, reps, horizon) = (
        s.episode.seed,
        s.episode.replications.max(1),
        s.episode.horizon,
    );
    let trace_mode = matches!(s.process_x, StateProcess::Trace { .. })
        || matches!(s.process_y, StateProcess::Trace { .. });

    let outcome = if trace_mode {
        let trace = require_trace(&s)?;
        let frame = args
            .frame
            .ok_or_else(|| CliError::Usage("trace comparison needs --T".into()))?;
        let j = frame_count(trace.len(), frame, args.frames)?;
        check_trace_bound(model, &params, &trace, frame, j, seed, reps).map(|r| {
            println!("check: arbitrary state trace, {j} frames of {frame} slots");
            println!("lookahead average = {:.6}", r.lookahead_average);
            println!("bound = {:.6}", r.bound);
            println!(
                "average profit = {:.6} (se {:.6}, {} replications)",
                r.mean, r.se, r.replications
            );
            println!("violations = {}", r.violations);
            verdict(r.passed)
        })
    } else if let (StateProcess::Iid { probs: px }, StateProcess::Iid { probs: py }) =
        (&s.process_x, &s.process_y)
    {
        check_iid_bound(model, &params, px, py, horizon, seed, reps).map(|r| {
            println!("check: i.i.d. states");
            print_bound_report(&r, b, params.v);
            verdict(r.passed())
        })
    } else {
        let (Some(epsilon), Some(frame)) = (args.epsilon, args.frame) else {
            return Err(CliError::Usage(
                "Markov states need --epsilon and --T".into(),
            ));
        };
        check_markov_bound(
            model,
            &params,
            &s.process_x,
            &s.process_y,
            epsilon,
            frame as u64,
            horizon,
            seed,
            reps,
        )
        .map(|r| {
            println!("check: Markov states, epsilon = {epsilon}, T = {frame}");
            print_bound_report(&r, b, params.v);
            verdict(r.passed())
        })
    };
    Ok(breach_to_none(outcome)?.unwrap_or_else(|| verdict(false)))
}
