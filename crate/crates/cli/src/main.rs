use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rhodec::mav::MavDomainParams;
use rhodec::policy::PolicyDocument;
use rhodec::sim::{parse_grid, run_batch, SimError};
use rhodec::tracking::{TrackingController, TrackingError, TrackingScenario};
use rhodec::{
    aggregate_stats, build_mav_domain, make_baseline_policy, parse_model, policy_value, prior_sweep_evaluation,
    simulate_tracking, validate_model, write_model, BaselineKind, Controller, EpisodeConfig, HeuristicKind, JointPolicy,
    MaaStar, RhoDecPomdp, SolveError,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rhodec", version, about = "Decentralized active-perception planning with MAA*")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write tabular output as CSV to this file.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model file, or `mav` for the built-in two-MAV domain.
    #[arg(long, default_value = "mav")]
    model: String,
    /// Prior probability that the target is neutral (built-in domain only).
    #[arg(long, default_value_t = 0.5)]
    p_neutral: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an optimal joint policy.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        /// Admissible heuristic: pomdp or mdp.
        #[arg(long, default_value = "pomdp")]
        heuristic: HeuristicKind,
        /// Stop after this many node expansions.
        #[arg(long)]
        max_expansions: Option<u64>,
        /// Write the policy tree as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact value of a stored policy or a named baseline.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        /// Policy JSON written by `solve --out`.
        #[arg(long, conflicts_with = "baseline")]
        policy: Option<PathBuf>,
        /// Baseline name, e.g. cameras_only or turn_taking_1.
        #[arg(long)]
        baseline: Option<BaselineKind>,
    },
    /// Receding-horizon execution with periodic communication.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// optimal, or a baseline name.
        #[arg(long, default_value = "optimal")]
        controller: Controller,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, default_value_t = 3)]
        comm: usize,
        #[arg(long, default_value_t = 51)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long)]
        max_expansions: Option<u64>,
    },
    /// Values of the optimum and every baseline over a grid of priors.
    Sweep {
        /// `start:step:end` or a comma-separated list.
        #[arg(long, default_value = "0:0.05:1")]
        grid: String,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
    },
    /// Write the two-MAV domain in the text model format.
    MavDomain {
        #[arg(long, default_value_t = 0.5)]
        p_neutral: f64,
        #[arg(long, default_value_t = 0.85)]
        p0: f64,
        #[arg(long, default_value_t = 0.6)]
        p1: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kalman-filter tracking with sector selection.
    TrackSim {
        /// rho_dec, scanning or random.
        #[arg(long, default_value = "rho_dec")]
        controller: TrackingController,
        #[arg(long, default_value_t = 150)]
        steps: usize,
    },
    /// Parse and check a model file.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
}

enum Failure {
    Input(String),
    Cap(String),
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::ResourceExhausted(_) => Failure::Cap(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Solve(s) => s.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<TrackingError> for Failure {
    fn from(e: TrackingError) -> Self {
        match e {
            TrackingError::Solve(s) => s.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn load_model(args: &ModelArgs) -> Result<RhoDecPomdp, Failure> {
    if args.model == "mav" {
        let params = MavDomainParams { prior_neutral: args.p_neutral, ..MavDomainParams::default() };
        params.check().map_err(input("domain parameters"))?;
        return Ok(build_mav_domain(&params));
    }
    let text = fs::read_to_string(&args.model).map_err(input(&args.model))?;
    parse_model(&text).map_err(input(&args.model))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

#[derive(Serialize)]
struct SolveOutput {
    value: f64,
    root_bound: f64,
    nodes_expanded: u64,
    nodes_generated: u64,
    wall_time_secs: f64,
    policy: PolicyDocument,
}

fn solve(g: &Global, m: &ModelArgs, horizon: usize, heuristic: HeuristicKind, cap: Option<u64>, out: Option<&Path>) -> Outcome {
    let model = load_model(m)?;
    let result = MaaStar::new(&model, horizon).heuristic(heuristic).expansion_cap(cap).solve()?;
    let doc = result.policy.to_document(&model);
    if let Some(path) = out {
        write_file(path, &serde_json::to_string_pretty(&doc).expect("serializable policy"))?;
    }
    if let Some(path) = &g.csv {
        let mut s = String::from("agent,depth,history,action\n");
        for (i, tree) in result.policy.trees().iter().enumerate() {
            for (t, level) in tree.levels().iter().enumerate() {
                for (seq, &a) in level.iter().enumerate() {
                    writeln!(s, "{},{},{},{}", i + 1, t, seq, model.actions(i)[a]).unwrap();
                }
            }
        }
        write_file(path, &s)?;
    }
    let stats = result.stats();
    if g.json {
        print_json(&SolveOutput {
            value: result.value,
            root_bound: stats.root_bound,
            nodes_expanded: stats.nodes_expanded,
            nodes_generated: stats.nodes_generated,
            wall_time_secs: stats.wall_time_secs,
            policy: doc,
        });
    } else {
        println!(
            "value {:.6}  expanded {}  generated {}  time {:.3}s",
            result.value, stats.nodes_expanded, stats.nodes_generated, stats.wall_time_secs
        );
    }
    Ok(())
}

fn evaluate(g: &Global, m: &ModelArgs, horizon: usize, policy: Option<&Path>, baseline: Option<BaselineKind>) -> Outcome {
    let model = load_model(m)?;
    let (name, joint) = match (policy, baseline) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
            let doc: PolicyDocument = serde_json::from_str(&text).map_err(input("policy document"))?;
            let p = JointPolicy::from_document(&model, &doc).map_err(input("policy document"))?;
            (path.display().to_string(), p)
        }
        (None, Some(kind)) => {
            if model.n_agents() != 2 || (0..2).any(|i| model.actions(i).len() != 2) {
                return Err(Failure::Input("baselines need two agents with two actions each".into()));
            }
            (kind.name(), make_baseline_policy(kind, horizon))
        }
        (None, None) => return Err(Failure::Input("pass --policy or --baseline".into())),
    };
    let value = policy_value(&model, &joint, joint.depth());
    if g.json {
        print_json(&serde_json::json!({ "policy": name, "horizon": joint.depth(), "value": value }));
    } else {
        println!("{name}: {value:.6}");
    }
    if let Some(path) = &g.csv {
        write_file(path, &format!("policy,horizon,value\n{name},{},{value}\n", joint.depth()))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    g: &Global,
    m: &ModelArgs,
    controller: Controller,
    horizon: usize,
    comm: usize,
    steps: usize,
    runs: usize,
    cap: Option<u64>,
) -> Outcome {
    let model = load_model(m)?;
    let config = EpisodeConfig {
        total_decisions: steps,
        run_count: runs,
        seed: g.seed,
        expansion_cap: cap,
        ..EpisodeConfig::new(controller, horizon, comm)
    };
    let traces = run_batch(&model, &config)?;
    let totals: Vec<f64> = traces.iter().map(|t| t.total_reward()).collect();
    if let Some(path) = &g.csv {
        let mut s = String::from("run,step,action_1,action_2,obs_1,obs_2,reward,cumulative\n");
        for (run, trace) in traces.iter().enumerate() {
            for r in &trace.steps {
                let label = |v: &[usize], i: usize, names: &dyn Fn(usize) -> Vec<String>| {
                    v.get(i).map(|&x| names(i)[x].clone()).unwrap_or_default()
                };
                let acts = |i| model.actions(i).to_vec();
                let obs = |i| model.observations(i).to_vec();
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    run,
                    r.step,
                    label(&r.actions, 0, &acts),
                    label(&r.actions, 1, &acts),
                    label(&r.observations, 0, &obs),
                    label(&r.observations, 1, &obs),
                    r.reward,
                    r.cumulative
                )
                .unwrap();
            }
        }
        write_file(path, &s)?;
    }
    let summary = if totals.len() >= 2 { Some(aggregate_stats(&totals)?) } else { None };
    if g.json {
        print_json(&serde_json::json!({
            "controller": controller.name(),
            "runs": totals.len(),
            "totals": totals,
            "mean": summary.as_ref().map(|s| s.mean),
            "half_width": summary.as_ref().map(|s| s.half_width),
        }));
    } else {
        match summary {
            Some(s) => println!("{}: {:.2} ± {:.2} over {} runs", controller.name(), s.mean, s.half_width, totals.len()),
            None => println!("{}: {:.2}", controller.name(), totals.first().copied().unwrap_or(0.0)),
        }
    }
    Ok(())
}

fn sweep(g: &Global, grid: &str, horizon: usize) -> Outcome {
    let grid = parse_grid(grid).map_err(Failure::Input)?;
    let rows = prior_sweep_evaluation(&grid, horizon, &MavDomainParams::default())?;
    if let Some(path) = &g.csv {
        let mut s = String::from("prior_neutral,policy,value\n");
        for r in &rows {
            writeln!(s, "{},{},{}", r.prior_neutral, r.policy, r.value).unwrap();
        }
        write_file(path, &s)?;
    }
    if g.json {
        print_json(&rows);
    } else {
        for r in &rows {
            println!("{:.3}  {:14} {:.6}", r.prior_neutral, r.policy, r.value);
        }
    }
    Ok(())
}

fn mav_domain(p_neutral: f64, p0: f64, p1: f64, out: Option<&Path>) -> Outcome {
    let params =
        MavDomainParams { p_stay_neutral: p0, p_stay_hostile: p1, prior_neutral: p_neutral, ..MavDomainParams::default() };
    params.check().map_err(input("domain parameters"))?;
    let text = write_model(&build_mav_domain(&params));
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn track_sim(g: &Global, controller: TrackingController, steps: usize) -> Outcome {
    let scenario = TrackingScenario { controller, steps, seed: g.seed, ..TrackingScenario::default() };
    let metrics = simulate_tracking(&scenario)?;
    if let Some(path) = &g.csv {
        let mut s = String::from("step,entropy_nats,interfered,err_x,err_y,baseline_err_x,baseline_err_y,action_1,action_2\n");
        for r in &metrics.steps {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.entropy_nats,
                r.interfered as u8,
                r.err.x,
                r.err.y,
                r.baseline_err.x,
                r.baseline_err.y,
                r.actions[0],
                r.actions[1]
            )
            .unwrap();
        }
        write_file(path, &s)?;
    }
    if g.json {
        print_json(&serde_json::json!({
            "controller": controller.name(),
            "seed": metrics.seed,
            "steps": metrics.steps.len(),
            "mean_entropy": metrics.mean_entropy,
            "interference_steps": metrics.interference_steps,
            "sse": metrics.sse,
        }));
    } else {
        println!(
            "{}: mean entropy {:.4} nats, interference steps {}, SSE {:.4}",
            controller.name(),
            metrics.mean_entropy,
            metrics.interference_steps,
            metrics.sse
        );
    }
    Ok(())
}

fn validate(g: &Global, path: &Path) -> Outcome {
    let text = fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
    let model = parse_model(&text).map_err(input(&path.display().to_string()))?;
    let report = validate_model(&model);
    if g.json {
        print_json(&serde_json::json!({
            "valid": report.is_valid(),
            "states": model.n_states(),
            "agents": model.n_agents(),
            "joint_actions": model.n_joint_actions(),
            "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        }));
    } else if report.is_valid() {
        println!(
            "ok: {} states, {} agents, {} joint actions, {} joint observations",
            model.n_states(),
            model.n_agents(),
            model.n_joint_actions(),
            model.n_joint_observations()
        );
    }
    if report.is_valid() {
        Ok(())
    } else {
        let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        Err(Failure::Input(lines.join("\n")))
    }
}

fn run(cli: Cli) -> Outcome {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(input("thread pool"))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Solve { model, horizon, heuristic, max_expansions, out } => {
            solve(g, &model, horizon, heuristic, max_expansions, out.as_deref())
        }
        Command::Evaluate { model, horizon, policy, baseline } => evaluate(g, &model, horizon, policy.as_deref(), baseline),
        Command::Simulate { model, controller, horizon, comm, steps, runs, max_expansions } => {
            simulate(g, &model, controller, horizon, comm, steps, runs, max_expansions)
        }
        Command::Sweep { grid, horizon } => sweep(g, &grid, horizon),
        Command::MavDomain { p_neutral, p0, p1, out } => mav_domain(p_neutral, p0, p1, out.as_deref()),
        Command::TrackSim { controller, steps } => track_sim(g, controller, steps),
        Command::Validate { model } => validate(g, &model),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Cap(msg)) => {
            eprintln!("resource cap: {msg}");
            ExitCode::from(3)
        }
    }
}
