use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hlmdp::domains::{Agv, Taxi};
use hlmdp::experiment::{
    aggregate, read_runs, run, select_best, sweep, write_report, Aggregate, Domain, ExperimentConfig, Layout,
    Method, SweepGrid,
};
use hlmdp::hierarchy::{
    check_projection, solve_bottom_up, validate_graph, BottomUpOptions, HierarchicalProblem, RewardMode, TaskGraph,
};
use hlmdp::solver::value_of;
use hlmdp::{direct_solve, power_iterate, solve_auto, solve_exact, Error, Lmdp, SolveOptions};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hlmdp", version, about = "Hierarchical linearly-solvable MDP solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact solution of a model file, a task graph or a domain preset
    Solve(SolveArgs),
    /// One learning run per seed
    Learn(LearnArgs),
    /// Runs a grid of methods and schedule constants, then aggregates
    Sweep {
        /// Grid file (JSON)
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregates runs found below a directory into summary and plot files
    Report {
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lints a model, task graph, domain layout or experiment config
    Validate(ValidateArgs),
}

#[derive(Args)]
#[group(multiple = false)]
struct Source {
    /// LMDP model file (JSON)
    model: Option<PathBuf>,
    /// Task graph file (JSON); needs --base
    #[arg(long, requires = "base")]
    graph: Option<PathBuf>,
    /// Taxi layout preset (`classic`, `openN`) or JSON file
    #[arg(long)]
    taxi: Option<String>,
    /// AGV layout (`reference`) or JSON file
    #[arg(long)]
    agv: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    /// Direct solve polished by log-domain power iteration
    Exact,
    Direct,
    Power,
    PowerLog,
    /// Linear power iteration, log domain on underflow
    Auto,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// Base model of a task graph
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Temperature for domain presets
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Write the solution here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Experiment config (JSON); flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<Domain>,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    reward_mode: Option<Mode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Accumulated,
    SubtaskValue,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    base: Option<PathBuf>,
    /// Experiment config or sweep grid (JSON)
    #[arg(long, conflicts_with_all = ["model", "graph", "taxi", "agv"])]
    config: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 1, message }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Lmdp, Failure> {
    Lmdp::from_json(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_problem(graph: &Path, base: &Path) -> Result<HierarchicalProblem, Failure> {
    let g = TaskGraph::from_json(&read(graph)?).map_err(|e| invalid(format!("{}: {e}", graph.display())))?;
    Ok(HierarchicalProblem::new(load_model(base)?, g)?)
}

fn domain_problem(src: &Source, base: Option<&Path>, lambda: f64) -> Result<Option<HierarchicalProblem>, Failure> {
    if let Some(g) = &src.graph {
        return load_problem(g, base.expect("clap requires --base")).map(Some);
    }
    if let Some(name) = &src.taxi {
        let Layout::Taxi(layout) = Layout::resolve(Domain::TaxiRoot, name)? else { unreachable!() };
        return Ok(Some(Taxi::new(layout, lambda)?.problem()?));
    }
    if let Some(name) = &src.agv {
        let Layout::Agv(layout) = Layout::resolve(Domain::AgvThroughput, name)? else { unreachable!() };
        let agv = Agv::new(layout, lambda)?;
        eprintln!("goal certificate: {} steps", agv.goal_certificate()?);
        return Ok(Some(agv.problem()?));
    }
    Ok(None)
}

fn emit(text: String, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn solve_model(m: &Lmdp, kind: SolverKind, tol: f64) -> Result<serde_json::Value, Failure> {
    let (z, report) = match kind {
        SolverKind::Exact => solve_exact(m, tol).map(|(z, r)| (z, Some(r)))?,
        SolverKind::Direct => (direct_solve(m)?, None),
        SolverKind::Power => power_iterate(m, &SolveOptions::default().with_tol(tol)).map(|(z, r)| (z, Some(r)))?,
        SolverKind::PowerLog => power_iterate(m, &SolveOptions::log().with_tol(tol)).map(|(z, r)| (z, Some(r)))?,
        SolverKind::Auto => solve_auto(m, &SolveOptions::default().with_tol(tol)).map(|(z, r)| (z, Some(r)))?,
    };
    let values = value_of(&z, m.lambda())?;
    Ok(json!({ "report": report, "log_z": z.log_z(), "values": values }))
}

fn cmd_solve(a: &SolveArgs) -> Result<(), Failure> {
    if let Some(path) = &a.source.model {
        let m = load_model(path)?;
        let out = solve_model(&m, a.solver, a.tol)?;
        return emit(serde_json::to_string_pretty(&out).expect("json"), a.out.as_deref());
    }
    let Some(problem) = domain_problem(&a.source, a.base.as_deref(), a.lambda)? else {
        return Err(invalid("nothing to solve: give a model file, --graph, --taxi or --agv".into()));
    };
    let sol = solve_bottom_up(&problem, &BottomUpOptions::default())?;
    let tasks: Vec<_> = sol
        .tasks
        .iter()
        .map(|t| {
            json!({
                "task": problem.task_name(t.task()),
                "n_states": t.model.lmdp.n_states(),
                "reports": t.reports,
                "values": t.values(),
            })
        })
        .collect();
    let out = json!({ "root": problem.task_name(problem.root()), "tasks": tasks });
    emit(serde_json::to_string_pretty(&out).expect("json"), a.out.as_deref())
}

fn learn_config(a: &LearnArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = a.domain {
        cfg.domain = d;
        if a.layout.is_none() && a.config.is_none() && d == Domain::AgvThroughput {
            cfg.layout = "reference".into();
        }
    }
    if let Some(l) = &a.layout {
        cfg.layout = l.clone();
    }
    if let Some(m) = a.method {
        cfg.method = m;
    }
    if let Some(x) = a.lambda {
        cfg.lambda = x;
    }
    if let Some(x) = a.c {
        cfg.c = x;
    }
    if a.epsilon.is_some() {
        cfg.epsilon = a.epsilon;
    }
    if let Some(x) = a.trials {
        cfg.trials = x;
    }
    if let Some(x) = a.max_steps {
        cfg.max_steps = x;
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(w) = a.window {
        cfg.window = w;
    }
    if let Some(m) = a.reward_mode {
        cfg.reward_mode = match m {
            Mode::Accumulated => RewardMode::Accumulated,
            Mode::SubtaskValue => RewardMode::SubtaskValue,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_learn(a: &LearnArgs) -> Result<(), Failure> {
    let cfg = learn_config(a)?;
    let runs = run(&cfg, Some(&a.out))?;
    for r in &runs {
        println!(
            "{} seed {}: final metric {} after {} steps",
            r.curve.method,
            r.curve.seed,
            r.curve.final_metric().unwrap_or(f64::NAN),
            r.curve.rows.last().map_or(0, |x| x.steps)
        );
    }
    Ok(())
}

fn print_summary(aggs: &[Aggregate]) {
    let best = select_best(aggs);
    for (i, a) in aggs.iter().enumerate() {
        let mark = if best.get(&a.method) == Some(&i) { " *" } else { "" };
        println!("{:<28} {:>14.6}{mark}", a.name(), a.final_median().unwrap_or(f64::NAN));
    }
}

fn cmd_sweep(grid: &Path, out: &Path) -> Result<(), Failure> {
    let g: SweepGrid = serde_json::from_str(&read(grid)?).map_err(|e| invalid(format!("{}: {e}", grid.display())))?;
    let runs = sweep(&g, Some(out))?;
    let aggs = aggregate(&runs)?;
    write_report(out, &aggs)?;
    print_summary(&aggs);
    Ok(())
}

fn cmd_report(runs: &Path, out: &Path) -> Result<(), Failure> {
    let loaded = read_runs(runs)?;
    if loaded.is_empty() {
        return Err(invalid(format!("no runs found below {}", runs.display())));
    }
    let aggs = aggregate(&loaded)?;
    write_report(out, &aggs)?;
    print_summary(&aggs);
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    if let Some(p) = &a.config {
        let text = read(p)?;
        let parsed = match serde_json::from_str::<SweepGrid>(&text) {
            Ok(g) => g.cells().iter().try_for_each(|c| c.validate().and(c.resolve_layout().map(|_| ()))),
            Err(_) => ExperimentConfig::from_json(&text).and_then(|c| c.resolve_layout().map(|_| ())),
        };
        parsed.map_err(|e| invalid(format!("{}: {e}", p.display())))?;
        println!("ok");
        return Ok(());
    }
    if let Some(path) = &a.source.model {
        let file: hlmdp::lmdp::LmdpFile =
            serde_json::from_str(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let m = file.into_model().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let violations = m.validate();
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("{v}");
            }
            return Err(invalid(format!("{} violation(s)", violations.len())));
        }
        let dead = m.dead_states();
        if !dead.is_empty() {
            return Err(invalid(format!("{} state(s) cannot reach a terminal, first {}", dead.len(), dead[0])));
        }
        println!("ok: {} states, {} terminals", m.n_states(), m.terminals().count());
        return Ok(());
    }
    let Some(problem) = domain_problem(&a.source, a.base.as_deref(), 1.0)? else {
        return Err(invalid("nothing to validate: give a model file, --graph, --taxi, --agv or --config".into()));
    };
    let mut violations = validate_graph(&problem);
    for i in 0..problem.n_tasks() {
        violations.extend(check_projection(&problem, i));
    }
    if violations.is_empty() {
        println!("ok: {} tasks over {} base states", problem.n_tasks(), problem.base().n_states());
        return Ok(());
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(invalid(format!("{} violation(s)", violations.len())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Sweep { grid, out } => cmd_sweep(grid, out),
        Command::Report { runs, out } => cmd_report(runs, out),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
