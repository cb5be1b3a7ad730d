use rand::Rng as _;

use crate::domains::{Taxi, TaxiLayout};
use crate::error::Result;
use crate::hierarchy::{solve_bottom_up, solve_task, BottomUpOptions, HierarchicalProblem, SubtaskSolution};
use crate::learning::{rng_for, run_trial, Caps, LearningRateSchedule};
use crate::solver::SolveReport;

use super::{l1_error, Clock, CurveRow, ExperimentConfig, LearningCurve, TaskLearners};

type Outcome = (LearningCurve, Vec<SolveReport>, Option<usize>);

fn options(cfg: &ExperimentConfig) -> BottomUpOptions {
    BottomUpOptions { penalty: cfg.penalty, ..Default::default() }
}

fn navigate_solutions(problem: &HierarchicalProblem, cfg: &ExperimentConfig) -> Result<Vec<SubtaskSolution>> {
    let none = vec![None; problem.n_tasks()];
    (0..4)
        .map(|t| {
            let j = problem.graph().task_index(&Taxi::navigate_name(t)).expect("navigate task");
            solve_task(problem, j, &none, &options(cfg))
        })
        .collect()
}

/// The four navigation tasks; each trial picks a task and a non-terminal
/// start uniformly, and the metric sums the L1 error over tasks.
pub(super) fn navigate(cfg: &ExperimentConfig, layout: &TaxiLayout, seed: u64) -> Result<Outcome> {
    let taxi = Taxi::new(layout.clone(), cfg.lambda)?;
    let problem = taxi.problem()?;
    let sols = navigate_solutions(&problem, cfg)?;
    let models: Vec<_> = sols.iter().map(|s| s.model.lmdp.clone()).collect();
    let policies: Vec<_> = sols.iter().map(|s| s.policy.clone()).collect();
    let optimal: Vec<Vec<f64>> = sols.iter().map(|s| s.values()).collect();
    let terminal: Vec<Vec<bool>> =
        models.iter().map(|m| (0..m.n_states()).map(|s| m.is_terminal(s)).collect()).collect();
    let starts: Vec<Vec<usize>> = terminal
        .iter()
        .map(|t| (0..t.len()).filter(|&s| !t[s]).collect())
        .collect();

    let mut learners = TaskLearners::new(cfg.method, &models, &policies, cfg.epsilon())?;
    let schedule = LearningRateSchedule::new(cfg.c)?;
    let caps = Caps { max_steps: cfg.max_steps };
    let mut rng = rng_for(seed, 0);
    let clock = Clock::start();
    let mut rows = Vec::with_capacity(cfg.trials);
    let mut steps = 0;
    for trial in 0..cfg.trials {
        let j = rng.gen_range(0..4);
        let start = starts[j][rng.gen_range(0..starts[j].len())];
        steps += run_trial(learners.agent(j), start, &schedule, trial, caps, &mut rng, |_, _| {})?.steps;
        let mut metric = 0.0;
        for k in 0..4 {
            metric += l1_error(&learners.values(k, cfg.lambda), &optimal[k], &terminal[k])?;
        }
        rows.push(CurveRow { trial, metric, steps, wall_ms: clock.ms(), clips: learners.clip_events() });
    }
    let reports = sols.into_iter().flat_map(|s| s.reports).collect();
    Ok((LearningCurve { method: cfg.method, seed, rows }, reports, None))
}

/// The root task over exactly solved navigation tasks. Each trial starts at
/// a random taxi cell with the passenger waiting at a non-destination landmark.
pub(super) fn root(cfg: &ExperimentConfig, layout: &TaxiLayout, seed: u64) -> Result<Outcome> {
    let taxi = Taxi::new(layout.clone(), cfg.lambda)?;
    let problem = taxi.problem()?;
    let sol = solve_bottom_up(&problem, &options(cfg))?;
    let root = &sol.tasks[problem.root()];
    let model = root.model.lmdp.clone();
    let optimal = root.values();
    let terminal: Vec<bool> = (0..model.n_states()).map(|s| model.is_terminal(s)).collect();

    let mut learners = TaskLearners::new(cfg.method, &[model], std::slice::from_ref(&root.policy), cfg.epsilon())?;
    let schedule = LearningRateSchedule::new(cfg.c)?;
    let caps = Caps { max_steps: cfg.max_steps };
    let mut rng = rng_for(seed, 0);
    let clock = Clock::start();
    let mut rows = Vec::with_capacity(cfg.trials);
    let mut steps = 0;
    for trial in 0..cfg.trials {
        let start = problem.project(problem.root(), taxi.sample_start(&mut rng));
        steps += run_trial(learners.agent(0), start, &schedule, trial, caps, &mut rng, |_, _| {})?.steps;
        let metric = l1_error(&learners.values(0, cfg.lambda), &optimal, &terminal)?;
        rows.push(CurveRow { trial, metric, steps, wall_ms: clock.ms(), clips: learners.clip_events() });
    }
    let reports = sol.tasks.into_iter().flat_map(|s| s.reports).collect();
    Ok((LearningCurve { method: cfg.method, seed, rows }, reports, None))
}
