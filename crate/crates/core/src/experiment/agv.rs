use crate::domains::agv::{Agv, AgvEnv, AgvLayout, AgvRoot, AgvState, RootOption, N_ORIENTATIONS};
use crate::error::Result;
use crate::hierarchy::RewardMode;
use crate::learning::{
    epsilon_greedy, q_update, rng_for, sample_next, z_update_is, z_update_naive, LearningRateSchedule, QTable,
    Rng, Transition, ZTable,
};
use crate::lmdp::{Lmdp, StateId};
use crate::solver::{optimal_policy, solve_exact, value_of, SolveReport};

use super::{Clock, CurveRow, ExperimentConfig, LearningCurve, Method, TaskLearners};

type Outcome = (LearningCurve, Vec<SolveReport>, Option<usize>);

/// Root learner over `(station, parts)`.
enum RootLearner {
    Z { table: ZTable, importance: bool, clips: u64 },
    Q { table: QTable, epsilon: f64 },
}

impl RootLearner {
    fn new(method: Method, model: &Lmdp, root: &AgvRoot, epsilon: f64) -> Self {
        if method.is_q() {
            let q = (0..root.n_states())
                .map(|r| if model.is_terminal(r) { Vec::new() } else { vec![0.0; root.options(r).len()] })
                .collect();
            RootLearner::Q { table: QTable::from_values(q, model.final_rewards().to_vec()), epsilon }
        } else {
            RootLearner::Z { table: ZTable::new(model), importance: method != Method::Z, clips: 0 }
        }
    }

    /// Picks an option index; returns it with its behaviour probability.
    fn choose(&self, r: StateId, option_rewards: &[f64], targets: &[StateId], lambda: f64, rng: &mut Rng) -> (usize, f64) {
        let n = targets.len();
        match self {
            RootLearner::Z { importance: false, .. } => {
                let row: Vec<(usize, f64)> = (0..n).map(|k| (k, 1.0 / n as f64)).collect();
                (sample_next(&row, rng), 1.0 / n as f64)
            }
            RootLearner::Z { table, .. } => {
                let w: Vec<f64> = (0..n)
                    .map(|k| (option_rewards[k] / lambda).exp() * table.get(targets[k]))
                    .collect();
                let total: f64 = w.iter().sum();
                let row: Vec<(usize, f64)> = if total > 0.0 && total.is_finite() {
                    w.iter().enumerate().map(|(k, x)| (k, x / total)).collect()
                } else {
                    (0..n).map(|k| (k, 1.0 / n as f64)).collect()
                };
                let k = sample_next(&row, rng);
                (k, row[k].1)
            }
            RootLearner::Q { table, epsilon } => (epsilon_greedy(table, r, *epsilon, rng), 1.0),
        }
    }

    fn update(&mut self, r: StateId, k: usize, n: usize, reward: f64, target: StateId, alpha: f64, lambda: f64, behaviour: f64) -> Result<()> {
        let t = Transition { s: r, r: reward, s_next: target };
        match self {
            RootLearner::Z { table, importance: false, .. } => {
                z_update_naive(table, &t, alpha, lambda)?;
            }
            RootLearner::Z { table, clips, .. } => {
                if z_update_is(table, &t, alpha, lambda, behaviour, 1.0 / n as f64)?.1 {
                    *clips += 1;
                }
            }
            RootLearner::Q { table, .. } => {
                q_update(table, r, k, reward, target, alpha)?;
            }
        }
        Ok(())
    }

    fn clips(&self) -> u64 {
        match self {
            RootLearner::Z { clips, .. } => *clips,
            RootLearner::Q { .. } => 0,
        }
    }
}

struct Recorder {
    window: usize,
    steps: usize,
    in_window: usize,
    rows: Vec<CurveRow>,
    clock: Clock,
}

impl Recorder {
    fn tick(&mut self, delivered: bool, clips: u64) {
        self.steps += 1;
        self.in_window += usize::from(delivered);
        if self.steps.is_multiple_of(self.window) {
            self.rows.push(CurveRow {
                trial: self.rows.len(),
                metric: self.in_window as f64 / self.window as f64,
                steps: self.steps,
                wall_ms: self.clock.ms(),
                clips,
            });
            self.in_window = 0;
        }
    }
}

/// Online hierarchical learning in the AGV domain. The root picks options at
/// stations; navigation runs to termination under its own learner. Episodes
/// restart at the initial state when all parts are delivered or the step cap
/// is hit. One curve row per window of primitive steps.
pub(super) fn throughput_run(cfg: &ExperimentConfig, layout: &AgvLayout, seed: u64) -> Result<Outcome> {
    let lambda = cfg.lambda;
    let agv = Agv::new(layout.clone(), lambda)?;
    let certificate = agv.goal_certificate()?;
    let root = AgvRoot::new(&agv)?;
    let mut reports = Vec::new();
    let mut models = Vec::new();
    let mut policies = Vec::new();
    let mut values = Vec::new();
    for j in 0..6 {
        let m = agv.navigate_lmdp(j)?;
        let (z, report) = solve_exact(&m, 1e-12)?;
        policies.push(optimal_policy(&m, &z)?);
        values.push(value_of(&z, lambda)?);
        reports.push(report);
        models.push(m);
    }
    let root_model = root.lmdp(&agv, &values)?;
    let mut navs = TaskLearners::new(cfg.method, &models, &policies, cfg.epsilon())?;
    let mut learner = RootLearner::new(cfg.method, &root_model, &root, cfg.epsilon());
    let schedule = LearningRateSchedule::new(cfg.c)?;
    let stations = agv.stations();

    let mut rng = rng_for(seed, 0);
    let budget = cfg.trials * cfg.window;
    let mut rec = Recorder { window: cfg.window, steps: 0, in_window: 0, rows: Vec::new(), clock: Clock::start() };
    let mut env = AgvEnv::new(&agv);
    let mut episode = 0;
    let mut ep_steps = 0;
    while rec.steps < budget {
        if ep_steps >= cfg.max_steps {
            env.reset();
            episode += 1;
            ep_steps = 0;
        }
        let s: AgvState = *env.state();
        let r = root.project(&agv, &s).expect("the root decides at stations");
        if root_model.is_terminal(r) {
            env.reset();
            episode += 1;
            ep_steps = 0;
            continue;
        }
        let alpha = schedule.alpha(episode);
        let opts = root.options(r);
        let nav_start = agv.nav_state(s.cell, s.o);
        let option_rewards: Vec<f64> = opts
            .iter()
            .map(|&(o, _)| match o {
                RootOption::Act(_) => -1.0,
                RootOption::Navigate(j) => navs.value(j, nav_start, lambda),
            })
            .collect();
        let targets: Vec<StateId> = opts.iter().map(|&(_, t)| t).collect();
        let (k, behaviour) = learner.choose(r, &option_rewards, &targets, lambda, &mut rng);
        let reward = match opts[k].0 {
            RootOption::Act(a) => {
                let out = env.step(a)?;
                ep_steps += 1;
                rec.tick(out.delivered, learner.clips() + navs.clip_events());
                -1.0
            }
            RootOption::Navigate(j) => {
                let mut acc = 0.0;
                let mut ns = nav_start;
                while !models[j].is_terminal(ns) && rec.steps < budget && ep_steps < cfg.max_steps {
                    let t = navs.step(j, ns, alpha, &mut rng)?;
                    ns = t.s_next;
                    let target = AgvState { cell: ns / N_ORIENTATIONS, o: ns % N_ORIENTATIONS, ..*env.state() };
                    let out = env.step_to(&target)?;
                    ep_steps += 1;
                    rec.tick(out.delivered, learner.clips() + navs.clip_events());
                    acc += out.reward;
                }
                if env.state().cell != stations[j] {
                    // interrupted by the step cap or the budget
                    continue;
                }
                match cfg.reward_mode {
                    RewardMode::Accumulated => acc,
                    RewardMode::SubtaskValue => navs.value(j, nav_start, lambda),
                }
            }
        };
        let next = root.project(&agv, env.state()).expect("options end at stations");
        learner.update(r, k, opts.len(), reward, next, alpha, lambda, behaviour)?;
    }
    let curve = LearningCurve { method: cfg.method, seed, rows: rec.rows };
    Ok((curve, reports, Some(certificate)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_seed, Domain};

    fn cfg(method: Method) -> ExperimentConfig {
        ExperimentConfig {
            domain: Domain::AgvThroughput,
            layout: "reference".into(),
            method,
            c: 100.0,
            trials: 20,
            window: 500,
            max_steps: 5000,
            ..Default::default()
        }
    }

    #[test]
    fn runs_and_is_deterministic() {
        for m in [Method::ZIs, Method::QG] {
            let a = run_seed(&cfg(m), 3).unwrap();
            let b = run_seed(&cfg(m), 3).unwrap();
            assert_eq!(a.curve.to_csv(), b.curve.to_csv());
            assert_eq!(a.curve.rows.len(), 20);
            assert!(a.curve.rows.iter().all(|r| (0.0..=1.0).contains(&r.metric)));
            assert!(a.meta.goal_certificate.unwrap() > 0);
        }
    }

    #[test]
    fn random_walk_throughput_is_flat() {
        let c = ExperimentConfig { trials: 40, window: 50_000, max_steps: 1_000_000, ..cfg(Method::Z) };
        let run = run_seed(&c, 1).unwrap();
        let m: Vec<f64> = run.curve.rows.iter().map(|r| r.metric).collect();
        let half = m.len() / 2;
        let first: f64 = m[..half].iter().sum::<f64>() / half as f64;
        let second: f64 = m[half..].iter().sum::<f64>() / half as f64;
        assert!(first > 0.0);
        assert!((first - second).abs() < 0.5 * first, "{first} vs {second}");
    }
}
