use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{sample_next, z_update_is, Caps, Rng, Transition, ZTable};
use crate::lmdp::StateId;

use super::problem::HierarchicalProblem;

/// Reward a parent observes when a subtask it invoked terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Current exported estimate of the subtask at the invocation state.
    SubtaskValue,
    /// Sum of primitive rewards collected while the subtask ran.
    Accumulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OptionKind {
    Primitive { reward: f64 },
    Subtask { task: usize },
}

/// A successor of an abstract task state: passive mass and abstract target.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TaskOption {
    target: StateId,
    mass: f64,
    kind: OptionKind,
}

/// One primitive transition together with the active task stack (root first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackRecord {
    pub step: usize,
    pub stack: Vec<usize>,
    pub s: StateId,
    pub r: f64,
    pub s_next: StateId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub completed: bool,
    pub total_reward: f64,
    pub clip_events: u64,
}

struct Frame {
    task: usize,
    parent: usize,
    start: StateId,
    mass: f64,
    behaviour: f64,
    reward: f64,
}

/// Top-down hierarchical Z-learning with importance sampling. Every task keeps
/// two tables over its abstract states: one with pseudo-rewards on the
/// boundary, which drives behaviour, and one without, whose values are passed
/// to parents.
#[derive(Debug, Clone)]
pub struct HierarchicalLearner<'p> {
    problem: &'p HierarchicalProblem,
    options: Vec<Vec<Vec<TaskOption>>>,
    tilde: Vec<ZTable>,
    hat: Vec<ZTable>,
    depth: usize,
    pub mode: RewardMode,
    /// Apply every primitive transition to all tasks that contain it.
    pub intra: bool,
    clips: u64,
}

impl<'p> HierarchicalLearner<'p> {
    /// Fails if a subtask can exit through more than one state; only
    /// deterministic subtasks are supported here.
    pub fn new(problem: &'p HierarchicalProblem, mode: RewardMode) -> Result<Self> {
        let n = problem.n_tasks();
        let lambda = problem.base().lambda();
        let mut options = Vec::with_capacity(n);
        let mut tilde = Vec::with_capacity(n);
        let mut hat = Vec::with_capacity(n);
        for i in 0..n {
            let task = problem.task(i);
            let n_abs = task.abstraction.n_abstract();
            let mut rows = Vec::with_capacity(n_abs);
            let mut z_tilde = vec![1.0; n_abs];
            let mut terminal = vec![false; n_abs];
            for a in 0..n_abs {
                let s = task.representative(a);
                if problem.is_terminal(i, s) {
                    terminal[a] = true;
                    z_tilde[a] = (problem.pseudo_reward(i, s) / lambda).exp();
                    rows.push(Vec::new());
                    continue;
                }
                rows.push(Self::options_at(problem, i, s)?);
            }
            options.push(rows);
            tilde.push(ZTable::from_values(z_tilde, terminal.clone()));
            hat.push(ZTable::from_values(vec![1.0; n_abs], terminal));
        }
        let depth = problem.graph().heights()?[problem.root()] + 1;
        Ok(HierarchicalLearner {
            problem,
            options,
            tilde,
            hat,
            depth,
            mode,
            intra: true,
            clips: 0,
        })
    }

    fn options_at(problem: &HierarchicalProblem, i: usize, s: StateId) -> Result<Vec<TaskOption>> {
        let mut out: Vec<TaskOption> = Vec::new();
        let prim = problem.primitive_edges(i, s);
        let total: f64 = prim.iter().map(|e| e.p).sum();
        for e in &prim {
            let target = problem.project(i, e.next);
            match out.iter_mut().find(|o| o.target == target) {
                Some(o) => o.mass += e.p / total,
                None => out.push(TaskOption {
                    target,
                    mass: e.p / total,
                    kind: OptionKind::Primitive { reward: e.r },
                }),
            }
        }
        let n_prim = out.len();
        let subs: Vec<usize> = problem.applicable(i, s).collect();
        let k = (n_prim + subs.len()) as f64;
        if k == 0.0 {
            return Err(Error::Graph(format!("task `{}`: dead end at state {s}", problem.task_name(i))));
        }
        for o in &mut out {
            o.mass *= n_prim as f64 / k;
        }
        for j in subs {
            let exits = problem.subtask_exits(j, s);
            if exits.len() != 1 {
                return Err(Error::Graph(format!(
                    "subtask `{}` has {} exits at state {s}; top-down execution needs exactly one",
                    problem.task_name(j),
                    exits.len()
                )));
            }
            let target = problem.project(i, exits[0]);
            if out.iter().any(|o| o.target == target) {
                return Err(Error::Graph(format!(
                    "task `{}`: exit of `{}` at state {s} overlaps another successor",
                    problem.task_name(i),
                    problem.task_name(j)
                )));
            }
            out.push(TaskOption { target, mass: 1.0 / k, kind: OptionKind::Subtask { task: j } });
        }
        Ok(out)
    }

    pub fn problem(&self) -> &HierarchicalProblem {
        self.problem
    }

    /// Behaviour-defining table of task `i` (pseudo-rewards included).
    pub fn table(&self, i: usize) -> &ZTable {
        &self.tilde[i]
    }

    /// Exported table of task `i` (pseudo-rewards excluded).
    pub fn exported_table(&self, i: usize) -> &ZTable {
        &self.hat[i]
    }

    pub fn clip_events(&self) -> u64 {
        self.clips
    }

    fn lambda(&self) -> f64 {
        self.problem.base().lambda()
    }

    /// Current estimate of the value a subtask exports at base state `s`.
    fn subtask_value(&self, j: usize, s: StateId) -> f64 {
        self.lambda() * self.hat[j].get(self.problem.project(j, s)).ln()
    }

    fn option_reward(&self, o: &TaskOption, s: StateId) -> f64 {
        match o.kind {
            OptionKind::Primitive { reward } => reward,
            OptionKind::Subtask { task } => self.subtask_value(task, s),
        }
    }

    /// Behaviour distribution of task `i` at base state `s`, aligned with its options.
    fn behaviour(&self, i: usize, s: StateId) -> Vec<f64> {
        let a = self.problem.project(i, s);
        let lambda = self.lambda();
        let w: Vec<f64> = self.options[i][a]
            .iter()
            .map(|o| o.mass * (self.option_reward(o, s) / lambda).exp() * self.tilde[i].get(o.target))
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 && total.is_finite() {
            w.into_iter().map(|x| x / total).collect()
        } else {
            self.options[i][a].iter().map(|o| o.mass).collect()
        }
    }

    fn update(&mut self, i: usize, s: StateId, target: StateId, r: f64, mass: f64, behaviour: f64, alpha: f64) -> Result<()> {
        let lambda = self.lambda();
        let t = Transition { s: self.problem.project(i, s), r, s_next: target };
        let (_, clipped) = z_update_is(&mut self.tilde[i], &t, alpha, lambda, behaviour, mass)?;
        z_update_is(&mut self.hat[i], &t, alpha, lambda, behaviour, mass)?;
        self.clips += clipped as u64;
        Ok(())
    }

    /// Applies a primitive transition to task `i` if it belongs to the task.
    fn primitive_update(&mut self, i: usize, s: StateId, next: StateId, r: f64, alpha: f64) -> Result<()> {
        let p = self.problem;
        if p.is_terminal(i, s) || !p.edge_allowed(i, s, next) {
            return Ok(());
        }
        let a = p.project(i, s);
        let target = p.project(i, next);
        let Some(k) = self.options[i][a].iter().position(|o| o.target == target) else {
            return Ok(());
        };
        let behaviour = self.behaviour(i, s)[k];
        let mass = self.options[i][a][k].mass;
        self.update(i, s, target, r, mass, behaviour, alpha)
    }

    /// Runs one episode from `start` until the root terminates or the step
    /// cap is reached. `on_step` sees every primitive transition.
    pub fn run_episode(
        &mut self,
        start: StateId,
        alpha: f64,
        caps: Caps,
        rng: &mut Rng,
        mut on_step: impl FnMut(&StackRecord),
    ) -> Result<EpisodeSummary> {
        let p = self.problem;
        let root = p.root();
        let clips_before = self.clips;
        let mut stack = vec![root];
        let mut frames: Vec<Frame> = Vec::new();
        let mut s = start;
        let mut steps = 0;
        let mut total_reward = 0.0;
        let completed = loop {
            let i = *stack.last().unwrap();
            if p.is_terminal(i, s) {
                if i == root {
                    break true;
                }
                stack.pop();
                let f = frames.pop().expect("frame for every subtask");
                debug_assert_eq!(f.task, i);
                let r = match self.mode {
                    RewardMode::SubtaskValue => self.subtask_value(i, f.start),
                    RewardMode::Accumulated => f.reward,
                };
                let target = p.project(f.parent, s);
                self.update(f.parent, f.start, target, r, f.mass, f.behaviour, alpha)?;
                continue;
            }
            if steps >= caps.max_steps {
                break false;
            }
            let a = p.project(i, s);
            let probs = self.behaviour(i, s);
            let row: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
            let k = sample_next(&row, rng);
            let o = self.options[i][a][k];
            match o.kind {
                OptionKind::Subtask { task } => {
                    stack.push(task);
                    if stack.len() > self.depth {
                        return Err(Error::Graph(format!(
                            "execution stack depth {} exceeds graph depth {}",
                            stack.len(),
                            self.depth
                        )));
                    }
                    frames.push(Frame {
                        task,
                        parent: i,
                        start: s,
                        mass: o.mass,
                        behaviour: probs[k],
                        reward: 0.0,
                    });
                }
                OptionKind::Primitive { reward } => {
                    let base: Vec<(StateId, f64)> = p
                        .primitive_edges(i, s)
                        .into_iter()
                        .filter(|e| p.project(i, e.next) == o.target)
                        .map(|e| (e.next, e.p))
                        .collect();
                    let next = if base.len() == 1 {
                        base[0].0
                    } else {
                        let total: f64 = base.iter().map(|x| x.1).sum();
                        let base: Vec<(StateId, f64)> = base.into_iter().map(|(c, q)| (c, q / total)).collect();
                        sample_next(&base, rng)
                    };
                    on_step(&StackRecord { step: steps, stack: stack.clone(), s, r: reward, s_next: next });
                    for f in &mut frames {
                        f.reward += reward;
                    }
                    if self.intra {
                        for k in 0..p.n_tasks() {
                            self.primitive_update(k, s, next, reward, alpha)?;
                        }
                    } else {
                        self.primitive_update(i, s, next, reward, alpha)?;
                    }
                    total_reward += reward;
                    s = next;
                    steps += 1;
                }
            }
        };
        Ok(EpisodeSummary {
            steps,
            completed,
            total_reward,
            clip_events: self.clips - clips_before,
        })
    }
}
