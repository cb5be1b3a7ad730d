use crate::error::{Error, Result};
use crate::lmdp::{StateId, TraditionalMdp};

use super::episode::sample_next;
use super::tables::{QTable, ZTable};
use super::{
    epsilon_greedy, q_update, q_update_weighted, z_update_intra, z_update_is_self, z_update_naive,
    Rng, TaskModel, Transition, WEIGHT_CLIP,
};

/// A learner coupled to the model it samples from.
pub trait Agent {
    fn is_terminal(&self, s: StateId) -> bool;

    /// Samples one transition from `s` under the current behaviour and learns from it.
    fn step(&mut self, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition>;

    /// Task whose policy generates behaviour.
    fn active_task(&self) -> usize {
        0
    }

    /// Importance-weight clips so far.
    fn clip_events(&self) -> u64 {
        0
    }
}

/// How a Z-learner picks its next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Random walk under `P`, naive update.
    Passive,
    /// Estimated optimal control from the current table, importance-sampled update.
    Estimated,
}

/// Single-task Z-learner (methods Z and Z-IS).
#[derive(Debug, Clone)]
pub struct ZLearner {
    pub task: TaskModel,
    pub table: ZTable,
    pub sampling: Sampling,
    clips: u64,
}

impl ZLearner {
    pub fn new(task: TaskModel, sampling: Sampling) -> Self {
        let table = ZTable::new(task.model());
        ZLearner {
            task,
            table,
            sampling,
            clips: 0,
        }
    }

    /// Applies an already observed transition (used for replay).
    pub fn apply(&mut self, t: &Transition, alpha: f64) -> Result<()> {
        match self.sampling {
            Sampling::Passive => {
                z_update_naive(&mut self.table, t, alpha, self.task.lambda())?;
            }
            Sampling::Estimated => {
                if z_update_is_self(&mut self.table, &self.task, t, alpha)?.1 {
                    self.clips += 1;
                }
            }
        }
        Ok(())
    }
}

impl Agent for ZLearner {
    fn is_terminal(&self, s: StateId) -> bool {
        self.table.is_terminal(s)
    }

    fn step(&mut self, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition> {
        let model = self.task.model();
        let s_next = match self.sampling {
            Sampling::Passive => {
                let row: Vec<_> = model.passive().row(s).collect();
                sample_next(&row, rng)
            }
            Sampling::Estimated => sample_next(&self.task.estimated_row(&self.table, s), rng),
        };
        let r = model.reward(s, s_next).expect("sampled edge exists");
        let t = Transition { s, r, s_next };
        self.apply(&t, alpha)?;
        Ok(t)
    }

    fn clip_events(&self) -> u64 {
        self.clips
    }
}

/// Z-IS-IL: behaviour from the active task, updates shared by all tasks.
#[derive(Debug, Clone)]
pub struct IntraZLearner {
    pub tasks: Vec<TaskModel>,
    pub tables: Vec<ZTable>,
    active: usize,
    clips: u64,
}

impl IntraZLearner {
    pub fn new(tasks: Vec<TaskModel>) -> Self {
        let tables = tasks.iter().map(|t| ZTable::new(t.model())).collect();
        IntraZLearner {
            tasks,
            tables,
            active: 0,
            clips: 0,
        }
    }

    pub fn set_active(&mut self, task: usize) {
        assert!(task < self.tasks.len());
        self.active = task;
    }

    pub fn apply(&mut self, t: &Transition, alpha: f64) -> Result<()> {
        self.clips += z_update_intra(&mut self.tables, &self.tasks, t, alpha)?;
        Ok(())
    }
}

impl Agent for IntraZLearner {
    fn is_terminal(&self, s: StateId) -> bool {
        self.tables[self.active].is_terminal(s)
    }

    fn step(&mut self, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition> {
        let task = &self.tasks[self.active];
        let s_next = sample_next(&task.estimated_row(&self.tables[self.active], s), rng);
        let r = task.model().reward(s, s_next).expect("sampled edge exists");
        let t = Transition { s, r, s_next };
        self.apply(&t, alpha)?;
        Ok(t)
    }

    fn active_task(&self) -> usize {
        self.active
    }

    fn clip_events(&self) -> u64 {
        self.clips
    }
}

/// Epsilon-greedy Q-learning on one traditional MDP (method Q-G).
#[derive(Debug, Clone)]
pub struct QLearner {
    pub mdp: TraditionalMdp,
    pub table: QTable,
    pub epsilon: f64,
}

impl QLearner {
    pub fn new(mdp: TraditionalMdp, epsilon: f64) -> Self {
        let table = QTable::new(&mdp);
        QLearner { mdp, table, epsilon }
    }
}

impl Agent for QLearner {
    fn is_terminal(&self, s: StateId) -> bool {
        self.mdp.is_terminal(s)
    }

    fn step(&mut self, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition> {
        let a = epsilon_greedy(&self.table, s, self.epsilon, rng);
        let action = &self.mdp.actions(s)[a];
        let s_next = sample_next(&action.next, rng);
        let r = action.reward;
        q_update(&mut self.table, s, a, r, s_next, alpha)?;
        Ok(Transition { s, r, s_next })
    }
}

fn action_prob(next: &[(StateId, f64)], s_next: StateId) -> f64 {
    next.iter()
        .find(|&&(c, _)| c == s_next)
        .map_or(0.0, |&(_, p)| p)
}

/// Q-G-IL: epsilon-greedy behaviour in the active task; the observed
/// successor updates every action of every task that can produce it,
/// reweighted by `b(s'|s) / a(s'|s)` (clipped).
#[derive(Debug, Clone)]
pub struct IntraQLearner {
    pub mdps: Vec<TraditionalMdp>,
    pub tables: Vec<QTable>,
    pub epsilon: f64,
    active: usize,
    clips: u64,
}

impl IntraQLearner {
    pub fn new(mdps: Vec<TraditionalMdp>, epsilon: f64) -> Result<Self> {
        if let Some(m) = mdps.iter().find(|m| m.n_states() != mdps[0].n_states()) {
            return Err(Error::IndexMismatch(m.n_states(), mdps[0].n_states()));
        }
        let tables = mdps.iter().map(QTable::new).collect();
        Ok(IntraQLearner {
            mdps,
            tables,
            epsilon,
            active: 0,
            clips: 0,
        })
    }

    pub fn set_active(&mut self, task: usize) {
        assert!(task < self.mdps.len());
        self.active = task;
    }
}

/// Probability of reaching `s_next` from `s` under the epsilon-greedy policy
/// of `table`, marginalised over actions.
fn marginal_prob(mdp: &TraditionalMdp, table: &QTable, s: StateId, s_next: StateId, epsilon: f64) -> f64 {
    let acts = mdp.actions(s);
    let greedy = table.greedy(s);
    let explore = epsilon / acts.len() as f64;
    acts.iter()
        .enumerate()
        .map(|(a, b)| {
            let pi = explore + if a == greedy { 1.0 - epsilon } else { 0.0 };
            pi * action_prob(&b.next, s_next)
        })
        .sum()
}

impl Agent for IntraQLearner {
    fn is_terminal(&self, s: StateId) -> bool {
        self.mdps[self.active].is_terminal(s)
    }

    fn step(&mut self, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition> {
        let a = epsilon_greedy(&self.tables[self.active], s, self.epsilon, rng);
        let action = &self.mdps[self.active].actions(s)[a];
        let s_next = sample_next(&action.next, rng);
        let r = action.reward;
        let behaviour = marginal_prob(&self.mdps[self.active], &self.tables[self.active], s, s_next, self.epsilon);
        for (mdp, table) in self.mdps.iter().zip(self.tables.iter_mut()) {
            if mdp.is_terminal(s) {
                continue;
            }
            let acts = mdp.actions(s);
            if !acts.iter().any(|b| action_prob(&b.next, s_next) > 0.0) {
                continue;
            }
            for (bi, b) in acts.iter().enumerate() {
                let mut w = action_prob(&b.next, s_next) / behaviour;
                if w > WEIGHT_CLIP {
                    w = WEIGHT_CLIP;
                    self.clips += 1;
                }
                q_update_weighted(table, s, bi, b.reward, s_next, alpha, w)?;
            }
        }
        Ok(Transition { s, r, s_next })
    }

    fn active_task(&self) -> usize {
        self.active
    }

    fn clip_events(&self) -> u64 {
        self.clips
    }
}
