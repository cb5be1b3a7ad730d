//! Online learners: Z-learning (naive, importance sampled, intra-task) and
//! epsilon-greedy Q-learning, with the episode loop that drives them.

mod agents;
mod episode;
pub mod log;
mod tables;

pub use agents::{Agent, IntraQLearner, IntraZLearner, QLearner, Sampling, ZLearner};
pub use episode::{run_trial, sample_next, Caps, TrialSummary};
pub use tables::{LearningRateSchedule, QTable, ZTable};

use rand::Rng as _;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::lmdp::{Gamma, Lmdp, StateId};

/// Seedable, splittable generator used by every run.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Generator for `seed`, on an independent `stream`.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Importance weights are clipped to this value; each clip is counted.
pub const WEIGHT_CLIP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateId,
    pub r: f64,
    pub s_next: StateId,
}

/// An LMDP together with its precomputed `Gamma`, as seen by a learner.
#[derive(Debug, Clone)]
pub struct TaskModel {
    model: Lmdp,
    gamma: Gamma,
}

impl TaskModel {
    pub fn new(model: Lmdp) -> Result<Self> {
        let gamma = model.build_gamma()?;
        Ok(TaskModel { model, gamma })
    }

    pub fn model(&self) -> &Lmdp {
        &self.model
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.model.lambda()
    }

    /// `G[z](s) = sum_s' Gamma(s, s') z(s')`.
    pub fn g(&self, z: &ZTable, s: StateId) -> f64 {
        self.gamma.matrix().row(s).map(|(c, g)| g * z.get(c)).sum()
    }

    /// Estimated optimal control `a(.|s)` derived from `z`, over the passive support.
    pub fn estimated_row(&self, z: &ZTable, s: StateId) -> Vec<(StateId, f64)> {
        let w: Vec<(StateId, f64)> = self
            .gamma
            .matrix()
            .row(s)
            .map(|(c, g)| (c, g * z.get(c)))
            .collect();
        let total: f64 = w.iter().map(|&(_, x)| x).sum();
        if total > 0.0 && total.is_finite() {
            w.into_iter().map(|(c, x)| (c, x / total)).collect()
        } else {
            // degenerate row: fall back to the passive dynamics
            self.model.passive().row(s).collect()
        }
    }

    /// `a(s'|s)` derived from `z`.
    pub fn estimated_prob(&self, z: &ZTable, s: StateId, next: StateId) -> f64 {
        let Some(idx) = self.gamma.matrix().find(s, next) else {
            return 0.0;
        };
        let total = self.g(z, s);
        self.gamma.matrix().values()[idx] * z.get(next) / total
    }
}

/// Naive Z-learning: `z(s) <- (1 - alpha) z(s) + alpha e^{r/lambda} z(s')`.
pub fn z_update_naive(zt: &mut ZTable, t: &Transition, alpha: f64, lambda: f64) -> Result<f64> {
    z_update_weighted(zt, t, alpha, lambda, 1.0)
}

fn z_update_weighted(zt: &mut ZTable, t: &Transition, alpha: f64, lambda: f64, w: f64) -> Result<f64> {
    if zt.is_terminal(t.s) {
        return Err(Error::TerminalUpdate(t.s));
    }
    let target = (t.r / lambda).exp() * zt.get(t.s_next) * w;
    let v = (1.0 - alpha) * zt.get(t.s) + alpha * target;
    zt.set(t.s, v);
    Ok(v)
}

/// Clipped importance weight `P(s'|s) / a(s'|s)`; returns `(weight, clipped)`.
pub fn importance_weight(passive: f64, behaviour: f64, from: StateId, to: StateId) -> Result<(f64, bool)> {
    if !(behaviour > 0.0) {
        return Err(Error::ZeroBehaviour { from, to });
    }
    let w = passive / behaviour;
    if w > WEIGHT_CLIP {
        Ok((WEIGHT_CLIP, true))
    } else {
        Ok((w, false))
    }
}

/// Importance-sampled Z-learning update with behaviour probability
/// `behaviour = a(s'|s)` and passive probability `passive = P(s'|s)`.
/// Returns the new estimate and whether the weight was clipped.
pub fn z_update_is(
    zt: &mut ZTable,
    t: &Transition,
    alpha: f64,
    lambda: f64,
    behaviour: f64,
    passive: f64,
) -> Result<(f64, bool)> {
    if zt.is_terminal(t.s) {
        return Err(Error::TerminalUpdate(t.s));
    }
    let (w, clipped) = importance_weight(passive, behaviour, t.s, t.s_next)?;
    Ok((z_update_weighted(zt, t, alpha, lambda, w)?, clipped))
}

/// Importance-sampled update with the behaviour policy derived from the
/// current table of `task`.
pub fn z_update_is_self(zt: &mut ZTable, task: &TaskModel, t: &Transition, alpha: f64) -> Result<(f64, bool)> {
    let behaviour = task.estimated_prob(zt, t.s, t.s_next);
    let passive = task.model().passive().get(t.s, t.s_next);
    z_update_is(zt, t, alpha, task.lambda(), behaviour, passive)
}

/// Intra-task Z-learning: applies the transition to every task for which `s`
/// is non-terminal and `(s, s')` is an allowed transition, each with its own
/// importance weight. Returns the number of clipped weights.
pub fn z_update_intra(tables: &mut [ZTable], tasks: &[TaskModel], t: &Transition, alpha: f64) -> Result<u64> {
    if tables.len() != tasks.len() {
        return Err(Error::IndexMismatch(tables.len(), tasks.len()));
    }
    let mut clipped = 0;
    for (zt, task) in tables.iter_mut().zip(tasks) {
        if zt.is_terminal(t.s) || task.model().passive().find(t.s, t.s_next).is_none() {
            continue;
        }
        if z_update_is_self(zt, task, t, alpha)?.1 {
            clipped += 1;
        }
    }
    Ok(clipped)
}

/// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + max_a' Q(s',a'))`.
pub fn q_update(qt: &mut QTable, s: StateId, a: usize, r: f64, s_next: StateId, alpha: f64) -> Result<f64> {
    q_update_weighted(qt, s, a, r, s_next, alpha, 1.0)
}

pub(crate) fn q_update_weighted(
    qt: &mut QTable,
    s: StateId,
    a: usize,
    r: f64,
    s_next: StateId,
    alpha: f64,
    w: f64,
) -> Result<f64> {
    let n_actions = qt.n_actions(s);
    if a >= n_actions {
        return Err(Error::UnknownAction { state: s, action: a });
    }
    // importance weight scales the step, capped at a full replacement
    let step = (alpha * w).min(1.0);
    let target = r + qt.state_value(s_next);
    let v = qt.get(s, a) + step * (target - qt.get(s, a));
    qt.set(s, a, v);
    Ok(v)
}

/// Greedy action with probability `1 - epsilon` (ties to the lowest index),
/// otherwise uniform over all actions.
pub fn epsilon_greedy(qt: &QTable, s: StateId, epsilon: f64, rng: &mut Rng) -> usize {
    let n = qt.n_actions(s);
    assert!(n > 0, "no actions at state {s}");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..n);
    }
    qt.greedy(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain() -> Lmdp {
        Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.5), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)])
            .unwrap()
    }

    fn table(z: &[f64], terminal: &[bool]) -> ZTable {
        ZTable::from_values(z.to_vec(), terminal.to_vec())
    }

    #[test]
    fn naive_update_cases() {
        let t = Transition { s: 0, r: -1.0, s_next: 1 };
        let mut zt = table(&[0.3, 1.0], &[false, true]);
        z_update_naive(&mut zt, &t, 0.0, 1.0).unwrap();
        assert_eq!(zt.get(0), 0.3);
        let t0 = Transition { s: 0, r: 0.0, s_next: 1 };
        z_update_naive(&mut zt, &t0, 1.0, 1.0).unwrap();
        assert_eq!(zt.get(0), 1.0);
        let mut zt = table(&[1.0, 1.0], &[false, true]);
        let v = z_update_naive(&mut zt, &Transition { s: 0, r: -1.0, s_next: 1 }, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.683940, epsilon = 1e-6);
    }

    #[test]
    fn terminal_update_rejected() {
        let mut zt = table(&[1.0, 1.0], &[false, true]);
        let t = Transition { s: 1, r: 0.0, s_next: 1 };
        assert_eq!(z_update_naive(&mut zt, &t, 0.5, 1.0).unwrap_err(), Error::TerminalUpdate(1));
    }

    #[test]
    fn is_with_passive_behaviour_matches_naive() {
        let t = Transition { s: 0, r: -0.7, s_next: 1 };
        let mut a = table(&[0.4, 1.0], &[false, true]);
        let mut b = a.clone();
        z_update_naive(&mut a, &t, 0.3, 1.0).unwrap();
        z_update_is(&mut b, &t, 0.3, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn is_zero_behaviour_errors() {
        let mut a = table(&[0.4, 1.0], &[false, true]);
        let t = Transition { s: 0, r: -0.7, s_next: 1 };
        assert_eq!(
            z_update_is(&mut a, &t, 0.3, 1.0, 0.0, 0.5).unwrap_err(),
            Error::ZeroBehaviour { from: 0, to: 1 }
        );
    }

    #[test]
    fn weight_clipping_counted() {
        let (w, c) = importance_weight(1.0, 1e-9, 0, 1).unwrap();
        assert_eq!(w, WEIGHT_CLIP);
        assert!(c);
    }

    #[test]
    fn is_target_equals_g_for_state_rewards() {
        let task = TaskModel::new(chain()).unwrap();
        for s_next in [0, 1] {
            let mut zt = table(&[0.37, 1.0], &[false, true]);
            let g = task.g(&zt, 0) * (1.0f64).exp(); // G without the e^{R/lambda} factor
            let t = Transition { s: 0, r: -1.0, s_next };
            let (v, _) = z_update_is_self(&mut zt, &task, &t, 0.25).unwrap();
            let expected = 0.75 * 0.37 + 0.25 * (-1.0f64).exp() * g;
            assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn transition_reward_expectation_matches_g() {
        // Averaging the update target over s' ~ a gives G[z](s) exactly.
        let m = Lmdp::with_transition_rewards(
            4,
            0.7,
            &[(0, 0, 0.2, -0.5), (0, 1, 0.3, -1.5), (0, 2, 0.5, -0.1)],
            &[(1, 0.0), (2, -1.0), (3, 0.0)],
        )
        .unwrap();
        let task = TaskModel::new(m.clone()).unwrap();
        let zt = table(&[0.6, 1.0, (-1.0f64 / 0.7).exp(), 1.0], &[false, true, true, true]);
        let g = task.g(&zt, 0);
        let mut expectation = 0.0;
        for (c, a) in task.estimated_row(&zt, 0) {
            let mut z = zt.clone();
            let r = m.reward(0, c).unwrap();
            let (v, _) = z_update_is_self(&mut z, &task, &Transition { s: 0, r, s_next: c }, 1.0).unwrap();
            expectation += a * v;
        }
        assert_abs_diff_eq!(expectation, g, epsilon = 1e-12);
    }

    #[test]
    fn intra_with_one_task_is_is() {
        let task = TaskModel::new(chain()).unwrap();
        let t = Transition { s: 0, r: -1.0, s_next: 0 };
        let mut a = vec![table(&[0.5, 1.0], &[false, true])];
        let mut b = a[0].clone();
        z_update_intra(&mut a, std::slice::from_ref(&task), &t, 0.4).unwrap();
        z_update_is_self(&mut b, &task, &t, 0.4).unwrap();
        assert_eq!(a[0], b);
    }

    #[test]
    fn intra_identical_tasks_stay_identical() {
        let task = TaskModel::new(chain()).unwrap();
        let tasks = vec![task.clone(), task];
        let mut tables = vec![table(&[0.5, 1.0], &[false, true]); 2];
        let mut rng = rng_for(3, 0);
        for _ in 0..100 {
            let s_next = if rng.gen::<bool>() { 0 } else { 1 };
            z_update_intra(&mut tables, &tasks, &Transition { s: 0, r: -1.0, s_next }, 0.1).unwrap();
        }
        assert_eq!(tables[0], tables[1]);
    }

    #[test]
    fn q_update_cases() {
        let mdp = crate::lmdp::TraditionalMdp::new(
            vec![
                vec![crate::lmdp::MdpAction { next: vec![(1, 1.0)], reward: -1.0 }],
                vec![],
            ],
            vec![None, Some(0.0)],
        )
        .unwrap();
        let mut qt = QTable::new(&mdp);
        q_update(&mut qt, 0, 0, -1.0, 1, 0.0).unwrap();
        assert_eq!(qt.get(0, 0), 0.0);
        q_update(&mut qt, 0, 0, -1.0, 1, 1.0).unwrap();
        assert_eq!(qt.get(0, 0), -1.0);
        assert_eq!(
            q_update(&mut qt, 0, 3, -1.0, 1, 1.0).unwrap_err(),
            Error::UnknownAction { state: 0, action: 3 }
        );
    }

    #[test]
    fn q_reverse_sweep_is_backward_induction() {
        use crate::lmdp::MdpAction;
        let act = |to| MdpAction { next: vec![(to, 1.0)], reward: -1.0 };
        let mdp = crate::lmdp::TraditionalMdp::new(
            vec![vec![act(1)], vec![act(2)], vec![]],
            vec![None, None, Some(0.0)],
        )
        .unwrap();
        let mut qt = QTable::new(&mdp);
        q_update(&mut qt, 1, 0, -1.0, 2, 1.0).unwrap();
        q_update(&mut qt, 0, 0, -1.0, 1, 1.0).unwrap();
        assert_eq!(qt.state_value(0), -2.0);
        assert_eq!(qt.state_value(1), -1.0);
        assert_eq!(qt.state_value(2), 0.0);
    }

    #[test]
    fn epsilon_greedy_rules() {
        let mut qt = QTable::from_values(vec![vec![0.0, 1.0, -1.0, 1.0]], vec![None]);
        let mut rng = rng_for(1, 0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&qt, 0, 0.0, &mut rng), 1);
        }
        qt.set(0, 3, 2.0);
        assert_eq!(epsilon_greedy(&qt, 0, 0.0, &mut rng), 3);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[epsilon_greedy(&qt, 0, 1.0, &mut rng)] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }
}
