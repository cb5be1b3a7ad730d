//! First-exit linearly-solvable MDPs.
//!
//! A model is a sparse passive transition matrix `P(s'|s)`, a reward that is
//! either per-state `R(s)` or per-edge `R(s, s')`, a set of absorbing terminal
//! states with final rewards `g(t)`, and a temperature `lambda`.
//!
//! State rewards are lifted to edge rewards (`R(s, s') = R(s)`) wherever the
//! solver needs a single form, so downstream code only ever sees
//! [`Lmdp::edge_reward`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Dense index of a state in `[0, n_states)`.
pub type StateId = usize;

/// Row sums must match one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rewards {
    /// `R(s)`, one value per state.
    State(Vec<f64>),
    /// `R(s, s')`, one value per stored edge of the passive matrix.
    Transition(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lmdp {
    passive: CsrMatrix,
    rewards: Rewards,
    final_reward: Vec<Option<f64>>,
    lambda: f64,
}

/// Structural rule broken by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    RowSum,
    AbsorbingTerminal,
    NegativeProbability,
    RewardSupport,
    NonFinite,
    DuplicateEdge,
    Temperature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: Option<StateId>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.state {
            Some(s) => write!(f, "state {s}: {:?}: {}", self.rule, self.detail),
            None => write!(f, "{:?}: {}", self.rule, self.detail),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

/// Groups `(from, to, p, r)` edges into rows, rejecting duplicates and
/// inserting a unit self-loop for terminals without outgoing edges.
fn collect_rows(
    n_states: usize,
    edges: impl Iterator<Item = (StateId, StateId, f64, f64)>,
    terminals: &[(StateId, f64)],
) -> Result<Vec<Vec<(usize, f64, f64)>>> {
    let mut rows: Vec<BTreeMap<usize, (f64, f64)>> = vec![BTreeMap::new(); n_states];
    for (s, t, p, r) in edges {
        for x in [s, t] {
            if x >= n_states {
                return Err(Error::StateOutOfRange { state: x, n_states });
            }
        }
        if rows[s].insert(t, (p, r)).is_some() {
            return Err(Error::DuplicateEdge { from: s, to: t });
        }
    }
    for &(t, _) in terminals {
        if t >= n_states {
            return Err(Error::StateOutOfRange { state: t, n_states });
        }
        if rows[t].is_empty() {
            rows[t].insert(t, (1.0, 0.0));
        }
    }
    Ok(rows
        .into_iter()
        .map(|row| row.into_iter().map(|(c, (p, r))| (c, p, r)).collect())
        .collect())
}

fn terminal_vec(n_states: usize, terminals: &[(StateId, f64)]) -> Vec<Option<f64>> {
    let mut out = vec![None; n_states];
    for &(t, g) in terminals {
        out[t] = Some(g);
    }
    out
}

impl Lmdp {
    /// Model with per-state rewards. `edges` are `(s, s', P(s'|s))`.
    pub fn with_state_rewards(
        n_states: usize,
        lambda: f64,
        edges: &[(StateId, StateId, f64)],
        rewards: Vec<f64>,
        terminals: &[(StateId, f64)],
    ) -> Result<Self> {
        check_lambda(lambda)?;
        if rewards.len() != n_states {
            return Err(Error::IndexMismatch(rewards.len(), n_states));
        }
        let rows = collect_rows(
            n_states,
            edges.iter().map(|&(s, t, p)| (s, t, p, 0.0)),
            terminals,
        )?;
        let passive = CsrMatrix::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(|(c, p, _)| (c, p)).collect())
                .collect(),
        );
        Ok(Lmdp {
            passive,
            rewards: Rewards::State(rewards),
            final_reward: terminal_vec(n_states, terminals),
            lambda,
        })
    }

    /// Model with per-edge rewards. `edges` are `(s, s', P(s'|s), R(s, s'))`.
    pub fn with_transition_rewards(
        n_states: usize,
        lambda: f64,
        edges: &[(StateId, StateId, f64, f64)],
        terminals: &[(StateId, f64)],
    ) -> Result<Self> {
        check_lambda(lambda)?;
        let rows = collect_rows(n_states, edges.iter().copied(), terminals)?;
        let mut rewards = Vec::new();
        let passive = CsrMatrix::from_rows(
            rows.into_iter()
                .map(|r| {
                    r.into_iter()
                        .map(|(c, p, rw)| {
                            rewards.push(rw);
                            (c, p)
                        })
                        .collect()
                })
                .collect(),
        );
        Ok(Lmdp {
            passive,
            rewards: Rewards::Transition(rewards),
            final_reward: terminal_vec(n_states, terminals),
            lambda,
        })
    }

    pub fn n_states(&self) -> usize {
        self.passive.n_rows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same model at a different temperature.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Lmdp {
            lambda,
            ..self.clone()
        })
    }

    /// Same dynamics with different final rewards on the same terminal set.
    pub fn with_final_rewards(&self, final_reward: Vec<Option<f64>>) -> Result<Self> {
        if final_reward.len() != self.n_states() {
            return Err(Error::IndexMismatch(final_reward.len(), self.n_states()));
        }
        for (s, (a, b)) in self.final_reward.iter().zip(&final_reward).enumerate() {
            if a.is_some() != b.is_some() {
                return Err(Error::InvalidModel(format!("state {s}: terminal set changed")));
            }
        }
        Ok(Lmdp {
            final_reward,
            ..self.clone()
        })
    }

    pub fn passive(&self) -> &CsrMatrix {
        &self.passive
    }

    pub fn rewards(&self) -> &Rewards {
        &self.rewards
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.final_reward[s].is_some()
    }

    pub fn final_reward(&self, s: StateId) -> Option<f64> {
        self.final_reward[s]
    }

    pub fn final_rewards(&self) -> &[Option<f64>] {
        &self.final_reward
    }

    pub fn terminals(&self) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.final_reward
            .iter()
            .enumerate()
            .filter_map(|(s, g)| g.map(|g| (s, g)))
    }

    /// Reward of the edge stored at index `idx` of the passive matrix, whose row is `s`.
    #[inline]
    pub fn edge_reward(&self, s: StateId, idx: usize) -> f64 {
        match &self.rewards {
            Rewards::State(r) => r[s],
            Rewards::Transition(r) => r[idx],
        }
    }

    /// `R(s, s')`, or `None` when `s'` is not a passive successor of `s`.
    pub fn reward(&self, s: StateId, next: StateId) -> Option<f64> {
        self.passive.find(s, next).map(|i| self.edge_reward(s, i))
    }

    /// Boundary desirability `exp(g(t)/lambda)` in the log domain.
    pub fn boundary_log_z(&self, t: StateId) -> Option<f64> {
        self.final_reward[t].map(|g| g / self.lambda)
    }

    /// Lists every broken structural rule; empty when the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let v = |state: Option<usize>, rule, detail: String| Violation { state, rule, detail };
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(v(None, Rule::Temperature, format!("lambda = {}", self.lambda)));
        }
        if let Rewards::Transition(r) = &self.rewards {
            if r.len() != self.passive.nnz() {
                out.push(v(
                    None,
                    Rule::RewardSupport,
                    format!("{} rewards for {} edges", r.len(), self.passive.nnz()),
                ));
            }
        }
        if let Rewards::State(r) = &self.rewards {
            if r.len() != self.n_states() {
                out.push(v(
                    None,
                    Rule::RewardSupport,
                    format!("{} rewards for {} states", r.len(), self.n_states()),
                ));
            }
        }
        for s in 0..self.n_states() {
            let cols = self.passive.row_cols(s);
            if cols.windows(2).any(|w| w[0] == w[1]) {
                out.push(v(Some(s), Rule::DuplicateEdge, "repeated successor".into()));
            }
            for (i, (c, p)) in self.passive.row(s).enumerate() {
                if !p.is_finite() {
                    out.push(v(Some(s), Rule::NonFinite, format!("P({c}|{s}) = {p}")));
                } else if p < 0.0 {
                    out.push(v(Some(s), Rule::NegativeProbability, format!("P({c}|{s}) = {p}")));
                }
                let idx = self.passive.row_range(s).start + i;
                let r = match &self.rewards {
                    Rewards::State(r) => r.get(s).copied(),
                    Rewards::Transition(r) => r.get(idx).copied(),
                };
                if let Some(r) = r {
                    if !r.is_finite() {
                        out.push(v(Some(s), Rule::NonFinite, format!("R({s},{c}) = {r}")));
                    }
                }
            }
            match self.final_reward[s] {
                Some(g) => {
                    if !g.is_finite() {
                        out.push(v(Some(s), Rule::NonFinite, format!("g = {g}")));
                    }
                    let absorbing = self.passive.row(s).all(|(c, p)| {
                        if c == s {
                            p == 1.0
                        } else {
                            p == 0.0
                        }
                    }) && self.passive.get(s, s) == 1.0;
                    if !absorbing {
                        out.push(v(
                            Some(s),
                            Rule::AbsorbingTerminal,
                            "terminal row must be P(t|t) = 1".into(),
                        ));
                    }
                }
                None => {
                    let sum = self.passive.row_sum(s);
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        out.push(v(Some(s), Rule::RowSum, format!("row sums to {sum}")));
                    }
                }
            }
        }
        out
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
            Err(Error::InvalidModel(msg.join("; ")))
        }
    }

    /// `Gamma(s, s') = P(s'|s) exp(R(s, s')/lambda)` on the support of `P`.
    pub fn build_gamma(&self) -> Result<Gamma> {
        self.ensure_valid()?;
        Ok(self.gamma_unchecked())
    }

    pub(crate) fn gamma_unchecked(&self) -> Gamma {
        let nnz = self.passive.nnz();
        let mut log = Vec::with_capacity(nnz);
        for s in 0..self.n_states() {
            for idx in self.passive.row_range(s) {
                let p = self.passive.values()[idx];
                log.push(p.ln() + self.edge_reward(s, idx) / self.lambda);
            }
        }
        let lin = log.iter().map(|l| l.exp()).collect();
        Gamma {
            matrix: self.passive.with_values(lin),
            log,
        }
    }

    /// States from which no terminal is reachable under `P`.
    pub fn dead_states(&self) -> Vec<StateId> {
        let n = self.n_states();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            for (c, p) in self.passive.row(s) {
                if p > 0.0 {
                    preds[c].push(s);
                }
            }
        }
        let mut reach = vec![false; n];
        let mut stack: Vec<usize> = self.terminals().map(|(t, _)| t).collect();
        for &t in &stack {
            reach[t] = true;
        }
        while let Some(x) = stack.pop() {
            for &p in &preds[x] {
                if !reach[p] {
                    reach[p] = true;
                    stack.push(p);
                }
            }
        }
        (0..n).filter(|&s| !reach[s]).collect()
    }
}

/// Transition-reward matrix of the linear Bellman equation `z = Gamma z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    matrix: CsrMatrix,
    log: Vec<f64>,
}

impl Gamma {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `log Gamma` per stored entry, computed without exponentiating.
    pub fn log_values(&self) -> &[f64] {
        &self.log
    }

    pub fn get(&self, s: StateId, next: StateId) -> f64 {
        self.matrix.get(s, next)
    }
}

/// A control law `a(s'|s)` supported on the passive dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    control: CsrMatrix,
}

impl Policy {
    pub fn new(control: CsrMatrix) -> Self {
        Policy { control }
    }

    pub fn control(&self) -> &CsrMatrix {
        &self.control
    }

    pub fn prob(&self, s: StateId, next: StateId) -> f64 {
        self.control.get(s, next)
    }

    pub fn row(&self, s: StateId) -> impl Iterator<Item = (StateId, f64)> + '_ {
        self.control.row(s)
    }

    /// Row sums and support containment against `model`.
    pub fn check(&self, model: &Lmdp) -> Result<()> {
        if self.control.n_rows() != model.n_states() {
            return Err(Error::IndexMismatch(self.control.n_rows(), model.n_states()));
        }
        for s in 0..model.n_states() {
            for (c, a) in self.control.row(s) {
                if a > 0.0 && model.passive().get(s, c) <= 0.0 {
                    return Err(Error::SupportMismatch(s));
                }
            }
            let sum = self.control.row_sum(s);
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "policy row {s} sums to {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// One symbolic action of the embedded MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpAction {
    pub next: Vec<(StateId, f64)>,
    pub reward: f64,
}

/// State-action MDP used by the Q-learning baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct TraditionalMdp {
    actions: Vec<Vec<MdpAction>>,
    final_reward: Vec<Option<f64>>,
}

impl TraditionalMdp {
    pub fn new(actions: Vec<Vec<MdpAction>>, final_reward: Vec<Option<f64>>) -> Result<Self> {
        if actions.len() != final_reward.len() {
            return Err(Error::IndexMismatch(actions.len(), final_reward.len()));
        }
        for (s, acts) in actions.iter().enumerate() {
            for a in acts {
                let sum: f64 = a.next.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "action at state {s} sums to {sum}"
                    )));
                }
            }
        }
        Ok(TraditionalMdp {
            actions,
            final_reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self, s: StateId) -> &[MdpAction] {
        &self.actions[s]
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.final_reward[s].is_some()
    }

    pub fn final_reward(&self, s: StateId) -> Option<f64> {
        self.final_reward[s]
    }

    pub fn final_rewards(&self) -> &[Option<f64>] {
        &self.final_reward
    }
}

/// `KL(a || p)` over aligned probability vectors, with `0 log 0 = 0`.
pub fn kl_divergence(a: &[f64], p: &[f64]) -> f64 {
    a.iter()
        .zip(p)
        .filter(|(&ai, _)| ai > 0.0)
        .map(|(&ai, &pi)| ai * (ai.ln() - pi.ln()))
        .sum()
}

/// Embeds `model` into a traditional MDP with the same optimal values.
///
/// At each non-terminal state with successors `s'_0 < ... < s'_{k-1}` (passive
/// support), action `j` follows the optimal control circularly shifted by `j`
/// positions. Every action pays the expected edge reward under its own
/// distribution minus `lambda * KL(a*(.|s) || P(.|s))`; with state rewards
/// this is the same value for all actions at `s`.
pub fn embed_traditional_mdp(model: &Lmdp, optimal: &Policy) -> Result<TraditionalMdp> {
    if optimal.control().n_rows() != model.n_states() {
        return Err(Error::IndexMismatch(optimal.control().n_rows(), model.n_states()));
    }
    let lambda = model.lambda();
    let mut actions = Vec::with_capacity(model.n_states());
    for s in 0..model.n_states() {
        if model.is_terminal(s) {
            actions.push(Vec::new());
            continue;
        }
        let cols = model.passive().row_cols(s);
        let p = model.passive().row_vals(s);
        for (c, a) in optimal.row(s) {
            if a > 0.0 && cols.binary_search(&c).is_err() {
                return Err(Error::SupportMismatch(s));
            }
        }
        let a_star: Vec<f64> = cols.iter().map(|&c| optimal.prob(s, c)).collect();
        let rewards: Vec<f64> = model
            .passive()
            .row_range(s)
            .map(|idx| model.edge_reward(s, idx))
            .collect();
        let kl = kl_divergence(&a_star, p);
        let k = cols.len();
        let acts = (0..k)
            .map(|j| {
                let probs: Vec<f64> = (0..k).map(|i| a_star[(i + k - j) % k]).collect();
                let expected: f64 = probs.iter().zip(&rewards).map(|(b, r)| b * r).sum();
                MdpAction {
                    next: cols.iter().copied().zip(probs).collect(),
                    reward: expected - lambda * kl,
                }
            })
            .collect();
        actions.push(acts);
    }
    TraditionalMdp::new(actions, model.final_rewards().to_vec())
}

/// On-disk description of a model: sorted edge list plus terminals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmdpFile {
    pub n_states: usize,
    pub lambda: f64,
    /// `"state"` or `"transition"`.
    pub reward_kind: String,
    /// `(s, s', P(s'|s), R(s, s'))`; for state rewards `R(s, s') = R(s)`.
    pub edges: Vec<(StateId, StateId, f64, f64)>,
    pub terminals: Vec<(StateId, f64)>,
    /// State rewards of states without outgoing edges are kept here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_rewards: Option<Vec<f64>>,
}

impl LmdpFile {
    pub fn from_model(model: &Lmdp) -> Self {
        let mut edges = Vec::with_capacity(model.passive().nnz());
        for s in 0..model.n_states() {
            for (i, idx) in model.passive().row_range(s).enumerate() {
                let c = model.passive().row_cols(s)[i];
                edges.push((s, c, model.passive().values()[idx], model.edge_reward(s, idx)));
            }
        }
        let (reward_kind, state_rewards) = match model.rewards() {
            Rewards::State(r) => ("state", Some(r.clone())),
            Rewards::Transition(_) => ("transition", None),
        };
        LmdpFile {
            n_states: model.n_states(),
            lambda: model.lambda(),
            reward_kind: reward_kind.into(),
            edges,
            terminals: model.terminals().collect(),
            state_rewards,
        }
    }

    pub fn into_model(self) -> Result<Lmdp> {
        match self.reward_kind.as_str() {
            "transition" => {
                Lmdp::with_transition_rewards(self.n_states, self.lambda, &self.edges, &self.terminals)
            }
            "state" => {
                let rewards = match self.state_rewards {
                    Some(r) => r,
                    None => {
                        let mut r = vec![0.0; self.n_states];
                        for &(s, _, _, rw) in &self.edges {
                            if s < r.len() {
                                r[s] = rw;
                            }
                        }
                        r
                    }
                };
                for &(s, _, _, rw) in &self.edges {
                    if rewards.get(s).is_some_and(|&x| x != rw) {
                        return Err(Error::Format(format!(
                            "state {s}: edge reward {rw} differs from state reward"
                        )));
                    }
                }
                let edges: Vec<_> = self.edges.iter().map(|&(s, t, p, _)| (s, t, p)).collect();
                Lmdp::with_state_rewards(self.n_states, self.lambda, &edges, rewards, &self.terminals)
            }
            other => Err(Error::Format(format!("unknown reward kind {other:?}"))),
        }
    }
}

impl Lmdp {
    /// Canonical JSON text (edges sorted by `(s, s')`).
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&LmdpFile::from_model(self))
            .expect("model serialization");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LmdpFile = serde_json::from_str(text)?;
        file.into_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain() -> Lmdp {
        Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.5), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)])
            .unwrap()
    }

    #[test]
    fn minimal_absorbing_model_is_valid() {
        let m = Lmdp::with_state_rewards(1, 1.0, &[(0, 0, 1.0)], vec![0.0], &[(0, 0.0)]).unwrap();
        assert!(m.validate().is_empty());
        // self-loop is inserted when the terminal row is left empty
        let m = Lmdp::with_state_rewards(1, 1.0, &[], vec![0.0], &[(0, 0.0)]).unwrap();
        assert!(m.validate().is_empty());
        assert_eq!(m.passive().get(0, 0), 1.0);
    }

    #[test]
    fn short_row_is_reported() {
        let m = Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.4), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)])
            .unwrap();
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::RowSum);
        assert_eq!(v[0].state, Some(0));
    }

    #[test]
    fn leaky_terminal_is_reported() {
        let m = Lmdp::with_state_rewards(
            2,
            1.0,
            &[(0, 0, 1.0), (1, 1, 0.5), (1, 0, 0.5)],
            vec![-1.0, 0.0],
            &[(1, 0.0)],
        )
        .unwrap();
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::AbsorbingTerminal);
        assert_eq!(v[0].state, Some(1));
    }

    #[test]
    fn duplicate_edges_rejected() {
        let e = Lmdp::with_transition_rewards(2, 1.0, &[(0, 1, 0.5, -1.0), (0, 1, 0.5, -2.0)], &[(1, 0.0)]);
        assert_eq!(e.unwrap_err(), Error::DuplicateEdge { from: 0, to: 1 });
    }

    #[test]
    fn gamma_entries() {
        let m = Lmdp::with_transition_rewards(2, 1.0, &[(0, 1, 1.0, 0.0)], &[(1, 0.0)]).unwrap();
        assert_eq!(m.build_gamma().unwrap().get(0, 1), 1.0);
        let m = Lmdp::with_transition_rewards(2, 1.0, &[(0, 1, 1.0, -1.0)], &[(1, 0.0)]).unwrap();
        assert_abs_diff_eq!(m.build_gamma().unwrap().get(0, 1), 0.367879, epsilon = 1e-6);
        let m = Lmdp::with_transition_rewards(
            3,
            2.0,
            &[(0, 1, 0.5, -2.0), (0, 2, 0.5, -2.0)],
            &[(1, 0.0), (2, 0.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(m.build_gamma().unwrap().get(0, 1), 0.183940, epsilon = 1e-6);
    }

    #[test]
    fn gamma_rejects_invalid_model() {
        let m = Lmdp::with_state_rewards(2, 1.0, &[(0, 1, 0.9)], vec![-1.0, 0.0], &[(1, 0.0)]).unwrap();
        assert!(matches!(m.build_gamma(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn embedding_single_successor_is_identity() {
        let m = Lmdp::with_state_rewards(2, 1.0, &[(0, 1, 1.0)], vec![-1.0, 0.0], &[(1, 0.0)]).unwrap();
        let pol = Policy::new(CsrMatrix::from_rows(vec![vec![(1, 1.0)], vec![(1, 1.0)]]));
        let mdp = embed_traditional_mdp(&m, &pol).unwrap();
        assert_eq!(mdp.actions(0).len(), 1);
        assert_eq!(mdp.actions(0)[0].next, vec![(1, 1.0)]);
        assert_eq!(mdp.actions(0)[0].reward, -1.0);
        assert!(mdp.actions(1).is_empty());
    }

    #[test]
    fn embedding_shifts_two_successors() {
        let m = chain();
        let pol = Policy::new(CsrMatrix::from_rows(vec![vec![(0, 0.8), (1, 0.2)], vec![(1, 1.0)]]));
        let mdp = embed_traditional_mdp(&m, &pol).unwrap();
        let acts = mdp.actions(0);
        assert_eq!(acts[0].next, vec![(0, 0.8), (1, 0.2)]);
        assert_eq!(acts[1].next, vec![(0, 0.2), (1, 0.8)]);
        assert_eq!(acts[0].reward, acts[1].reward);
        let kl = 0.8 * (0.8f64 / 0.5).ln() + 0.2 * (0.2f64 / 0.5).ln();
        assert_abs_diff_eq!(acts[0].reward, -1.0 - kl, epsilon = 1e-15);
    }

    #[test]
    fn embedding_rejects_foreign_support() {
        let m = chain();
        let pol = Policy::new(CsrMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]]));
        // terminal rows are ignored, non-terminal rows checked
        assert!(embed_traditional_mdp(&m, &pol).is_ok());
        let m = Lmdp::with_state_rewards(3, 1.0, &[(0, 1, 1.0)], vec![-1.0, 0.0, 0.0], &[(1, 0.0), (2, 0.0)])
            .unwrap();
        let pol = Policy::new(CsrMatrix::from_rows(vec![vec![(2, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]]));
        assert_eq!(embed_traditional_mdp(&m, &pol).unwrap_err(), Error::SupportMismatch(0));
    }

    #[test]
    fn kl_handles_zero_mass() {
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        for m in [
            chain(),
            Lmdp::with_transition_rewards(3, 0.5, &[(0, 2, 0.25, -1.5), (0, 1, 0.75, -0.1)], &[(1, 0.0), (2, -3.0)])
                .unwrap(),
        ] {
            let text = m.to_json();
            let back = Lmdp::from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn dead_states_found() {
        let m = Lmdp::with_state_rewards(
            3,
            1.0,
            &[(0, 1, 1.0), (2, 2, 1.0)],
            vec![-1.0, 0.0, -1.0],
            &[(1, 0.0)],
        )
        .unwrap();
        assert_eq!(m.dead_states(), vec![2]);
    }
}
