use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, StateId, TraditionalMdp};

/// Desirability estimates for one task. Terminal entries hold the boundary
/// value `exp(g/lambda)` and are never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct ZTable {
    z: Vec<f64>,
    terminal: Vec<bool>,
}

impl ZTable {
    /// `Z = 1` off the boundary.
    pub fn new(model: &Lmdp) -> Self {
        let z = (0..model.n_states())
            .map(|s| model.boundary_log_z(s).map_or(1.0, f64::exp))
            .collect();
        ZTable {
            z,
            terminal: (0..model.n_states()).map(|s| model.is_terminal(s)).collect(),
        }
    }

    pub fn from_values(z: Vec<f64>, terminal: Vec<bool>) -> Self {
        assert_eq!(z.len(), terminal.len());
        ZTable { z, terminal }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    #[inline]
    pub fn get(&self, s: StateId) -> f64 {
        self.z[s]
    }

    #[inline]
    pub(crate) fn set(&mut self, s: StateId, v: f64) {
        debug_assert!(!self.terminal[s]);
        self.z[s] = v;
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    /// `V = lambda log z`.
    pub fn values(&self, lambda: f64) -> Vec<f64> {
        self.z.iter().map(|z| lambda * z.ln()).collect()
    }
}

/// Action-value estimates. Terminal states have no actions; their value is
/// the final reward.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: Vec<Vec<f64>>,
    final_reward: Vec<Option<f64>>,
}

impl QTable {
    /// All-zero table shaped like `mdp`.
    pub fn new(mdp: &TraditionalMdp) -> Self {
        QTable {
            q: (0..mdp.n_states())
                .map(|s| vec![0.0; mdp.actions(s).len()])
                .collect(),
            final_reward: mdp.final_rewards().to_vec(),
        }
    }

    pub fn from_values(q: Vec<Vec<f64>>, final_reward: Vec<Option<f64>>) -> Self {
        QTable { q, final_reward }
    }

    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    pub fn n_actions(&self, s: StateId) -> usize {
        self.q[s].len()
    }

    pub fn get(&self, s: StateId, a: usize) -> f64 {
        self.q[s][a]
    }

    pub(crate) fn set(&mut self, s: StateId, a: usize, v: f64) {
        self.q[s][a] = v;
    }

    /// Final reward at terminals, `max_a Q(s, a)` elsewhere (0 without actions).
    pub fn state_value(&self, s: StateId) -> f64 {
        if let Some(g) = self.final_reward[s] {
            return g;
        }
        if self.q[s].is_empty() {
            return 0.0;
        }
        self.q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index argmax.
    pub fn greedy(&self, s: StateId) -> usize {
        let row = &self.q[s];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.q.len()).map(|s| self.state_value(s)).collect()
    }
}

/// `alpha(tau) = c / (c + tau)`, where `tau` counts completed trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    c: f64,
}

impl LearningRateSchedule {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(LearningRateSchedule { c })
        } else {
            Err(Error::InvalidParameter(format!("schedule constant must be positive, got {c}")))
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self, trial: usize) -> f64 {
        self.c / (self.c + trial as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_values() {
        let s = LearningRateSchedule::new(10.0).unwrap();
        assert_eq!(s.alpha(0), 1.0);
        assert_eq!(s.alpha(10), 0.5);
        assert_eq!(s.alpha(90), 0.1);
        assert!(LearningRateSchedule::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn schedule_decreasing_in_unit_interval(c in 1e-3f64..1e4, tau in 0usize..1_000_000) {
            let s = LearningRateSchedule::new(c).unwrap();
            let a = s.alpha(tau);
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(s.alpha(tau + 1) < a);
        }
    }

    #[test]
    fn z_table_boundary() {
        let m = Lmdp::with_state_rewards(2, 2.0, &[(0, 1, 1.0)], vec![-1.0, 0.0], &[(1, -2.0)]).unwrap();
        let z = ZTable::new(&m);
        assert_eq!(z.get(0), 1.0);
        assert_eq!(z.get(1), (-1.0f64).exp());
        assert!(z.is_terminal(1));
    }
}
