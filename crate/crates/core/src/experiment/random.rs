//! Random first-exit models for property checks and benchmarks.

use rand::Rng as _;

use crate::error::Result;
use crate::learning::Rng;
use crate::lmdp::Lmdp;

/// Shape of a random model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub n_states: usize,
    pub n_terminals: usize,
    /// Extra random successors per state, on top of the self-loop and the chain edge.
    pub extra_successors: usize,
    pub transition_rewards: bool,
    /// Passive rows uniform over their support (a random walk).
    pub uniform_passive: bool,
    pub lambda: f64,
    /// Rewards are drawn from `[-reward_scale, 0]`.
    pub reward_scale: f64,
    /// Final rewards are drawn from `[-final_scale, final_scale]`.
    pub final_scale: f64,
}

impl RandomSpec {
    pub fn new(n_states: usize, n_terminals: usize) -> Self {
        RandomSpec {
            n_states,
            n_terminals,
            extra_successors: 3,
            transition_rewards: false,
            uniform_passive: false,
            lambda: 1.0,
            reward_scale: 2.0,
            final_scale: 1.0,
        }
    }
}

/// A random first-exit LMDP. The last `n_terminals` states are terminal;
/// every other state keeps a self-loop and an edge to the next state, so a
/// terminal is always reachable.
pub fn random_lmdp(spec: &RandomSpec, rng: &mut Rng) -> Result<Lmdp> {
    let n = spec.n_states;
    let first_terminal = n - spec.n_terminals;
    let mut edges = Vec::new();
    for s in 0..first_terminal {
        let mut succ = vec![s, s + 1];
        for _ in 0..spec.extra_successors {
            let t = rng.gen_range(0..n);
            if !succ.contains(&t) {
                succ.push(t);
            }
        }
        let w: Vec<f64> = if spec.uniform_passive {
            vec![1.0; succ.len()]
        } else {
            succ.iter().map(|_| rng.gen_range(0.05..1.0)).collect()
        };
        let total: f64 = w.iter().sum();
        for (&t, x) in succ.iter().zip(w) {
            let r = -spec.reward_scale * rng.gen::<f64>();
            edges.push((s, t, x / total, r));
        }
    }
    let terminals: Vec<(usize, f64)> = (first_terminal..n)
        .map(|t| (t, spec.final_scale * rng.gen_range(-1.0..=1.0)))
        .collect();
    if spec.transition_rewards {
        Lmdp::with_transition_rewards(n, spec.lambda, &edges, &terminals)
    } else {
        let mut rewards = vec![0.0; n];
        for s in 0..first_terminal {
            rewards[s] = -spec.reward_scale * rng.gen::<f64>();
        }
        let plain: Vec<_> = edges.iter().map(|&(s, t, p, _)| (s, t, p)).collect();
        Lmdp::with_state_rewards(n, spec.lambda, &plain, rewards, &terminals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::rng_for;

    #[test]
    fn models_are_valid_and_solvable() {
        let mut rng = rng_for(11, 0);
        for k in 0..50 {
            let spec = RandomSpec { transition_rewards: k % 2 == 0, ..RandomSpec::new(20 + k % 31, 1 + k % 4) };
            let m = random_lmdp(&spec, &mut rng).unwrap();
            assert!(m.validate().is_empty());
            assert!(m.dead_states().is_empty());
            assert_eq!(m.terminals().count(), spec.n_terminals);
        }
    }
}
