//! Fixtures shared by the benchmarks.

use hlmdp::experiment::random::{random_lmdp, RandomSpec};
use hlmdp::learning::rng_for;
use hlmdp::Lmdp;

/// n×n random-walk grid with a self-loop, cost 1 per step and the goal in
/// the last corner.
pub fn grid(n: usize, lambda: f64) -> Lmdp {
    let goal = n * n - 1;
    let mut edges = Vec::new();
    for s in 0..goal {
        let (x, y) = (s % n, s / n);
        let mut succ = vec![s];
        if x > 0 {
            succ.push(s - 1);
        }
        if x + 1 < n {
            succ.push(s + 1);
        }
        if y > 0 {
            succ.push(s - n);
        }
        if y + 1 < n {
            succ.push(s + n);
        }
        let p = 1.0 / succ.len() as f64;
        edges.extend(succ.into_iter().map(|t| (s, t, p)));
    }
    let mut rewards = vec![-1.0; n * n];
    rewards[goal] = 0.0;
    Lmdp::with_state_rewards(n * n, lambda, &edges, rewards, &[(goal, 0.0)]).expect("valid grid")
}

/// Random first-exit model with `n` states and two terminals.
pub fn random_model(n: usize, seed: u64) -> Lmdp {
    let spec = RandomSpec { uniform_passive: true, ..RandomSpec::new(n, 2) };
    random_lmdp(&spec, &mut rng_for(seed, 0)).expect("valid model")
}
