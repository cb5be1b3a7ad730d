//! Hierarchical linearly-solvable Markov decision problems.
//!
//! * [`lmdp`]: first-exit LMDP model, the `Gamma` matrix and the embedding
//!   into a traditional MDP.
//! * [`solver`]: power iteration (linear and log domain), direct solve,
//!   optimal policy and value iteration.
//! * [`learning`]: Z-learning (naive, importance sampled, intra-task),
//!   Q-learning baselines and the episode loop.
//! * [`hierarchy`]: task graphs, task LMDPs, compositionality of
//!   multi-terminal tasks, bottom-up solving and hierarchical execution.
//! * [`domains`]: Taxi and AGV benchmark environments.
//! * [`experiment`]: seeded experiment runs, metrics and aggregation.

pub mod domains;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod learning;
pub mod lmdp;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use lmdp::{
    embed_traditional_mdp, Gamma, Lmdp, MdpAction, Policy, Rewards, Rule, StateId, TraditionalMdp,
    Violation,
};
pub use solver::{
    direct_solve, optimal_policy, power_iterate, solve_auto, solve_exact, value_iteration, Desirability,
    Representation, SolveOptions, SolveReport,
};
pub use sparse::CsrMatrix;
