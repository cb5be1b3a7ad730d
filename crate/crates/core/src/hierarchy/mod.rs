//! Task graphs over a factored base LMDP: per-task LMDPs, composition of
//! multi-terminal tasks, exact bottom-up solving and top-down execution.

mod bottom_up;
pub mod compose;
mod execute;
mod graph;
mod problem;
mod task_lmdp;

pub use bottom_up::{solve_bottom_up, solve_task, BottomUpOptions, HierarchicalSolution, Rollout, SubtaskSolution};
pub use compose::{compose, split_model, subtask_value, terminal_distribution};
pub use execute::{EpisodeSummary, HierarchicalLearner, RewardMode, StackRecord};
pub use graph::{FactoredSpace, GraphRule, GraphViolation, Predicate, Projection, Task, TaskGraph, Variable};
pub use problem::{check_projection, validate_graph, Abstraction, CompiledTask, HierarchicalProblem, PrimitiveEdge};
pub use task_lmdp::{build_task_lmdp, EdgeOrigin, SubtaskModel, TaskLmdp, DETERMINISTIC_MASS};

use crate::error::{Error, Result};

/// Component tasks of task `j`: same dynamics, pseudo-reward 0 at the `k`-th
/// terminal and `c` at the others.
pub fn split_terminals(problem: &HierarchicalProblem, j: usize, c: f64) -> Result<Vec<Task>> {
    if !(c < 0.0) {
        return Err(Error::InvalidParameter(format!("component penalty must be negative, got {c}")));
    }
    let task = problem.task(j);
    let terminals = task.abstract_terminals();
    if terminals.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "task `{}` has {} terminal state(s); nothing to split",
            problem.task_name(j),
            terminals.len()
        )));
    }
    let sub = task.abstraction.space();
    let base = &problem.graph().tasks[j];
    terminals
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let values = sub.decode(t)?;
            let goal = Predicate::All(
                sub.vars
                    .iter()
                    .zip(values)
                    .map(|(v, x)| Predicate::eq(&v.name, x))
                    .collect(),
            );
            Ok(Task {
                name: format!("{}#{k}", base.name),
                pseudo_reward: vec![(goal, 0.0), (Predicate::True, c)],
                subtasks: Vec::new(),
                ..base.clone()
            })
        })
        .collect()
}
