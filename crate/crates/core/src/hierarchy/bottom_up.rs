use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, Policy, StateId};
use crate::solver::{evaluate_policy, optimal_policy, solve_exact, SolveReport};

use super::compose::{compose, composite_boundary, default_component_penalty, split_model, terminal_distribution};
use super::problem::HierarchicalProblem;
use super::task_lmdp::{build_task_lmdp, EdgeOrigin, SubtaskModel, TaskLmdp, DETERMINISTIC_MASS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BottomUpOptions {
    pub tol: f64,
    /// Pseudo-reward for non-goal terminals of component tasks; `None` means `-25 lambda`.
    pub penalty: Option<f64>,
}

impl Default for BottomUpOptions {
    fn default() -> Self {
        BottomUpOptions { tol: 1e-12, penalty: None }
    }
}

/// Exact solution of one task given its children's solutions.
#[derive(Debug, Clone)]
pub struct SubtaskSolution {
    pub model: TaskLmdp,
    /// `log Z` of the policy-defining values (pseudo-rewards included).
    pub log_z: Vec<f64>,
    pub policy: Policy,
    /// Values exported to parents (pseudo-rewards excluded).
    pub exported: Vec<f64>,
    /// `log Z_{j,k}` per terminal when the task was split; empty otherwise.
    pub components: Vec<Vec<f64>>,
    /// `log Z_j`, the average of the components.
    pub composite: Option<Vec<f64>>,
    /// `absorption[s][k]`: probability of exiting through terminal `k`.
    /// Empty for tasks no other task invokes.
    pub absorption: Vec<Vec<f64>>,
    pub reports: Vec<SolveReport>,
}

impl SubtaskSolution {
    pub fn task(&self) -> usize {
        self.model.task
    }

    pub fn lambda(&self) -> f64 {
        self.model.lmdp.lambda()
    }

    /// Policy-defining values `lambda log Z`.
    pub fn values(&self) -> Vec<f64> {
        let l = self.lambda();
        self.log_z.iter().map(|z| l * z).collect()
    }
}

impl SubtaskModel for SubtaskSolution {
    fn exits(&self, abs: StateId) -> Vec<(usize, f64, f64)> {
        let row = &self.absorption[abs];
        if let Some(k) = row.iter().position(|&q| q >= DETERMINISTIC_MASS) {
            return vec![(k, 1.0, self.exported[abs])];
        }
        let composite = self.composite.as_ref().expect("multi-exit task was split");
        let l = self.lambda();
        row.iter()
            .enumerate()
            .filter(|&(_, &q)| q > 0.0)
            .map(|(k, &q)| (k, q, l * (self.components[k][abs] - composite[abs])))
            .collect()
    }
}

fn is_invoked(problem: &HierarchicalProblem, i: usize) -> bool {
    (0..problem.n_tasks()).any(|p| problem.task(p).children.contains(&i))
}

/// Solves task `i` on top of already solved children.
pub fn solve_task(
    problem: &HierarchicalProblem,
    i: usize,
    solved: &[Option<SubtaskSolution>],
    opts: &BottomUpOptions,
) -> Result<SubtaskSolution> {
    let name = problem.task_name(i).to_string();
    let subs: Vec<Option<&dyn SubtaskModel>> = solved
        .iter()
        .map(|s| s.as_ref().map(|x| x as &dyn SubtaskModel))
        .collect();
    let model = build_task_lmdp(problem, i, &subs)?;
    let lmdp = &model.lmdp;
    let lambda = lmdp.lambda();
    let n_terminals = lmdp.terminals().count();
    let invoked = is_invoked(problem, i);
    let has_pseudo = problem.graph().tasks[i].has_pseudo_rewards();
    let solve = |m: &Lmdp| -> Result<(Vec<f64>, Policy, SolveReport)> {
        let (z, report) = solve_exact(m, opts.tol)?;
        let policy = optimal_policy(m, &z)?;
        Ok((z.log_z(), policy, report))
    };

    let mut reports = Vec::new();
    let (log_z, policy, components, composite) = if invoked && n_terminals >= 2 {
        let c = opts.penalty.unwrap_or_else(|| default_component_penalty(lambda));
        let mut parts = Vec::new();
        let mut components = Vec::new();
        for m in split_model(lmdp, c)? {
            let (z, p, r) = solve(&m).map_err(|e| e.in_task(&name))?;
            reports.push(r);
            components.push(z.clone());
            parts.push((z, p));
        }
        let (composite, policy) = compose(&parts)?;
        // same policy as the task with zero final rewards; shift to those values
        let shift = composite_boundary(n_terminals, c, lambda) / lambda;
        let log_z = composite.iter().map(|z| z - shift).collect();
        (log_z, policy, components, Some(composite))
    } else {
        let (z, p, r) = solve(lmdp).map_err(|e| e.in_task(&name))?;
        reports.push(r);
        (z, p, Vec::new(), None)
    };

    let exported = if has_pseudo {
        evaluate_policy(lmdp, &policy, &vec![0.0; lmdp.n_states()]).map_err(|e| e.in_task(&name))?
    } else {
        log_z.iter().map(|z| lambda * z).collect()
    };
    let absorption = if invoked {
        terminal_distribution(lmdp, &policy).map_err(|e| e.in_task(&name))?.1
    } else {
        Vec::new()
    };
    Ok(SubtaskSolution {
        model,
        log_z,
        policy,
        exported,
        components,
        composite,
        absorption,
        reports,
    })
}

/// Exact solutions of every task, indexed like the graph's tasks.
#[derive(Debug, Clone)]
pub struct HierarchicalSolution {
    pub tasks: Vec<SubtaskSolution>,
}

/// Solves all tasks children-first; tasks of equal height run in parallel.
pub fn solve_bottom_up(problem: &HierarchicalProblem, opts: &BottomUpOptions) -> Result<HierarchicalSolution> {
    let heights = problem.graph().heights()?;
    let max_h = heights.iter().copied().max().unwrap_or(0);
    let mut solved: Vec<Option<SubtaskSolution>> = vec![None; problem.n_tasks()];
    for h in 0..=max_h {
        let level: Vec<usize> = (0..problem.n_tasks()).filter(|&i| heights[i] == h).collect();
        let done = &solved;
        let results: Vec<(usize, Result<SubtaskSolution>)> = level
            .par_iter()
            .map(|&i| (i, solve_task(problem, i, done, opts)))
            .collect();
        for (i, r) in results {
            solved[i] = Some(r?);
        }
    }
    Ok(HierarchicalSolution {
        tasks: solved.into_iter().map(|s| s.expect("every task solved")).collect(),
    })
}

/// Outcome of a greedy hierarchical rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollout {
    pub steps: usize,
    pub completed: bool,
    pub final_state: StateId,
}

impl HierarchicalSolution {
    /// Root values in the root's abstract space.
    pub fn root_values(&self, problem: &HierarchicalProblem) -> Vec<f64> {
        self.tasks[problem.root()].values()
    }

    /// Executes the most probable successor of every task policy (lowest
    /// index on ties) from `start` until the root terminates or `max_steps`
    /// primitive steps have been taken.
    pub fn greedy_rollout(&self, problem: &HierarchicalProblem, start: StateId, max_steps: usize) -> Result<Rollout> {
        let root = problem.root();
        let depth = problem.graph().heights()?[root] + 1;
        let mut stack = vec![root];
        let mut s = start;
        let mut steps = 0;
        loop {
            let i = *stack.last().unwrap();
            if problem.is_terminal(i, s) {
                stack.pop();
                if stack.is_empty() {
                    return Ok(Rollout { steps, completed: true, final_state: s });
                }
                continue;
            }
            if steps >= max_steps {
                return Ok(Rollout { steps, completed: false, final_state: s });
            }
            let sol = &self.tasks[i];
            let a = problem.project(i, s);
            let m = sol.policy.control();
            let mut best = None;
            for (k, (c, p)) in m.row(a).enumerate() {
                if best.is_none_or(|(_, _, bp)| p > bp) {
                    best = Some((k, c, p));
                }
            }
            let (k, target, _) = best.ok_or(Error::ZeroNormalizer(a))?;
            match sol.model.origins[a][k] {
                EdgeOrigin::Subtask { task, .. } => {
                    stack.push(task);
                    if stack.len() > depth {
                        return Err(Error::Graph(format!("execution stack deeper than graph ({depth})")));
                    }
                }
                EdgeOrigin::Primitive => {
                    let next = problem
                        .primitive_edges(i, s)
                        .into_iter()
                        .filter(|e| problem.project(i, e.next) == target)
                        .fold(None, |b: Option<(StateId, f64)>, e| match b {
                            Some((_, bp)) if bp >= e.p => b,
                            _ => Some((e.next, e.p)),
                        })
                        .ok_or_else(|| Error::Graph(format!("no base edge from {s} to abstract {target}")))?
                        .0;
                    s = next;
                    steps += 1;
                }
            }
        }
    }
}
