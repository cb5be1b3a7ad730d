use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, StateId};

use super::problem::HierarchicalProblem;

/// Probability mass at or above which a subtask counts as deterministic.
pub const DETERMINISTIC_MASS: f64 = 1.0 - 1e-9;

/// Where an edge of a task LMDP comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrigin {
    Primitive,
    /// Exit of subtask `task` through its `terminal`-th terminal.
    Subtask { task: usize, terminal: usize },
}

/// The LMDP of one task on its abstract state space. `origins[s]` is aligned
/// with the passive row of `s`.
#[derive(Debug, Clone)]
pub struct TaskLmdp {
    pub task: usize,
    pub lmdp: Lmdp,
    pub origins: Vec<Vec<EdgeOrigin>>,
}

/// What a parent task sees of a child: at an abstract state of the child,
/// the exits `(terminal index, probability, reward)`.
pub trait SubtaskModel {
    fn exits(&self, abs: StateId) -> Vec<(usize, f64, f64)>;
}

/// Task LMDP of task `i`. Each child in `subs` (indexed by task) must be
/// present for every subtask of `i`.
pub fn build_task_lmdp(
    problem: &HierarchicalProblem,
    i: usize,
    subs: &[Option<&dyn SubtaskModel>],
) -> Result<TaskLmdp> {
    let task = problem.task(i);
    let n = task.abstraction.n_abstract();
    let name = problem.task_name(i);
    let mut edges = Vec::new();
    let mut terminals = Vec::new();
    let mut origins = Vec::with_capacity(n);
    for a in 0..n {
        let s = task.representative(a);
        if problem.is_terminal(i, s) {
            terminals.push((a, problem.pseudo_reward(i, s)));
            origins.push(vec![EdgeOrigin::Primitive]);
            continue;
        }
        // target -> (mass, reward, origin)
        let mut row: BTreeMap<StateId, (f64, f64, EdgeOrigin)> = BTreeMap::new();
        let prim = problem.primitive_edges(i, s);
        let total: f64 = prim.iter().map(|e| e.p).sum();
        for e in &prim {
            let target = problem.project(i, e.next);
            let entry = row.entry(target).or_insert((0.0, e.r, EdgeOrigin::Primitive));
            if (entry.1 - e.r).abs() > 1e-12 {
                return Err(Error::Graph(format!(
                    "task `{name}`: base edges from {s} merge into abstract state {target} with different rewards"
                )));
            }
            entry.0 += e.p / total;
        }
        let n_prim = row.len();
        let applicable: Vec<usize> = problem.applicable(i, s).collect();
        let k = (n_prim + applicable.len()) as f64;
        if k == 0.0 {
            return Err(Error::Graph(format!("task `{name}`: dead end at state {s}")));
        }
        for v in row.values_mut() {
            v.0 *= n_prim as f64 / k;
        }
        for &j in &applicable {
            let sub = subs.get(j).copied().flatten().ok_or_else(|| {
                Error::Graph(format!("task `{name}`: subtask `{}` has no solution", problem.task_name(j)))
            })?;
            let exits = problem.task(j).abstract_terminals();
            for (t, q, r) in sub.exits(problem.project(j, s)) {
                let target = problem.project(i, problem.lift(j, exits[t], s));
                if row.contains_key(&target) {
                    return Err(Error::Graph(format!(
                        "task `{name}`: exit of `{}` at state {s} overlaps another successor",
                        problem.task_name(j)
                    )));
                }
                row.insert(target, (q / k, r, EdgeOrigin::Subtask { task: j, terminal: t }));
            }
        }
        let mass: f64 = row.values().map(|v| v.0).sum();
        let mut o = Vec::with_capacity(row.len());
        for (target, (p, r, origin)) in row {
            edges.push((a, target, p / mass, r));
            o.push(origin);
        }
        origins.push(o);
    }
    let lmdp = Lmdp::with_transition_rewards(n, problem.base().lambda(), &edges, &terminals)
        .map_err(|e| e.in_task(name))?;
    Ok(TaskLmdp { task: i, lmdp, origins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::graph::{FactoredSpace, Predicate, Task, TaskGraph};
    use approx::assert_abs_diff_eq;

    struct Fixed(Vec<(usize, f64, f64)>);

    impl SubtaskModel for Fixed {
        fn exits(&self, _abs: StateId) -> Vec<(usize, f64, f64)> {
            self.0.clone()
        }
    }

    /// One variable `x` in 0..n; random walk to neighbours and self.
    fn line(n: usize) -> Lmdp {
        let mut edges = Vec::new();
        for s in 0..n {
            let mut nb = vec![s];
            if s > 0 {
                nb.push(s - 1);
            }
            if s + 1 < n {
                nb.push(s + 1);
            }
            for &t in &nb {
                edges.push((s, t, 1.0 / nb.len() as f64));
            }
        }
        Lmdp::with_state_rewards(n, 1.0, &edges, vec![-1.0; n], &[]).unwrap()
    }

    fn task(name: &str, term: Predicate, subs: &[&str], allowed: &[&str]) -> Task {
        Task {
            name: name.into(),
            termination: term,
            pseudo_reward: vec![],
            subtasks: subs.iter().map(|s| s.to_string()).collect(),
            allowed_changes: allowed.iter().map(|s| s.to_string()).collect(),
            abstraction: None,
        }
    }

    fn problem(tasks: Vec<Task>) -> HierarchicalProblem {
        let graph = TaskGraph {
            space: FactoredSpace::new(&[("x", 5)]),
            tasks,
            root: "root".into(),
        };
        HierarchicalProblem::new(line(5), graph).unwrap()
    }

    #[test]
    fn no_subtasks_restricts_passive() {
        let p = problem(vec![task("root", Predicate::eq("x", 0), &[], &["x"])]);
        let tl = build_task_lmdp(&p, 0, &[None]).unwrap();
        assert!(tl.lmdp.validate().is_empty());
        assert!(tl.lmdp.is_terminal(0));
        assert_abs_diff_eq!(tl.lmdp.passive().get(2, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(tl.lmdp.reward(2, 1), Some(-1.0));
    }

    #[test]
    fn subtask_mass_shares() {
        // root may not move; it reaches x=4 only through `go`
        let p = problem(vec![
            task("root", Predicate::eq("x", 4), &["go"], &[]),
            task("go", Predicate::eq("x", 4), &[], &["x"]),
        ]);
        let go = Fixed(vec![(0, 1.0, -3.5)]);
        let tl = build_task_lmdp(&p, 0, &[None, Some(&go)]).unwrap();
        assert!(tl.lmdp.validate().is_empty());
        assert_abs_diff_eq!(tl.lmdp.passive().get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tl.lmdp.passive().get(1, 4), 0.5, epsilon = 1e-15);
        assert_eq!(tl.lmdp.reward(1, 4), Some(-3.5));
        assert_eq!(tl.origins[1][1], EdgeOrigin::Subtask { task: 1, terminal: 0 });
    }

    #[test]
    fn multi_terminal_exits_split_mass() {
        // at x=2 with moves allowed (3 successors) and one two-exit subtask
        let p = problem(vec![
            task("root", Predicate::eq("x", 9), &["out"], &["x"]),
            task(
                "out",
                Predicate::In { var: "x".into(), values: vec![0, 4] },
                &[],
                &["x"],
            ),
        ]);
        // root terminal set is empty here; only the row of state 2 matters
        let out = Fixed(vec![(0, 0.75, -1.0), (1, 0.25, -2.0)]);
        let err = build_task_lmdp(&p, 0, &[None, Some(&out)]);
        // state 1 moves to 0, which is also an exit of `out`
        assert!(matches!(err, Err(Error::Graph(_))));

        let p = problem(vec![
            task("root", Predicate::eq("x", 9), &["out"], &[]),
            task(
                "out",
                Predicate::In { var: "x".into(), values: vec![0, 4] },
                &[],
                &["x"],
            ),
        ]);
        let tl = build_task_lmdp(&p, 0, &[None, Some(&out)]).unwrap();
        // |N_s| = 1 (self), |A_s| = 1
        assert_abs_diff_eq!(tl.lmdp.passive().get(2, 2), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tl.lmdp.passive().get(2, 0), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(tl.lmdp.passive().get(2, 4), 0.125, epsilon = 1e-15);
        assert_eq!(tl.lmdp.reward(2, 4), Some(-2.0));
    }

    #[test]
    fn four_moves_two_subtasks() {
        // 3x3 grid with moves in four directions from the centre plus idle,
        // and two deterministic subtasks: each successor gets 1/(|N|+|A|)
        let space = FactoredSpace::new(&[("x", 3), ("y", 3), ("f", 3)]);
        let n = space.size();
        let mut edges = Vec::new();
        for s in 0..n {
            let v = space.decode(s).unwrap();
            let mut nb = vec![s];
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (x, y) = (v[0] as i64 + dx, v[1] as i64 + dy);
                if (0..3).contains(&x) && (0..3).contains(&y) {
                    nb.push(space.encode(&[x as usize, y as usize, v[2]]).unwrap());
                }
            }
            if v[2] == 0 {
                nb.push(space.encode(&[v[0], v[1], 1]).unwrap());
                nb.push(space.encode(&[v[0], v[1], 2]).unwrap());
            }
            for &t in &nb {
                edges.push((s, t, 1.0 / nb.len() as f64));
            }
        }
        let base = Lmdp::with_state_rewards(n, 1.0, &edges, vec![-1.0; n], &[]).unwrap();
        let graph = TaskGraph {
            space,
            tasks: vec![
                task("root", Predicate::In { var: "f".into(), values: vec![1, 2] }, &["a", "b"], &["x", "y"]),
                task("a", Predicate::eq("f", 1), &[], &["f"]),
                task("b", Predicate::eq("f", 2), &[], &["f"]),
            ],
            root: "root".into(),
        };
        let p = HierarchicalProblem::new(base, graph).unwrap();
        let sub = Fixed(vec![(0, 1.0, -1.0)]);
        let tl = build_task_lmdp(&p, 0, &[None, Some(&sub), Some(&sub)]).unwrap();
        let centre = p.space().encode(&[1, 1, 0]).unwrap();
        // 4 moves + idle = 5 primitive successors, 2 subtasks
        let row: Vec<f64> = tl.lmdp.passive().row_vals(centre).to_vec();
        assert_eq!(row.len(), 7);
        for x in row {
            assert_abs_diff_eq!(x, 1.0 / 7.0, epsilon = 1e-15);
        }
    }
}
