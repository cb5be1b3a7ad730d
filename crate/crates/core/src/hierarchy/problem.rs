use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, StateId};

use super::graph::{check_names, check_structure, FactoredSpace, GraphRule, GraphViolation, TaskGraph};

/// Projection of the base space onto a subset of its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    kept: Vec<usize>,
    sub: FactoredSpace,
    /// Full-length values used for dropped variables of representatives.
    fill: Vec<usize>,
}

impl Abstraction {
    pub fn identity(space: &FactoredSpace) -> Self {
        Abstraction {
            kept: (0..space.n_vars()).collect(),
            sub: space.clone(),
            fill: vec![0; space.n_vars()],
        }
    }

    pub fn projection(space: &FactoredSpace, keep: &[String], fill: &BTreeMap<String, usize>) -> Result<Self> {
        let mut kept = keep.iter().map(|n| space.var_index(n)).collect::<Result<Vec<_>>>()?;
        kept.sort_unstable();
        kept.dedup();
        let mut values = vec![0; space.n_vars()];
        for (name, &v) in fill {
            let i = space.var_index(name)?;
            if v >= space.vars[i].size {
                return Err(Error::Graph(format!("fill value {name} = {v} out of range")));
            }
            values[i] = v;
        }
        Ok(Abstraction {
            sub: FactoredSpace { vars: kept.iter().map(|&i| space.vars[i].clone()).collect() },
            kept,
            fill: values,
        })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// The abstract space.
    pub fn space(&self) -> &FactoredSpace {
        &self.sub
    }

    pub fn n_abstract(&self) -> usize {
        self.sub.size()
    }

    pub fn is_identity(&self, space: &FactoredSpace) -> bool {
        self.kept.len() == space.n_vars()
    }

    pub fn project_values(&self, values: &[usize]) -> StateId {
        self.kept
            .iter()
            .zip(&self.sub.vars)
            .fold(0, |id, (&i, v)| id * v.size + values[i])
    }

    pub fn project(&self, space: &FactoredSpace, base: StateId) -> Result<StateId> {
        Ok(self.project_values(&space.decode(base)?))
    }

    /// Base state equal to `origin` on dropped variables and `abs` on kept ones.
    pub fn lift(&self, space: &FactoredSpace, abs: StateId, origin: StateId) -> Result<StateId> {
        let mut values = space.decode(origin)?;
        for (&i, x) in self.kept.iter().zip(self.sub.decode(abs)?) {
            values[i] = x;
        }
        space.encode(&values)
    }

    pub fn representative(&self, space: &FactoredSpace, abs: StateId) -> Result<StateId> {
        let mut values = self.fill.clone();
        for (&i, x) in self.kept.iter().zip(self.sub.decode(abs)?) {
            values[i] = x;
        }
        space.encode(&values)
    }
}

/// Per-task data derived from the graph and base model.
#[derive(Debug, Clone)]
pub struct CompiledTask {
    pub abstraction: Abstraction,
    pub children: Vec<usize>,
    allowed: Vec<bool>,
    /// Termination over base states.
    terminal: Vec<bool>,
    /// Pseudo-reward over base states (0 off the termination set).
    pseudo: Vec<f64>,
    /// Base representative of every abstract state.
    reps: Vec<StateId>,
    /// Abstract ids of terminal abstract states.
    abstract_terminals: Vec<StateId>,
}

impl CompiledTask {
    pub fn representative(&self, abs: StateId) -> StateId {
        self.reps[abs]
    }

    pub fn abstract_terminals(&self) -> &[StateId] {
        &self.abstract_terminals
    }
}

/// A base LMDP over a factored space together with a task graph on it.
#[derive(Debug, Clone)]
pub struct HierarchicalProblem {
    base: Lmdp,
    graph: TaskGraph,
    tasks: Vec<CompiledTask>,
    root: usize,
    decoded: Vec<Vec<usize>>,
}

/// Primitive successor of a base state inside one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveEdge {
    pub next: StateId,
    pub p: f64,
    pub r: f64,
}

impl HierarchicalProblem {
    /// Checks names, acyclicity and sizes; the structural assumptions are
    /// checked separately by [`validate_graph`].
    pub fn new(base: Lmdp, graph: TaskGraph) -> Result<Self> {
        if let Some(v) = check_names(&graph).into_iter().chain(check_structure(&graph)).next() {
            if v.rule != GraphRule::Unreachable {
                return Err(Error::Graph(v.to_string()));
            }
        }
        if graph.space.size() != base.n_states() {
            return Err(Error::Graph(format!(
                "factored space has {} states, base model {}",
                graph.space.size(),
                base.n_states()
            )));
        }
        let space = &graph.space;
        let decoded: Vec<Vec<usize>> = (0..base.n_states()).map(|s| space.decode(s)).collect::<Result<_>>()?;
        let mut tasks = Vec::with_capacity(graph.tasks.len());
        for (i, t) in graph.tasks.iter().enumerate() {
            let abstraction = match &t.abstraction {
                Some(p) => Abstraction::projection(space, &p.keep, &p.fill)?,
                None => Abstraction::identity(space),
            };
            let mut allowed = vec![false; space.n_vars()];
            for v in &t.allowed_changes {
                allowed[space.var_index(v)?] = true;
            }
            let mut terminal = Vec::with_capacity(decoded.len());
            let mut pseudo = Vec::with_capacity(decoded.len());
            for vals in &decoded {
                let term = t.termination.eval(space, vals)?;
                terminal.push(term);
                pseudo.push(if term { t.pseudo_reward_at(space, vals)? } else { 0.0 });
            }
            let reps = (0..abstraction.n_abstract())
                .map(|a| abstraction.representative(space, a))
                .collect::<Result<Vec<_>>>()?;
            let abstract_terminals = (0..reps.len()).filter(|&a| terminal[reps[a]]).collect();
            tasks.push(CompiledTask {
                children: graph.children(i)?,
                abstraction,
                allowed,
                terminal,
                pseudo,
                reps,
                abstract_terminals,
            });
        }
        let root = graph.root_index()?;
        Ok(HierarchicalProblem { base, graph, tasks, root, decoded })
    }

    pub fn base(&self) -> &Lmdp {
        &self.base
    }

    pub fn graph(&self) -> &TaskGraph {
        &self.graph
    }

    pub fn space(&self) -> &FactoredSpace {
        &self.graph.space
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, i: usize) -> &CompiledTask {
        &self.tasks[i]
    }

    pub fn task_name(&self, i: usize) -> &str {
        &self.graph.tasks[i].name
    }

    pub fn values(&self, s: StateId) -> &[usize] {
        &self.decoded[s]
    }

    pub fn is_terminal(&self, i: usize, s: StateId) -> bool {
        self.tasks[i].terminal[s]
    }

    pub fn pseudo_reward(&self, i: usize, s: StateId) -> f64 {
        self.tasks[i].pseudo[s]
    }

    pub fn project(&self, i: usize, s: StateId) -> StateId {
        self.tasks[i].abstraction.project_values(&self.decoded[s])
    }

    pub fn lift(&self, i: usize, abs: StateId, origin: StateId) -> StateId {
        self.tasks[i]
            .abstraction
            .lift(&self.graph.space, abs, origin)
            .expect("abstract id in range")
    }

    /// Whether the base edge `s -> next` only changes variables task `i` may change.
    pub fn edge_allowed(&self, i: usize, s: StateId, next: StateId) -> bool {
        let allowed = &self.tasks[i].allowed;
        self.decoded[s]
            .iter()
            .zip(&self.decoded[next])
            .enumerate()
            .all(|(v, (a, b))| a == b || allowed[v])
    }

    /// Base edges of `s` that belong to task `i`.
    pub fn primitive_edges(&self, i: usize, s: StateId) -> Vec<PrimitiveEdge> {
        let passive = self.base.passive();
        passive
            .row_range(s)
            .zip(passive.row_cols(s))
            .filter(|&(_, &c)| self.edge_allowed(i, s, c))
            .map(|(idx, &c)| PrimitiveEdge {
                next: c,
                p: passive.values()[idx],
                r: self.base.edge_reward(s, idx),
            })
            .collect()
    }

    /// Subtasks of `i` applicable at base state `s`.
    pub fn applicable(&self, i: usize, s: StateId) -> impl Iterator<Item = usize> + '_ {
        self.tasks[i].children.iter().copied().filter(move |&j| !self.is_terminal(j, s))
    }

    /// Base states where subtask `j`, invoked at `s`, may terminate: lifted
    /// terminals that differ from `s` only in variables `j` may change.
    pub fn subtask_exits(&self, j: usize, s: StateId) -> Vec<StateId> {
        let allowed = &self.tasks[j].allowed;
        self.tasks[j]
            .abstract_terminals
            .iter()
            .map(|&t| self.lift(j, t, s))
            .filter(|&t| {
                self.decoded[s]
                    .iter()
                    .zip(&self.decoded[t])
                    .enumerate()
                    .all(|(v, (a, b))| a == b || allowed[v])
            })
            .collect()
    }
}

/// Structural problems of `problem`'s graph with respect to its base model:
/// acyclicity, reachability, non-empty termination, a no-op at every
/// non-terminal state, disjoint subtask exits, and projection soundness.
pub fn validate_graph(problem: &HierarchicalProblem) -> Vec<GraphViolation> {
    let g = problem.graph();
    let mut out = check_names(g);
    out.extend(check_structure(g));
    if !out.is_empty() {
        return out;
    }
    let base = problem.base();
    for i in 0..problem.n_tasks() {
        let name = problem.task_name(i).to_string();
        let violation = |rule, state, detail| GraphViolation {
            rule,
            tasks: vec![name.clone()],
            state,
            detail,
        };
        let task = problem.task(i);
        if task.abstract_terminals.is_empty() {
            out.push(violation(GraphRule::EmptyTermination, None, "termination set is empty".into()));
        }
        for s in 0..base.n_states() {
            if !problem.is_terminal(i, s) && base.passive().get(s, s) <= 0.0 {
                out.push(violation(GraphRule::MissingNoOp, Some(s), "no self-transition".into()));
                break;
            }
        }
        for a in 0..task.abstraction.n_abstract() {
            let s = task.representative(a);
            if problem.is_terminal(i, s) {
                continue;
            }
            let prim: BTreeSet<StateId> = problem
                .primitive_edges(i, s)
                .iter()
                .map(|e| problem.project(i, e.next))
                .collect();
            let mut claimed: BTreeMap<StateId, usize> = BTreeMap::new();
            for j in problem.applicable(i, s) {
                for exit in problem.subtask_exits(j, s) {
                    let target = problem.project(i, exit);
                    let mut v = |detail: String| {
                        let mut x = violation(GraphRule::Overlap, Some(s), detail);
                        x.tasks.push(problem.task_name(j).to_string());
                        out.push(x);
                    };
                    if prim.contains(&target) {
                        v(format!("subtask exit {exit} is also a primitive successor"));
                    } else if let Some(&other) = claimed.get(&target) {
                        if other != j {
                            v(format!("exit {exit} shared with `{}`", problem.task_name(other)));
                        }
                    } else {
                        claimed.insert(target, j);
                    }
                }
            }
        }
        out.extend(check_projection(problem, i).into_iter().take(5));
    }
    out
}

/// Signature of a base state inside task `i`: terminal flag and pseudo-reward,
/// or the projected primitive row (normalized) with rewards.
fn signature(problem: &HierarchicalProblem, i: usize, s: StateId) -> (bool, Vec<(StateId, f64, f64)>) {
    if problem.is_terminal(i, s) {
        return (true, vec![(0, problem.pseudo_reward(i, s), 0.0)]);
    }
    let edges = problem.primitive_edges(i, s);
    let total: f64 = edges.iter().map(|e| e.p).sum();
    let mut row: BTreeMap<StateId, (f64, f64)> = BTreeMap::new();
    for e in edges {
        let entry = row.entry(problem.project(i, e.next)).or_insert((0.0, e.r));
        entry.0 += e.p / total;
    }
    (false, row.into_iter().map(|(c, (p, r))| (c, p, r)).collect())
}

/// States merged by the projection of task `i` must look identical to the
/// task: same termination, same projected transition row and rewards.
pub fn check_projection(problem: &HierarchicalProblem, i: usize) -> Vec<GraphViolation> {
    let task = problem.task(i);
    if task.abstraction.is_identity(problem.space()) {
        return Vec::new();
    }
    let reps: Vec<_> = (0..task.abstraction.n_abstract())
        .map(|a| signature(problem, i, task.representative(a)))
        .collect();
    let mut out = Vec::new();
    for s in 0..problem.base().n_states() {
        // the episode is over in base terminals; no task acts there
        if problem.base().is_terminal(s) {
            continue;
        }
        let a = problem.project(i, s);
        let sig = signature(problem, i, s);
        let rep = &reps[a];
        let same = sig.0 == rep.0
            && sig.1.len() == rep.1.len()
            && sig.1.iter().zip(&rep.1).all(|(x, y)| {
                x.0 == y.0 && (x.1 - y.1).abs() <= 1e-9 && (x.2 - y.2).abs() <= 1e-9
            });
        if !same {
            out.push(GraphViolation {
                rule: GraphRule::Abstraction,
                tasks: vec![problem.task_name(i).to_string()],
                state: Some(s),
                detail: format!("differs from representative {} of abstract state {a}", task.representative(a)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::graph::{Predicate, Projection, Task};

    /// x in 0..3, flag f in 0..2; x walks, f flips only at x = 2.
    fn base(self_loops: bool) -> (FactoredSpace, Lmdp) {
        let space = FactoredSpace::new(&[("x", 3), ("f", 2)]);
        let mut edges = Vec::new();
        for s in 0..space.size() {
            let v = space.decode(s).unwrap();
            let mut nb = Vec::new();
            if self_loops || v[0] == 0 {
                nb.push(s);
            }
            if v[0] > 0 {
                nb.push(space.encode(&[v[0] - 1, v[1]]).unwrap());
            }
            if v[0] < 2 {
                nb.push(space.encode(&[v[0] + 1, v[1]]).unwrap());
            }
            if v[0] == 2 {
                nb.push(space.encode(&[2, 1 - v[1]]).unwrap());
            }
            for &t in &nb {
                edges.push((s, t, 1.0 / nb.len() as f64));
            }
        }
        let n = space.size();
        (space, Lmdp::with_state_rewards(n, 1.0, &edges, vec![-1.0; n], &[]).unwrap())
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

    #[test]
    fn single_primitive_task_is_valid() {
        let (space, m) = base(true);
        let g = TaskGraph { space, tasks: vec![task("root", Predicate::eq("f", 1), &[], &["x", "f"])], root: "root".into() };
        let p = HierarchicalProblem::new(m, g).unwrap();
        assert_eq!(validate_graph(&p), vec![]);
    }

    #[test]
    fn missing_no_op_and_empty_termination() {
        let (space, m) = base(false);
        let g = TaskGraph { space, tasks: vec![task("root", Predicate::False, &[], &["x", "f"])], root: "root".into() };
        let p = HierarchicalProblem::new(m, g).unwrap();
        let rules: Vec<GraphRule> = validate_graph(&p).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&GraphRule::EmptyTermination));
        assert!(rules.contains(&GraphRule::MissingNoOp));
    }

    #[test]
    fn exit_on_primitive_successor_overlaps() {
        let (space, m) = base(true);
        // root can itself move x, and `go` exits at x = 2: from x = 1 both reach (2, f)
        let g = TaskGraph {
            space,
            tasks: vec![
                task("root", Predicate::eq("f", 1), &["go"], &["x", "f"]),
                task("go", Predicate::eq("x", 2), &[], &["x"]),
            ],
            root: "root".into(),
        };
        let p = HierarchicalProblem::new(m, g).unwrap();
        let v = validate_graph(&p);
        assert!(v.iter().any(|x| x.rule == GraphRule::Overlap && x.tasks == vec!["root", "go"]));
    }

    #[test]
    fn projection_soundness() {
        let (space, m) = base(true);
        let mut nav = task("go", Predicate::eq("x", 2), &[], &["x"]);
        nav.abstraction = Some(Projection { keep: vec!["x".into()], fill: Default::default() });
        let g = TaskGraph {
            space: space.clone(),
            tasks: vec![task("root", Predicate::eq("f", 1), &["go"], &["f"]), nav],
            root: "root".into(),
        };
        let p = HierarchicalProblem::new(m, g).unwrap();
        assert_eq!(validate_graph(&p), vec![]);
        assert_eq!(p.task(1).abstraction.n_abstract(), 3);
        let s = space.encode(&[1, 1]).unwrap();
        assert_eq!(p.project(1, s), 1);
        assert_eq!(p.lift(1, 2, s), space.encode(&[2, 1]).unwrap());
        assert_eq!(p.subtask_exits(1, s), vec![space.encode(&[2, 1]).unwrap()]);

        // keeping only f merges states with different x rows
        let mut bad = task("go", Predicate::eq("x", 2), &[], &["x"]);
        bad.abstraction = Some(Projection { keep: vec!["f".into()], fill: Default::default() });
        let (space, m) = base(true);
        let g = TaskGraph { space, tasks: vec![bad], root: "go".into() };
        let p = HierarchicalProblem::new(m, g).unwrap();
        assert!(check_projection(&p, 0).iter().all(|v| v.rule == GraphRule::Abstraction));
        assert!(!check_projection(&p, 0).is_empty());
    }

    #[test]
    fn identity_abstraction_is_bijection() {
        let space = FactoredSpace::new(&[("a", 2), ("b", 3)]);
        let id = Abstraction::identity(&space);
        for s in 0..6 {
            assert_eq!(id.project(&space, s).unwrap(), s);
            assert_eq!(id.lift(&space, s, 0).unwrap(), s);
        }
        assert!(id.project(&space, 6).is_err());
    }
}
