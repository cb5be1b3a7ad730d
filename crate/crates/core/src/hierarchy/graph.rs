use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmdp::StateId;

/// A state space factored into named discrete variables. Encoding is
/// mixed-radix with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoredSpace {
    pub vars: Vec<Variable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub size: usize,
}

impl FactoredSpace {
    pub fn new(vars: &[(&str, usize)]) -> Self {
        FactoredSpace {
            vars: vars
                .iter()
                .map(|&(name, size)| Variable { name: name.to_string(), size })
                .collect(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn size(&self) -> usize {
        self.vars.iter().map(|v| v.size).product()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Graph(format!("unknown variable `{name}`")))
    }

    pub fn encode(&self, values: &[usize]) -> Result<StateId> {
        if values.len() != self.vars.len() {
            return Err(Error::Graph(format!(
                "expected {} variable values, got {}",
                self.vars.len(),
                values.len()
            )));
        }
        let mut id = 0;
        for (v, &x) in self.vars.iter().zip(values) {
            if x >= v.size {
                return Err(Error::Graph(format!("{} = {x} outside 0..{}", v.name, v.size)));
            }
            id = id * v.size + x;
        }
        Ok(id)
    }

    pub fn decode(&self, mut id: StateId) -> Result<Vec<usize>> {
        if id >= self.size() {
            return Err(Error::StateOutOfRange { state: id, n_states: self.size() });
        }
        let mut out = vec![0; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate().rev() {
            out[i] = id % v.size;
            id /= v.size;
        }
        Ok(out)
    }
}

/// Boolean condition over the variables of a factored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    True,
    False,
    Eq { var: String, value: usize },
    In { var: String, values: Vec<usize> },
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn eq(var: &str, value: usize) -> Self {
        Predicate::Eq { var: var.to_string(), value }
    }

    pub fn eval(&self, space: &FactoredSpace, values: &[usize]) -> Result<bool> {
        Ok(match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Eq { var, value } => values[space.var_index(var)?] == *value,
            Predicate::In { var, values: set } => set.contains(&values[space.var_index(var)?]),
            Predicate::All(ps) => {
                for p in ps {
                    if !p.eval(space, values)? {
                        return Ok(false);
                    }
                }
                true
            }
            Predicate::Any(ps) => {
                for p in ps {
                    if p.eval(space, values)? {
                        return Ok(true);
                    }
                }
                false
            }
            Predicate::Not(p) => !p.eval(space, values)?,
        })
    }

    fn check_vars(&self, space: &FactoredSpace) -> Result<()> {
        match self {
            Predicate::True | Predicate::False => Ok(()),
            Predicate::Eq { var, .. } | Predicate::In { var, .. } => space.var_index(var).map(|_| ()),
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().try_for_each(|p| p.check_vars(space)),
            Predicate::Not(p) => p.check_vars(space),
        }
    }
}

/// Projection abstraction: the task only sees `keep`; dropped variables are
/// filled from `fill` (default 0) when a representative base state is needed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub keep: Vec<String>,
    #[serde(default)]
    pub fill: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub termination: Predicate,
    /// First matching entry gives the pseudo-reward of a terminal state; 0 if none match.
    #[serde(default)]
    pub pseudo_reward: Vec<(Predicate, f64)>,
    #[serde(default)]
    pub subtasks: Vec<String>,
    /// Variables that primitive transitions of this task may change. A base
    /// edge belongs to the task iff every changed variable is listed here.
    pub allowed_changes: Vec<String>,
    #[serde(default)]
    pub abstraction: Option<Projection>,
}

impl Task {
    pub fn pseudo_reward_at(&self, space: &FactoredSpace, values: &[usize]) -> Result<f64> {
        for (p, r) in &self.pseudo_reward {
            if p.eval(space, values)? {
                return Ok(*r);
            }
        }
        Ok(0.0)
    }

    pub fn has_pseudo_rewards(&self) -> bool {
        self.pseudo_reward.iter().any(|(_, r)| *r != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub space: FactoredSpace,
    pub tasks: Vec<Task>,
    pub root: String,
}

impl TaskGraph {
    pub fn task_index(&self, name: &str) -> Result<usize> {
        self.tasks
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::Graph(format!("unknown task `{name}`")))
    }

    pub fn root_index(&self) -> Result<usize> {
        self.task_index(&self.root)
    }

    /// Subtask indices of task `i`.
    pub fn children(&self, i: usize) -> Result<Vec<usize>> {
        self.tasks[i].subtasks.iter().map(|n| self.task_index(n)).collect()
    }

    /// Tasks ordered children-first. Fails on a cycle or unknown name.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        if let Some(cycle) = self.find_cycle()? {
            return Err(Error::Graph(format!("cycle: {}", cycle.join(" -> "))));
        }
        let mut order = Vec::new();
        let mut seen = vec![false; self.tasks.len()];
        fn visit(g: &TaskGraph, i: usize, seen: &mut [bool], order: &mut Vec<usize>) -> Result<()> {
            if seen[i] {
                return Ok(());
            }
            seen[i] = true;
            for c in g.children(i)? {
                visit(g, c, seen, order)?;
            }
            order.push(i);
            Ok(())
        }
        for i in 0..self.tasks.len() {
            visit(self, i, &mut seen, &mut order)?;
        }
        Ok(order)
    }

    /// Height of every task: 0 for leaves, 1 + max child height otherwise.
    pub fn heights(&self) -> Result<Vec<usize>> {
        let mut h = vec![0; self.tasks.len()];
        for i in self.topological_order()? {
            h[i] = self.children(i)?.iter().map(|&c| h[c] + 1).max().unwrap_or(0);
        }
        Ok(h)
    }

    fn find_cycle(&self) -> Result<Option<Vec<String>>> {
        // 0 unvisited, 1 on stack, 2 done
        let mut state = vec![0u8; self.tasks.len()];
        let mut stack = Vec::new();
        fn dfs(
            g: &TaskGraph,
            i: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Result<Option<Vec<String>>> {
            state[i] = 1;
            stack.push(i);
            for c in g.children(i)? {
                if state[c] == 1 {
                    let from = stack.iter().position(|&x| x == c).unwrap();
                    let mut names: Vec<String> = stack[from..].iter().map(|&x| g.tasks[x].name.clone()).collect();
                    names.push(g.tasks[c].name.clone());
                    return Ok(Some(names));
                }
                if state[c] == 0 {
                    if let Some(cy) = dfs(g, c, state, stack)? {
                        return Ok(Some(cy));
                    }
                }
            }
            stack.pop();
            state[i] = 2;
            Ok(None)
        }
        for i in 0..self.tasks.len() {
            if state[i] == 0 {
                if let Some(cy) = dfs(self, i, &mut state, &mut stack)? {
                    return Ok(Some(cy));
                }
            }
        }
        Ok(None)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graphviz description of the task graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tasks {\n  node [shape=box];\n");
        for t in &self.tasks {
            let shape = if t.name == self.root { ", style=bold" } else { "" };
            let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", t.name, t.name, shape);
        }
        for t in &self.tasks {
            for c in &t.subtasks {
                let _ = writeln!(out, "  \"{}\" -> \"{}\";", t.name, c);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Kind of structural problem found by [`super::validate_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphRule {
    UnknownName,
    Cycle,
    Unreachable,
    EmptyTermination,
    MissingNoOp,
    Overlap,
    Abstraction,
    SpaceMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphViolation {
    pub rule: GraphRule,
    pub tasks: Vec<String>,
    pub state: Option<StateId>,
    pub detail: String,
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]", self.rule, self.tasks.join(", "))?;
        if let Some(s) = self.state {
            write!(f, " at state {s}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

pub(crate) fn check_names(g: &TaskGraph) -> Vec<GraphViolation> {
    let mut out = Vec::new();
    let mut bad = |task: &str, detail: String| {
        out.push(GraphViolation {
            rule: GraphRule::UnknownName,
            tasks: vec![task.to_string()],
            state: None,
            detail,
        })
    };
    if g.task_index(&g.root).is_err() {
        bad(&g.root, "root task is not defined".into());
    }
    for (i, t) in g.tasks.iter().enumerate() {
        if g.tasks[..i].iter().any(|u| u.name == t.name) {
            bad(&t.name, "duplicate task name".into());
        }
        for c in &t.subtasks {
            if g.task_index(c).is_err() {
                bad(&t.name, format!("unknown subtask `{c}`"));
            }
        }
        let mut check = |p: &Predicate, what: &str| {
            if let Err(e) = p.check_vars(&g.space) {
                bad(&t.name, format!("{what}: {e}"));
            }
        };
        check(&t.termination, "termination");
        for (p, _) in &t.pseudo_reward {
            check(p, "pseudo-reward");
        }
        for v in &t.allowed_changes {
            if g.space.var_index(v).is_err() {
                bad(&t.name, format!("unknown variable `{v}` in allowed changes"));
            }
        }
        if let Some(a) = &t.abstraction {
            for v in a.keep.iter().chain(a.fill.keys()) {
                if g.space.var_index(v).is_err() {
                    bad(&t.name, format!("unknown variable `{v}` in abstraction"));
                }
            }
        }
    }
    out
}

pub(crate) fn check_structure(g: &TaskGraph) -> Vec<GraphViolation> {
    let mut out = Vec::new();
    match g.find_cycle() {
        Ok(Some(cycle)) => {
            let mut tasks = cycle.clone();
            tasks.pop();
            out.push(GraphViolation {
                rule: GraphRule::Cycle,
                tasks,
                state: None,
                detail: cycle.join(" -> "),
            });
            return out;
        }
        Ok(None) => {}
        Err(_) => return out,
    }
    let Ok(root) = g.root_index() else { return out };
    let mut reached = vec![false; g.tasks.len()];
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut reached[i], true) {
            continue;
        }
        stack.extend(g.children(i).unwrap_or_default());
    }
    for (i, r) in reached.iter().enumerate() {
        if !r {
            out.push(GraphViolation {
                rule: GraphRule::Unreachable,
                tasks: vec![g.tasks[i].name.clone()],
                state: None,
                detail: format!("not reachable from root `{}`", g.root),
            });
        }
    }
    out
}
