//! Simplified AGV warehouse: one vehicle moves raw parts from the warehouse
//! to two machines (zero processing time) and assembled parts to the unload
//! station. Movement is orientation constrained.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{FactoredSpace, HierarchicalProblem, Predicate, Projection, Task, TaskGraph};
use crate::lmdp::{Lmdp, StateId};

use super::taxi::Cell;

pub const N_ORIENTATIONS: usize = 4;
/// Buffer capacity per machine side.
pub const BUFFER_CAP: usize = 2;
/// Values of the carried-part variable.
pub const NOTHING: usize = 0;
pub const RAW: [usize; 2] = [1, 2];
pub const ASSEMBLED: [usize; 2] = [3, 4];

/// Final reward of part configurations from which the goal is unreachable.
pub const STUCK_REWARD: f64 = -100.0;

/// Station order used throughout: load, unload, M1 in, M1 out, M2 in, M2 out.
pub const STATION_NAMES: [&str; 6] = ["load", "unload", "m1_in", "m1_out", "m2_in", "m2_out"];

const REFERENCE_LAYOUT: &str = include_str!("../../layouts/agv_reference.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgvLayout {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<Cell>,
    pub load: Cell,
    pub unload: Cell,
    pub m1_in: Cell,
    pub m1_out: Cell,
    pub m2_in: Cell,
    pub m2_out: Cell,
    /// Orientation at the start: 0 up, 1 right, 2 down, 3 left.
    pub start_orientation: usize,
}

impl AgvLayout {
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_LAYOUT).expect("shipped layout parses")
    }

    pub fn reference_json() -> &'static str {
        REFERENCE_LAYOUT
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn stations(&self) -> [Cell; 6] {
        [self.load, self.unload, self.m1_in, self.m1_out, self.m2_in, self.m2_out]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgvState {
    /// Index into the free cells of the layout.
    pub cell: usize,
    pub o: usize,
    pub carried: usize,
    pub inb: [usize; 2],
    pub outb: [usize; 2],
    pub avail: [usize; 2],
}

impl AgvState {
    /// Parts of each type still in the system (warehouse, buffers, vehicle).
    pub fn parts_in_system(&self) -> [usize; 2] {
        let mut out = [0; 2];
        for k in 0..2 {
            let carried = usize::from(self.carried == RAW[k] || self.carried == ASSEMBLED[k]);
            out[k] = self.avail[k] + self.inb[k] + self.outb[k] + carried;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgvAction {
    Forward,
    TurnLeft,
    TurnRight,
    Stay,
    /// Take a raw part of the given type from the warehouse.
    Load(usize),
    /// Hand the carried raw part to its machine's input station.
    Drop,
    /// Take an assembled part from a machine's output station.
    Pickup,
    /// Deliver the carried assembled part.
    Unload,
}

pub const MOVES: [AgvAction; 4] = [AgvAction::Forward, AgvAction::TurnLeft, AgvAction::TurnRight, AgvAction::Stay];

#[derive(Debug, Clone)]
pub struct Agv {
    layout: AgvLayout,
    cells: Vec<Cell>,
    /// Cell index by `y * width + x`.
    index: Vec<Option<usize>>,
    stations: [usize; 6],
    space: FactoredSpace,
    lambda: f64,
    /// Navigation ends only in this orientation when set.
    pub terminal_orientation: Option<usize>,
}

impl Agv {
    pub fn new(layout: AgvLayout, lambda: f64) -> Result<Self> {
        let (w, h) = (layout.width, layout.height);
        let mut index = vec![None; w * h];
        let mut cells = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !layout.walls.contains(&[x, y]) {
                    index[y * w + x] = Some(cells.len());
                    cells.push([x, y]);
                }
            }
        }
        if layout.start_orientation >= N_ORIENTATIONS {
            return Err(Error::InvalidParameter("start orientation must be 0..4".into()));
        }
        let mut stations = [0; 6];
        for (k, c) in layout.stations().iter().enumerate() {
            if c[0] >= w || c[1] >= h {
                return Err(Error::InvalidParameter(format!("{} is outside the grid", STATION_NAMES[k])));
            }
            stations[k] = index[c[1] * w + c[0]]
                .ok_or_else(|| Error::InvalidParameter(format!("{} is on a wall", STATION_NAMES[k])))?;
            if stations[..k].contains(&stations[k]) {
                return Err(Error::InvalidParameter(format!("{} shares a cell", STATION_NAMES[k])));
            }
        }
        let space = FactoredSpace::new(&[
            ("cell", cells.len()),
            ("o", N_ORIENTATIONS),
            ("carried", 5),
            ("in1", BUFFER_CAP + 1),
            ("out1", BUFFER_CAP + 1),
            ("in2", BUFFER_CAP + 1),
            ("out2", BUFFER_CAP + 1),
            ("avail1", 2),
            ("avail2", 2),
        ]);
        let agv = Agv { layout, cells, index, stations, space, lambda, terminal_orientation: None };
        let reach = agv.reachable_cells(stations[0]);
        if let Some(k) = (0..6).find(|&k| !reach.contains(&stations[k])) {
            return Err(Error::InvalidParameter(format!("{} is unreachable", STATION_NAMES[k])));
        }
        Ok(agv)
    }

    pub fn layout(&self) -> &AgvLayout {
        &self.layout
    }

    pub fn space(&self) -> &FactoredSpace {
        &self.space
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_states(&self) -> usize {
        self.space.size()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_index(&self, c: Cell) -> Option<usize> {
        if c[0] >= self.layout.width || c[1] >= self.layout.height {
            return None;
        }
        self.index[c[1] * self.layout.width + c[0]]
    }

    pub fn cell(&self, i: usize) -> Cell {
        self.cells[i]
    }

    /// Cell index of each station, in [`STATION_NAMES`] order.
    pub fn stations(&self) -> [usize; 6] {
        self.stations
    }

    pub fn encode(&self, s: &AgvState) -> StateId {
        self.space
            .encode(&[s.cell, s.o, s.carried, s.inb[0], s.outb[0], s.inb[1], s.outb[1], s.avail[0], s.avail[1]])
            .expect("state in range")
    }

    pub fn decode(&self, id: StateId) -> Result<AgvState> {
        let v = self.space.decode(id)?;
        Ok(AgvState {
            cell: v[0],
            o: v[1],
            carried: v[2],
            inb: [v[3], v[5]],
            outb: [v[4], v[6]],
            avail: [v[7], v[8]],
        })
    }

    pub fn initial_state(&self) -> AgvState {
        AgvState {
            cell: self.stations[0],
            o: self.layout.start_orientation,
            carried: NOTHING,
            inb: [0, 0],
            outb: [0, 0],
            avail: [1, 1],
        }
    }

    /// Everything assembled and delivered.
    pub fn is_goal(&self, s: &AgvState) -> bool {
        s.parts_in_system() == [0, 0]
    }

    /// Cell ahead of `cell` facing `o`, or `cell` itself if blocked.
    pub fn forward_cell(&self, cell: usize, o: usize) -> usize {
        let [x, y] = self.cells[cell];
        let (dx, dy) = [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)][o];
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx as usize >= self.layout.width || ny as usize >= self.layout.height {
            return cell;
        }
        self.index[ny as usize * self.layout.width + nx as usize].unwrap_or(cell)
    }

    fn reachable_cells(&self, from: usize) -> Vec<usize> {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(c) = queue.pop_front() {
            for o in 0..N_ORIENTATIONS {
                let n = self.forward_cell(c, o);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        (0..self.cells.len()).filter(|&c| seen[c]).collect()
    }

    /// Result of `a` in `s`, or `None` if the action does not apply.
    pub fn apply(&self, s: &AgvState, a: AgvAction) -> Option<AgvState> {
        let mut t = *s;
        let at = |k: usize| s.cell == self.stations[k];
        match a {
            AgvAction::Forward => t.cell = self.forward_cell(s.cell, s.o),
            AgvAction::TurnLeft => t.o = (s.o + N_ORIENTATIONS - 1) % N_ORIENTATIONS,
            AgvAction::TurnRight => t.o = (s.o + 1) % N_ORIENTATIONS,
            AgvAction::Stay => {}
            AgvAction::Load(k) => {
                if k >= 2 || !at(0) || s.carried != NOTHING || s.avail[k] == 0 {
                    return None;
                }
                t.avail[k] -= 1;
                t.carried = RAW[k];
            }
            AgvAction::Drop => {
                let k = RAW.iter().position(|&r| r == s.carried)?;
                if !at(2 + 2 * k) {
                    return None;
                }
                // zero processing time: straight to the output buffer when it has room
                if s.outb[k] < BUFFER_CAP {
                    t.outb[k] += 1;
                } else if s.inb[k] < BUFFER_CAP {
                    t.inb[k] += 1;
                } else {
                    return None;
                }
                t.carried = NOTHING;
            }
            AgvAction::Pickup => {
                let k = (0..2).find(|&k| at(3 + 2 * k))?;
                if s.carried != NOTHING || s.outb[k] + s.inb[k] == 0 {
                    return None;
                }
                if s.outb[k] > 0 {
                    t.outb[k] -= 1;
                    if t.inb[k] > 0 {
                        t.inb[k] -= 1;
                        t.outb[k] += 1;
                    }
                } else {
                    // input waiting behind an empty output: processed on the spot
                    t.inb[k] -= 1;
                }
                t.carried = ASSEMBLED[k];
            }
            AgvAction::Unload => {
                if !at(1) || !ASSEMBLED.contains(&s.carried) {
                    return None;
                }
                t.carried = NOTHING;
            }
        }
        Some(t)
    }

    /// Applicable actions and their results; the four moves always apply.
    pub fn actions(&self, s: &AgvState) -> Vec<(AgvAction, AgvState)> {
        let all = MOVES.into_iter().chain([
            AgvAction::Load(0),
            AgvAction::Load(1),
            AgvAction::Drop,
            AgvAction::Pickup,
            AgvAction::Unload,
        ]);
        all.filter_map(|a| self.apply(s, a).map(|t| (a, t))).collect()
    }

    /// Uniform passive over applicable actions (a blocked forward adds to
    /// the self-transition), reward -1 per step, final reward 0 at the goal.
    /// Part configurations that cannot reach the goal (more parts of a type
    /// than the machine can hold) are made absorbing with [`STUCK_REWARD`];
    /// no state reachable from the initial state leads there.
    pub fn base_lmdp(&self) -> Result<Lmdp> {
        let n = self.n_states();
        let mut rows: Vec<Vec<(StateId, f64)>> = Vec::with_capacity(n);
        let mut goal = vec![false; n];
        for id in 0..n {
            let s = self.decode(id)?;
            if self.is_goal(&s) {
                goal[id] = true;
                rows.push(Vec::new());
                continue;
            }
            let acts = self.actions(&s);
            let p = 1.0 / acts.len() as f64;
            let mut row: Vec<(StateId, f64)> = Vec::new();
            for (_, t) in acts {
                let t = self.encode(&t);
                match row.iter_mut().find(|e| e.0 == t) {
                    Some(e) => e.1 += p,
                    None => row.push((t, p)),
                }
            }
            rows.push(row);
        }
        with_stuck_terminals(n, self.lambda, &rows, &goal, |_, _| -1.0)
    }

    /// Length of a shortest action sequence from the initial state to the
    /// goal, found by breadth-first search.
    pub fn goal_certificate(&self) -> Result<usize> {
        let start = self.initial_state();
        let mut dist = vec![usize::MAX; self.n_states()];
        let mut queue = VecDeque::from([start]);
        dist[self.encode(&start)] = 0;
        while let Some(s) = queue.pop_front() {
            let d = dist[self.encode(&s)];
            if self.is_goal(&s) {
                return Ok(d);
            }
            for (_, t) in self.actions(&s) {
                let id = self.encode(&t);
                if dist[id] == usize::MAX {
                    dist[id] = d + 1;
                    queue.push_back(t);
                }
            }
        }
        Err(Error::InvalidModel("goal unreachable from the initial state".into()))
    }

    /// Navigation state `(cell, o)` index.
    pub fn nav_state(&self, cell: usize, o: usize) -> StateId {
        cell * N_ORIENTATIONS + o
    }

    pub fn n_nav_states(&self) -> usize {
        self.cells.len() * N_ORIENTATIONS
    }

    fn nav_terminal(&self, j: usize, cell: usize, o: usize) -> bool {
        cell == self.stations[j] && self.terminal_orientation.map_or(true, |t| t == o)
    }

    /// Navigation to station `j` over `(cell, o)`.
    pub fn navigate_lmdp(&self, j: usize) -> Result<Lmdp> {
        let mut edges = Vec::new();
        let mut terminals = Vec::new();
        let mut rewards = vec![-1.0; self.n_nav_states()];
        for cell in 0..self.cells.len() {
            for o in 0..N_ORIENTATIONS {
                let id = self.nav_state(cell, o);
                if self.nav_terminal(j, cell, o) {
                    terminals.push((id, 0.0));
                    rewards[id] = 0.0;
                    continue;
                }
                let targets = [
                    self.nav_state(self.forward_cell(cell, o), o),
                    self.nav_state(cell, (o + N_ORIENTATIONS - 1) % N_ORIENTATIONS),
                    self.nav_state(cell, (o + 1) % N_ORIENTATIONS),
                    id,
                ];
                let mut row: Vec<(StateId, f64)> = Vec::new();
                for t in targets {
                    match row.iter_mut().find(|e| e.0 == t) {
                        Some(e) => e.1 += 0.25,
                        None => row.push((t, 0.25)),
                    }
                }
                edges.extend(row.into_iter().map(|(t, p)| (id, t, p)));
            }
        }
        Lmdp::with_state_rewards(self.n_nav_states(), self.lambda, &edges, rewards, &terminals)
    }

    pub fn navigate_name(j: usize) -> String {
        format!("navigate_{}", STATION_NAMES[j])
    }

    /// Generic task graph: root over the full state changing only part
    /// variables, six navigation tasks over `(cell, o)`.
    pub fn task_graph(&self) -> TaskGraph {
        let parts = ["carried", "in1", "out1", "in2", "out2", "avail1", "avail2"];
        let goal = Predicate::All(
            ["carried", "in1", "out1", "in2", "out2", "avail1", "avail2"]
                .iter()
                .map(|v| Predicate::eq(v, 0))
                .collect(),
        );
        let mut tasks = vec![Task {
            name: "root".into(),
            termination: goal,
            pseudo_reward: Vec::new(),
            subtasks: (0..6).map(Self::navigate_name).collect(),
            allowed_changes: parts.iter().map(|s| s.to_string()).collect(),
            abstraction: None,
        }];
        for j in 0..6 {
            let mut term = vec![Predicate::eq("cell", self.stations[j])];
            if let Some(o) = self.terminal_orientation {
                term.push(Predicate::eq("o", o));
            }
            tasks.push(Task {
                name: Self::navigate_name(j),
                termination: Predicate::All(term),
                pseudo_reward: Vec::new(),
                subtasks: Vec::new(),
                allowed_changes: vec!["cell".into(), "o".into()],
                abstraction: Some(Projection {
                    keep: vec!["cell".into(), "o".into()],
                    // any non-goal part configuration
                    fill: [("avail1".to_string(), 1)].into(),
                }),
            });
        }
        TaskGraph { space: self.space.clone(), tasks, root: "root".into() }
    }

    pub fn problem(&self) -> Result<HierarchicalProblem> {
        HierarchicalProblem::new(self.base_lmdp()?, self.task_graph())
    }
}

/// A root decision: a primitive action that keeps the vehicle in place, or
/// navigation to a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootOption {
    Act(AgvAction),
    Navigate(usize),
}

/// Root task with result-distribution irrelevance: the root only decides at
/// stations, so its states are `(station, parts)` and orientation is dropped.
#[derive(Debug, Clone)]
pub struct AgvRoot {
    space: FactoredSpace,
    options: Vec<Vec<(RootOption, StateId)>>,
    terminal: Vec<bool>,
}

impl AgvRoot {
    pub fn new(agv: &Agv) -> Result<Self> {
        let space = FactoredSpace::new(&[
            ("station", 6),
            ("carried", 5),
            ("in1", BUFFER_CAP + 1),
            ("out1", BUFFER_CAP + 1),
            ("in2", BUFFER_CAP + 1),
            ("out2", BUFFER_CAP + 1),
            ("avail1", 2),
            ("avail2", 2),
        ]);
        let mut root = AgvRoot { space, options: Vec::new(), terminal: Vec::new() };
        for r in 0..root.space.size() {
            let s = root.representative(agv, r)?;
            if agv.is_goal(&s) {
                root.terminal.push(true);
                root.options.push(Vec::new());
                continue;
            }
            let k = root.station_of(r)?;
            let mut opts = Vec::new();
            for (a, t) in agv.actions(&s) {
                let moves = matches!(a, AgvAction::Forward | AgvAction::TurnLeft | AgvAction::TurnRight);
                if !moves && !opts.iter().any(|&(_, x)| x == root.project(agv, &t).unwrap()) {
                    opts.push((RootOption::Act(a), root.project(agv, &t).expect("at a station")));
                }
            }
            for j in (0..6).filter(|&j| j != k) {
                let t = AgvState { cell: agv.stations[j], ..s };
                opts.push((RootOption::Navigate(j), root.project(agv, &t).expect("at a station")));
            }
            root.terminal.push(false);
            root.options.push(opts);
        }
        Ok(root)
    }

    pub fn n_states(&self) -> usize {
        self.space.size()
    }

    pub fn is_terminal(&self, r: StateId) -> bool {
        self.terminal[r]
    }

    /// Options at `r` with their root targets; empty at terminals.
    pub fn options(&self, r: StateId) -> &[(RootOption, StateId)] {
        &self.options[r]
    }

    pub fn station_of(&self, r: StateId) -> Result<usize> {
        Ok(self.space.decode(r)?[0])
    }

    /// Root state of `s`, or `None` when the vehicle is not at a station.
    pub fn project(&self, agv: &Agv, s: &AgvState) -> Option<StateId> {
        let k = agv.stations.iter().position(|&c| c == s.cell)?;
        self.space
            .encode(&[k, s.carried, s.inb[0], s.outb[0], s.inb[1], s.outb[1], s.avail[0], s.avail[1]])
            .ok()
    }

    /// Base state at the station of `r`, facing up.
    pub fn representative(&self, agv: &Agv, r: StateId) -> Result<AgvState> {
        let v = self.space.decode(r)?;
        Ok(AgvState {
            cell: agv.stations[v[0]],
            o: 0,
            carried: v[1],
            inb: [v[2], v[4]],
            outb: [v[3], v[5]],
            avail: [v[6], v[7]],
        })
    }

    /// Reward of navigating to station `j` from the station of `r`: the
    /// navigation value averaged over the arrival orientation.
    pub fn navigate_reward(&self, agv: &Agv, r: StateId, nav_values: &[f64]) -> Result<f64> {
        let cell = agv.stations[self.station_of(r)?];
        let total: f64 = (0..N_ORIENTATIONS).map(|o| nav_values[agv.nav_state(cell, o)]).sum();
        Ok(total / N_ORIENTATIONS as f64)
    }

    /// Root LMDP with uniform passive dynamics over options; `nav_values[j]`
    /// holds the values of navigation task `j` over `(cell, o)`.
    pub fn lmdp(&self, agv: &Agv, nav_values: &[Vec<f64>]) -> Result<Lmdp> {
        if nav_values.len() != 6 {
            return Err(Error::IndexMismatch(nav_values.len(), 6));
        }
        let mut rows = Vec::with_capacity(self.n_states());
        let mut rewards = Vec::with_capacity(self.n_states());
        for r in 0..self.n_states() {
            let p = 1.0 / self.options[r].len().max(1) as f64;
            let mut row = Vec::new();
            let mut rew = Vec::new();
            for &(o, t) in &self.options[r] {
                row.push((t, p));
                rew.push(match o {
                    RootOption::Act(_) => -1.0,
                    RootOption::Navigate(j) => self.navigate_reward(agv, r, &nav_values[j])?,
                });
            }
            rows.push(row);
            rewards.push(rew);
        }
        with_stuck_terminals(self.n_states(), agv.lambda, &rows, &self.terminal, |s, k| rewards[s][k])
    }
}

/// Builds a transition-reward LMDP from uniform-ish rows, turning states that
/// cannot reach a goal into absorbing states with [`STUCK_REWARD`].
fn with_stuck_terminals(
    n: usize,
    lambda: f64,
    rows: &[Vec<(StateId, f64)>],
    goal: &[bool],
    reward: impl Fn(StateId, usize) -> f64,
) -> Result<Lmdp> {
    let mut reach = goal.to_vec();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, row) in rows.iter().enumerate() {
        for &(t, _) in row {
            preds[t].push(s);
        }
    }
    let mut stack: Vec<StateId> = (0..n).filter(|&s| goal[s]).collect();
    while let Some(x) = stack.pop() {
        for &p in &preds[x] {
            if !reach[p] {
                reach[p] = true;
                stack.push(p);
            }
        }
    }
    let mut edges = Vec::new();
    let mut terminals = Vec::new();
    for s in 0..n {
        if goal[s] {
            terminals.push((s, 0.0));
        } else if !reach[s] {
            terminals.push((s, STUCK_REWARD));
        } else {
            edges.extend(rows[s].iter().enumerate().map(|(k, &(t, p))| (s, t, p, reward(s, k))));
        }
    }
    Lmdp::with_transition_rewards(n, lambda, &edges, &terminals)
}

/// Simulator tracking deliveries, with a part-conservation check on every step.
#[derive(Debug, Clone)]
pub struct AgvEnv<'a> {
    agv: &'a Agv,
    state: AgvState,
    delivered: [usize; 2],
    initial_parts: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgvStep {
    pub reward: f64,
    pub delivered: bool,
    pub done: bool,
}

impl<'a> AgvEnv<'a> {
    pub fn new(agv: &'a Agv) -> Self {
        let state = agv.initial_state();
        AgvEnv { agv, state, delivered: [0, 0], initial_parts: state.parts_in_system() }
    }

    pub fn state(&self) -> &AgvState {
        &self.state
    }

    pub fn delivered(&self) -> [usize; 2] {
        self.delivered
    }

    pub fn reset(&mut self) {
        *self = AgvEnv::new(self.agv);
    }

    pub fn step(&mut self, a: AgvAction) -> Result<AgvStep> {
        let next = self
            .agv
            .apply(&self.state, a)
            .ok_or_else(|| Error::InvalidParameter(format!("{a:?} does not apply")))?;
        let delivered = a == AgvAction::Unload;
        if delivered {
            let k = ASSEMBLED.iter().position(|&c| c == self.state.carried).expect("unload carries an assembly");
            self.delivered[k] += 1;
        }
        self.state = next;
        let now = self.state.parts_in_system();
        for k in 0..2 {
            if now[k] + self.delivered[k] != self.initial_parts[k] {
                return Err(Error::InvalidModel(format!("part conservation violated for type {}", k + 1)));
            }
        }
        Ok(AgvStep { reward: -1.0, delivered, done: self.agv.is_goal(&self.state) })
    }

    /// Moves the vehicle to `(cell, o)` via the move action that produces it.
    pub fn step_to(&mut self, target: &AgvState) -> Result<AgvStep> {
        let a = self
            .agv
            .actions(&self.state)
            .into_iter()
            .find(|(_, t)| t == target)
            .map(|(a, _)| a)
            .ok_or_else(|| Error::InvalidParameter("no action reaches the requested state".into()))?;
        self.step(a)
    }
}
