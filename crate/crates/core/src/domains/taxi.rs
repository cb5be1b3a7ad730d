//! Taxi: drive to the passenger, pick them up, drive to the destination and
//! put them down. State `(x, y, c)` with `c` the landmark holding the
//! passenger, or `IN_TAXI`.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{FactoredSpace, HierarchicalProblem, Predicate, Projection, Task, TaskGraph};
use crate::learning::Rng;
use crate::lmdp::{Lmdp, StateId};

/// Passenger location value meaning "in the taxi".
pub const IN_TAXI: usize = 4;

pub type Cell = [usize; 2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxiLayout {
    pub grid_size: usize,
    pub landmarks: [Cell; 4],
    /// Blocked moves between adjacent cells (both directions).
    #[serde(default)]
    pub walls: Vec<[Cell; 2]>,
    /// Landmark where the passenger must be put down.
    pub destination: usize,
}

impl TaxiLayout {
    /// Open `n x n` grid with landmarks in the corners.
    pub fn open(n: usize) -> Self {
        TaxiLayout {
            grid_size: n,
            landmarks: [[0, 0], [n - 1, 0], [0, n - 1], [n - 1, n - 1]],
            walls: Vec::new(),
            destination: 3,
        }
    }

    /// The classic 5x5 map with its four wall segments (y grows downwards).
    pub fn classic() -> Self {
        let w = |a: Cell, b: Cell| [a, b];
        TaxiLayout {
            grid_size: 5,
            landmarks: [[0, 0], [4, 0], [0, 4], [3, 4]],
            walls: vec![
                w([1, 0], [2, 0]),
                w([1, 1], [2, 1]),
                w([0, 3], [1, 3]),
                w([0, 4], [1, 4]),
                w([2, 3], [3, 3]),
                w([2, 4], [3, 4]),
            ],
            destination: 3,
        }
    }

    /// Named layouts: `open<N>` (e.g. `open15`) or `classic`.
    pub fn preset(name: &str) -> Result<Self> {
        if name == "classic" {
            return Ok(Self::classic());
        }
        match name.strip_prefix("open").map(str::parse::<usize>) {
            Some(Ok(n)) if n >= 2 => Ok(Self::open(n)),
            _ => Err(Error::InvalidParameter(format!("unknown taxi layout `{name}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid_size;
        if n < 2 {
            return Err(Error::InvalidParameter("taxi grid must be at least 2x2".into()));
        }
        let inside = |c: &Cell| c[0] < n && c[1] < n;
        let distinct: BTreeSet<Cell> = self.landmarks.iter().copied().collect();
        if distinct.len() != 4 || !self.landmarks.iter().all(inside) {
            return Err(Error::InvalidParameter("landmarks must be four distinct in-grid cells".into()));
        }
        if self.destination >= 4 {
            return Err(Error::InvalidParameter(format!("destination {} is not a landmark", self.destination)));
        }
        for [a, b] in &self.walls {
            let adjacent = a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]) == 1;
            if !inside(a) || !inside(b) || !adjacent {
                return Err(Error::InvalidParameter(format!("wall {a:?}-{b:?} is not between adjacent cells")));
            }
        }
        Ok(())
    }

    fn blocked(&self, a: Cell, b: Cell) -> bool {
        self.walls.iter().any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
    }

    /// Cells reachable by one legal move from `cell`.
    pub fn neighbours(&self, cell: Cell) -> Vec<Cell> {
        let n = self.grid_size as i64;
        let mut out = Vec::with_capacity(4);
        // north, south, east, west
        for (dx, dy) in [(0i64, -1i64), (0, 1), (1, 0), (-1, 0)] {
            let (x, y) = (cell[0] as i64 + dx, cell[1] as i64 + dy);
            if (0..n).contains(&x) && (0..n).contains(&y) {
                let next = [x as usize, y as usize];
                if !self.blocked(cell, next) {
                    out.push(next);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxiState {
    pub x: usize,
    pub y: usize,
    pub c: usize,
}

#[derive(Debug, Clone)]
pub struct Taxi {
    layout: TaxiLayout,
    space: FactoredSpace,
    lambda: f64,
}

impl Taxi {
    pub fn new(layout: TaxiLayout, lambda: f64) -> Result<Self> {
        layout.validate()?;
        let n = layout.grid_size;
        Ok(Taxi {
            space: FactoredSpace::new(&[("x", n), ("y", n), ("c", 5)]),
            layout,
            lambda,
        })
    }

    pub fn layout(&self) -> &TaxiLayout {
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

    pub fn encode(&self, s: TaxiState) -> Result<StateId> {
        self.space.encode(&[s.x, s.y, s.c])
    }

    pub fn decode(&self, id: StateId) -> Result<TaxiState> {
        let v = self.space.decode(id)?;
        Ok(TaxiState { x: v[0], y: v[1], c: v[2] })
    }

    pub fn is_delivered(&self, s: TaxiState) -> bool {
        s.c == self.layout.destination
    }

    /// Distinct successors of a non-terminal state: moves, idle, pickup and putdown.
    pub fn successors(&self, s: TaxiState) -> Vec<TaxiState> {
        let here = [s.x, s.y];
        let mut out: Vec<TaxiState> = self
            .layout
            .neighbours(here)
            .into_iter()
            .map(|[x, y]| TaxiState { x, y, c: s.c })
            .collect();
        out.push(s);
        if s.c < IN_TAXI && self.layout.landmarks[s.c] == here {
            out.push(TaxiState { c: IN_TAXI, ..s });
        }
        if s.c == IN_TAXI {
            if let Some(l) = self.layout.landmarks.iter().position(|&m| m == here) {
                out.push(TaxiState { c: l, ..s });
            }
        }
        out
    }

    /// Random-walk passive dynamics, reward -1 per step, final reward 0 once
    /// the passenger is at the destination.
    pub fn base_lmdp(&self) -> Result<Lmdp> {
        let n = self.n_states();
        let mut edges = Vec::new();
        let mut terminals = Vec::new();
        let mut rewards = vec![-1.0; n];
        for id in 0..n {
            let s = self.decode(id)?;
            if self.is_delivered(s) {
                terminals.push((id, 0.0));
                rewards[id] = 0.0;
                continue;
            }
            let next = self.successors(s);
            let p = 1.0 / next.len() as f64;
            for t in next {
                edges.push((id, self.encode(t)?, p));
            }
        }
        Lmdp::with_state_rewards(n, self.lambda, &edges, rewards, &terminals)
    }

    pub fn navigate_name(t: usize) -> String {
        format!("navigate{t}")
    }

    /// Root with four navigation subtasks, each over `(x, y)` only.
    pub fn task_graph(&self) -> TaskGraph {
        let mut tasks = vec![Task {
            name: "root".into(),
            termination: Predicate::eq("c", self.layout.destination),
            pseudo_reward: Vec::new(),
            subtasks: (0..4).map(Self::navigate_name).collect(),
            allowed_changes: vec!["c".into()],
            abstraction: None,
        }];
        for (t, [lx, ly]) in self.layout.landmarks.iter().enumerate() {
            tasks.push(Task {
                name: Self::navigate_name(t),
                termination: Predicate::All(vec![Predicate::eq("x", *lx), Predicate::eq("y", *ly)]),
                pseudo_reward: Vec::new(),
                subtasks: Vec::new(),
                allowed_changes: vec!["x".into(), "y".into()],
                abstraction: Some(Projection {
                    keep: vec!["x".into(), "y".into()],
                    fill: [("c".to_string(), IN_TAXI)].into(),
                }),
            });
        }
        TaskGraph { space: self.space.clone(), tasks, root: "root".into() }
    }

    pub fn problem(&self) -> Result<HierarchicalProblem> {
        HierarchicalProblem::new(self.base_lmdp()?, self.task_graph())
    }

    /// States an episode may start from: any cell, passenger waiting at a
    /// landmark other than the destination.
    pub fn start_states(&self) -> Vec<StateId> {
        (0..self.n_states())
            .filter(|&id| {
                let s = self.decode(id).unwrap();
                s.c < IN_TAXI && s.c != self.layout.destination
            })
            .collect()
    }

    /// Uniform cell and a passenger source drawn among the three non-destination landmarks.
    pub fn sample_start(&self, rng: &mut Rng) -> StateId {
        let n = self.layout.grid_size;
        let sources: Vec<usize> = (0..4).filter(|&l| l != self.layout.destination).collect();
        let s = TaxiState {
            x: rng.gen_range(0..n),
            y: rng.gen_range(0..n),
            c: sources[rng.gen_range(0..sources.len())],
        };
        self.encode(s).expect("in range")
    }

    /// Cells reachable from `from` by legal moves.
    pub fn reachable_cells(&self, from: Cell) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(c) = stack.pop() {
            for nb in self.layout.neighbours(c) {
                if seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_task_lmdp, validate_graph};
    use crate::solver::{direct_solve, value_of};

    #[test]
    fn corner_has_three_successors() {
        let taxi = Taxi::new(TaxiLayout::open(5), 1.0).unwrap();
        let m = taxi.base_lmdp().unwrap();
        let corner = taxi.encode(TaxiState { x: 0, y: 4, c: IN_TAXI }).unwrap();
        // corner (0,4) is landmark 2: moves N, E, idle and putdown
        assert_eq!(m.passive().row_vals(corner).len(), 4);
        let plain = taxi.encode(TaxiState { x: 4, y: 0, c: 0 }).unwrap();
        let vals = m.passive().row_vals(plain);
        assert_eq!(vals.len(), 3);
        assert!(vals.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(m.validate().is_empty());
    }

    #[test]
    fn codec_round_trip() {
        let taxi = Taxi::new(TaxiLayout::open(4), 1.0).unwrap();
        assert_eq!(taxi.n_states(), 80);
        for id in 0..80 {
            assert_eq!(taxi.encode(taxi.decode(id).unwrap()).unwrap(), id);
        }
    }

    #[test]
    fn graph_validates_and_projects() {
        for layout in [TaxiLayout::open(5), TaxiLayout::classic()] {
            let taxi = Taxi::new(layout, 1.0).unwrap();
            let p = taxi.problem().unwrap();
            assert_eq!(validate_graph(&p), vec![]);
            assert_eq!(p.task(1).abstraction.n_abstract(), 25);
            assert_eq!(p.task(0).abstraction.n_abstract(), 125);
        }
        let big = Taxi::new(TaxiLayout::open(25), 1.0).unwrap();
        assert_eq!(big.n_states(), 3125);
        let p = big.problem().unwrap();
        assert_eq!(p.task(1).abstraction.n_abstract(), 625);
    }

    #[test]
    fn navigate_values_fall_with_distance() {
        let taxi = Taxi::new(TaxiLayout::open(5), 1.0).unwrap();
        let p = taxi.problem().unwrap();
        let nav = build_task_lmdp(&p, 1, &[]).unwrap().lmdp;
        let v = value_of(&direct_solve(&nav).unwrap(), 1.0).unwrap();
        // landmark 0 is (0, 0); abstract id is x * 5 + y
        assert_eq!(v[0], 0.0);
        for k in 1..5 {
            assert!(v[k * 5] < v[(k - 1) * 5]);
            assert!(v[k] < v[k - 1]);
        }
    }

    #[test]
    fn moves_are_reversible() {
        let taxi = Taxi::new(TaxiLayout::classic(), 1.0).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                for nb in taxi.layout().neighbours([x, y]) {
                    assert!(taxi.layout().neighbours(nb).contains(&[x, y]));
                }
            }
        }
        assert_eq!(taxi.reachable_cells([0, 0]).len(), 25);
    }

    #[test]
    fn layout_errors() {
        let mut l = TaxiLayout::open(5);
        l.landmarks[1] = l.landmarks[0];
        assert!(Taxi::new(l, 1.0).is_err());
        let mut l = TaxiLayout::open(5);
        l.walls.push([[0, 0], [2, 0]]);
        assert!(Taxi::new(l, 1.0).is_err());
        assert_eq!(TaxiLayout::preset("open15").unwrap().grid_size, 15);
        assert!(TaxiLayout::preset("mystery").is_err());
    }

    #[test]
    fn starts_exclude_destination() {
        let taxi = Taxi::new(TaxiLayout::open(5), 1.0).unwrap();
        let starts = taxi.start_states();
        assert_eq!(starts.len(), 75);
        let mut rng = crate::learning::rng_for(1, 0);
        for _ in 0..100 {
            let s = taxi.decode(taxi.sample_start(&mut rng)).unwrap();
            assert!(s.c < IN_TAXI && s.c != 3);
        }
    }
}
