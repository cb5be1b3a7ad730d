//! Seeded experiment runs: learning curves measured against exact solutions,
//! AGV throughput, parameter sweeps and aggregation over seeds.

mod agv;
pub mod random;
mod sweep;
mod taxi;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domains::{AgvLayout, TaxiLayout};
use crate::error::{Error, Result};
use crate::hierarchy::RewardMode;
use crate::learning::{
    Agent, IntraQLearner, IntraZLearner, QLearner, Rng, Sampling, TaskModel, Transition, ZLearner,
};
use crate::lmdp::{embed_traditional_mdp, Lmdp, Policy, StateId};
use crate::solver::SolveReport;

pub use sweep::{
    aggregate, cell_name, quantile, read_runs, select_best, sweep, write_report, AggRow, Aggregate, SweepGrid,
};

/// Written into every output; aggregation refuses to mix versions.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "Z-IS")]
    ZIs,
    #[serde(rename = "Z-IS-IL")]
    ZIsIl,
    #[serde(rename = "Q-G")]
    QG,
    #[serde(rename = "Q-G-IL")]
    QGIl,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Z, Method::ZIs, Method::ZIsIl, Method::QG, Method::QGIl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Z => "Z",
            Method::ZIs => "Z-IS",
            Method::ZIsIl => "Z-IS-IL",
            Method::QG => "Q-G",
            Method::QGIl => "Q-G-IL",
        }
    }

    pub fn is_q(self) -> bool {
        matches!(self, Method::QG | Method::QGIl)
    }

    pub fn is_intra(self) -> bool {
        matches!(self, Method::ZIsIl | Method::QGIl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The four navigation tasks of Taxi, error summed over tasks.
    TaxiNavigate,
    /// The Taxi root task over exactly solved navigation tasks.
    TaxiRoot,
    /// Online hierarchical learning in the AGV warehouse, measured by throughput.
    AgvThroughput,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::TaxiNavigate => "taxi-navigate",
            Domain::TaxiRoot => "taxi-root",
            Domain::AgvThroughput => "agv-throughput",
        }
    }

    /// Whether lower metric values are better.
    pub fn minimizes(self) -> bool {
        self != Domain::AgvThroughput
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Domain::TaxiNavigate, Domain::TaxiRoot, Domain::AgvThroughput]
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown domain `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Missing fields take their defaults.
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: Domain,
    /// Taxi: a preset (`classic`, `openN`) or a layout file. AGV: `reference`
    /// or a layout file.
    pub layout: String,
    pub method: Method,
    pub lambda: f64,
    /// Learning-rate constant in `c / (c + trial)`.
    pub c: f64,
    /// Exploration rate, Q methods only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Trials (Taxi) or throughput windows (AGV).
    pub trials: usize,
    /// Step cap per trial or episode.
    pub max_steps: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_reward_mode")]
    pub reward_mode: RewardMode,
    /// Primitive steps per throughput window (AGV).
    #[serde(default = "default_window")]
    pub window: usize,
    /// Penalty for composing multi-terminal subtasks; `-25 lambda` if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

fn default_reward_mode() -> RewardMode {
    RewardMode::Accumulated
}

fn default_window() -> usize {
    1000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: Domain::TaxiNavigate,
            layout: "open15".into(),
            method: Method::ZIs,
            lambda: 1.0,
            c: 1000.0,
            epsilon: None,
            trials: 5000,
            max_steps: 10_000,
            seeds: vec![0],
            reward_mode: default_reward_mode(),
            window: default_window(),
            penalty: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if self.trials == 0 || self.max_steps == 0 || self.window == 0 {
            return bad("trials, max_steps and window must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        match self.epsilon {
            Some(_) if !self.method.is_q() => {
                return bad(format!("epsilon only applies to Q methods, not {}", self.method));
            }
            Some(e) if !(0.0..=1.0).contains(&e) => return bad(format!("epsilon must be in [0, 1], got {e}")),
            _ => {}
        }
        if self.domain == Domain::TaxiRoot && self.method.is_intra() {
            return bad("the root task is a single task; intra-task learning does not apply".into());
        }
        if let Some(c) = self.penalty {
            if !(c < 0.0) {
                return bad(format!("penalty must be negative, got {c}"));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn resolve_layout(&self) -> Result<Layout> {
        Layout::resolve(self.domain, &self.layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Layout {
    Taxi(TaxiLayout),
    Agv(AgvLayout),
}

impl Layout {
    /// A preset name or a JSON file path.
    pub fn resolve(domain: Domain, name: &str) -> Result<Self> {
        let from_file = name.ends_with(".json");
        let text = if from_file { Some(fs::read_to_string(name)?) } else { None };
        match domain {
            Domain::TaxiNavigate | Domain::TaxiRoot => {
                let layout = match text {
                    Some(t) => serde_json::from_str(&t)?,
                    None => TaxiLayout::preset(name)?,
                };
                layout.validate()?;
                Ok(Layout::Taxi(layout))
            }
            Domain::AgvThroughput => match (text, name) {
                (Some(t), _) => Ok(Layout::Agv(AgvLayout::from_json(&t)?)),
                (None, "reference") => Ok(Layout::Agv(AgvLayout::reference())),
                (None, _) => Err(Error::InvalidParameter(format!("unknown AGV layout `{name}`"))),
            },
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("layout serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// One point of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial: usize,
    /// L1 value error, or throughput for the AGV.
    pub metric: f64,
    /// Cumulative steps so far.
    pub steps: usize,
    pub wall_ms: f64,
    /// Cumulative importance-weight clips.
    pub clips: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub method: Method,
    pub seed: u64,
    pub rows: Vec<CurveRow>,
}

const CSV_HEADER: &str = "trial,metric,steps,seed,method";

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{:?},{},{},{}\n", r.trial, r.metric, r.steps, self.seed, self.method));
        }
        out
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut out = String::from("trial,wall_ms,clips\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.3},{}\n", r.trial, r.wall_ms, r.clips));
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output; wall time and clips are not stored there.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Format(format!("expected header `{CSV_HEADER}`")));
        }
        let mut rows = Vec::new();
        let mut id = None;
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let parse_err = || Error::Format(format!("line {}: `{line}`", n + 2));
            if f.len() != 5 {
                return Err(parse_err());
            }
            let method: Method = f[4].parse()?;
            let seed: u64 = f[3].parse().map_err(|_| parse_err())?;
            if *id.get_or_insert((method, seed)) != (method, seed) {
                return Err(Error::Format("one curve per file".into()));
            }
            rows.push(CurveRow {
                trial: f[0].parse().map_err(|_| parse_err())?,
                metric: f[1].parse().map_err(|_| parse_err())?,
                steps: f[2].parse().map_err(|_| parse_err())?,
                wall_ms: 0.0,
                clips: 0,
            });
        }
        let (method, seed) = id.ok_or_else(|| Error::Format("empty curve".into()))?;
        Ok(LearningCurve { method, seed, rows })
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.rows.last().map(|r| r.metric)
    }
}

/// Metadata written next to every curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub layout_hash: String,
    pub c: f64,
    pub epsilon: Option<f64>,
    /// Reports of the exact solves behind the error metric or the embedding.
    pub solver: Vec<SolveReport>,
    /// Shortest goal distance (AGV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_certificate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub curve: LearningCurve,
    pub meta: RunMeta,
}

/// `sum_s |estimate(s) - optimal(s)|` over non-terminal states.
pub fn l1_error(estimate: &[f64], optimal: &[f64], terminal: &[bool]) -> Result<f64> {
    if estimate.len() != optimal.len() {
        return Err(Error::IndexMismatch(estimate.len(), optimal.len()));
    }
    if terminal.len() != optimal.len() {
        return Err(Error::IndexMismatch(terminal.len(), optimal.len()));
    }
    Ok(estimate
        .iter()
        .zip(optimal)
        .zip(terminal)
        .filter(|(_, &t)| !t)
        .map(|((e, o), _)| (e - o).abs())
        .sum())
}

/// Deliveries per step in consecutive windows of `window` steps, given the
/// step indices at which deliveries happened. A trailing partial window is dropped.
pub fn throughput(deliveries: &[usize], total_steps: usize, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    let mut counts = vec![0usize; total_steps / window];
    for &d in deliveries {
        if let Some(c) = counts.get_mut(d / window) {
            *c += 1;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / window as f64).collect())
}

/// Steps at which the trailing mean over `smooth` rows first reaches
/// `fraction` of the plateau, the mean of the last fifth of the curve.
pub fn steps_to_plateau_fraction(rows: &[CurveRow], fraction: f64, smooth: usize) -> Option<usize> {
    if rows.is_empty() || smooth == 0 {
        return None;
    }
    let tail = (rows.len() / 5).max(1);
    let plateau = rows[rows.len() - tail..].iter().map(|r| r.metric).sum::<f64>() / tail as f64;
    if !(plateau > 0.0) {
        return None;
    }
    (0..rows.len()).find_map(|i| {
        let lo = (i + 1).saturating_sub(smooth);
        let mean = rows[lo..=i].iter().map(|r| r.metric).sum::<f64>() / (i + 1 - lo) as f64;
        (mean >= fraction * plateau).then_some(rows[i].steps)
    })
}

/// Learners of a family of tasks sharing one state space, as used by every
/// method.
pub(crate) enum TaskLearners {
    Z(Vec<ZLearner>),
    IntraZ(IntraZLearner),
    Q(Vec<QLearner>),
    IntraQ(IntraQLearner),
}

impl TaskLearners {
    /// `policies` are the exact optimal controls, used only by the Q-learning embedding.
    pub(crate) fn new(method: Method, models: &[Lmdp], policies: &[Policy], epsilon: f64) -> Result<Self> {
        let tasks = || models.iter().cloned().map(TaskModel::new).collect::<Result<Vec<_>>>();
        let mdps = || {
            models
                .iter()
                .zip(policies)
                .map(|(m, p)| embed_traditional_mdp(m, p))
                .collect::<Result<Vec<_>>>()
        };
        Ok(match method {
            Method::Z => TaskLearners::Z(tasks()?.into_iter().map(|t| ZLearner::new(t, Sampling::Passive)).collect()),
            Method::ZIs => {
                TaskLearners::Z(tasks()?.into_iter().map(|t| ZLearner::new(t, Sampling::Estimated)).collect())
            }
            Method::ZIsIl => TaskLearners::IntraZ(IntraZLearner::new(tasks()?)),
            Method::QG => TaskLearners::Q(mdps()?.into_iter().map(|m| QLearner::new(m, epsilon)).collect()),
            Method::QGIl => TaskLearners::IntraQ(IntraQLearner::new(mdps()?, epsilon)?),
        })
    }

    /// Behaviour agent for task `j`.
    pub(crate) fn agent(&mut self, j: usize) -> &mut dyn Agent {
        match self {
            TaskLearners::Z(v) => &mut v[j],
            TaskLearners::IntraZ(l) => {
                l.set_active(j);
                l
            }
            TaskLearners::Q(v) => &mut v[j],
            TaskLearners::IntraQ(l) => {
                l.set_active(j);
                l
            }
        }
    }

    pub(crate) fn step(&mut self, j: usize, s: StateId, alpha: f64, rng: &mut Rng) -> Result<Transition> {
        self.agent(j).step(s, alpha, rng)
    }

    /// Current value estimates of task `j`.
    pub(crate) fn values(&self, j: usize, lambda: f64) -> Vec<f64> {
        match self {
            TaskLearners::Z(v) => v[j].table.values(lambda),
            TaskLearners::IntraZ(l) => l.tables[j].values(lambda),
            TaskLearners::Q(v) => v[j].table.values(),
            TaskLearners::IntraQ(l) => l.tables[j].values(),
        }
    }

    /// Current value estimate of task `j` at `s`.
    pub(crate) fn value(&self, j: usize, s: StateId, lambda: f64) -> f64 {
        match self {
            TaskLearners::Z(v) => lambda * v[j].table.get(s).ln(),
            TaskLearners::IntraZ(l) => lambda * l.tables[j].get(s).ln(),
            TaskLearners::Q(v) => v[j].table.state_value(s),
            TaskLearners::IntraQ(l) => l.tables[j].state_value(s),
        }
    }

    pub(crate) fn clip_events(&self) -> u64 {
        match self {
            TaskLearners::Z(v) => v.iter().map(|l| l.clip_events()).sum(),
            TaskLearners::IntraZ(l) => l.clip_events(),
            TaskLearners::Q(_) => 0,
            TaskLearners::IntraQ(l) => l.clip_events(),
        }
    }
}

/// Wall clock relative to the start of a run.
pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Runs `config` for one seed. The curve depends only on `(config, seed)`.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let layout = config.resolve_layout()?;
    let (curve, solver, goal_certificate) = match (&layout, config.domain) {
        (Layout::Taxi(l), Domain::TaxiNavigate) => taxi::navigate(config, l, seed)?,
        (Layout::Taxi(l), Domain::TaxiRoot) => taxi::root(config, l, seed)?,
        (Layout::Agv(l), Domain::AgvThroughput) => agv::throughput_run(config, l, seed)?,
        _ => unreachable!("layout resolved for its domain"),
    };
    Ok(RunOutput {
        curve,
        meta: RunMeta {
            version: VERSION.into(),
            config: config.clone(),
            seed,
            layout_hash: layout.hash(),
            c: config.c,
            epsilon: config.method.is_q().then(|| config.epsilon()),
            solver,
            goal_certificate,
        },
    })
}

/// Runs every seed of `config` in parallel; writes results under `out` if given.
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let runs: Vec<RunOutput> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<_>>()?;
    if let Some(dir) = out {
        for r in &runs {
            write_run(dir, r)?;
        }
    }
    Ok(runs)
}

pub fn file_stem(method: Method, seed: u64) -> String {
    format!("{}_seed{seed}", method.name())
}

/// Writes curve, diagnostics and metadata of one run into `dir`. If a run
/// with identical metadata is already there, its curve must match byte for
/// byte.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stem = file_stem(run.curve.method, run.meta.seed);
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let csv_path = dir.join(format!("{stem}.csv"));
    let csv = run.curve.to_csv();
    if meta_path.exists() && csv_path.exists() {
        let old: RunMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
        if old == run.meta && fs::read(&csv_path)? != csv.as_bytes() {
            return Err(Error::NonReproducible(format!(
                "{} differs from an earlier run with identical metadata",
                csv_path.display()
            )));
        }
    }
    fs::write(&csv_path, csv)?;
    fs::write(dir.join(format!("{stem}.diag.csv")), run.curve.diagnostics_csv())?;
    fs::write(&meta_path, serde_json::to_string_pretty(&run.meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn l1_cases() {
        let opt = [-1.0, -2.0, 0.0];
        let term = [false, false, true];
        assert_eq!(l1_error(&opt, &opt, &term).unwrap(), 0.0);
        assert_eq!(l1_error(&[-0.5, -2.25, 7.0], &opt, &term).unwrap(), 0.75);
        assert_eq!(l1_error(&[0.0], &opt, &term).unwrap_err(), Error::IndexMismatch(1, 3));
    }

    #[test]
    fn l1_fresh_table_on_chain() {
        let m = Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.5), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)])
            .unwrap();
        let z = crate::solver::direct_solve(&m).unwrap();
        let v = crate::solver::value_of(&z, 1.0).unwrap();
        let fresh = crate::learning::ZTable::new(&m).values(1.0);
        assert_abs_diff_eq!(l1_error(&fresh, &v, &[false, true]).unwrap(), 1.489880, epsilon = 1e-6);
    }

    #[test]
    fn throughput_cases() {
        assert_eq!(throughput(&[], 5000, 1000).unwrap(), vec![0.0; 5]);
        let every_100: Vec<usize> = (0..50).map(|k| 99 + 100 * k).collect();
        for x in throughput(&every_100, 5000, 1000).unwrap() {
            assert_abs_diff_eq!(x, 0.01, epsilon = 1e-15);
        }
        assert!(throughput(&[1], 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let curve = LearningCurve {
            method: Method::QGIl,
            seed: 7,
            rows: vec![
                CurveRow { trial: 0, metric: 0.1 + 0.2, steps: 12, wall_ms: 1.0, clips: 0 },
                CurveRow { trial: 1, metric: 1e-300, steps: 30, wall_ms: 2.0, clips: 3 },
            ],
        };
        let text = curve.to_csv();
        assert!(text.starts_with("trial,metric,steps,seed,method\n0,0.30000000000000004,12,7,Q-G-IL\n"));
        let back = LearningCurve::from_csv(&text).unwrap();
        assert_eq!(back.rows[1].metric, 1e-300);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn config_rules() {
        let mut cfg = ExperimentConfig { method: Method::Z, epsilon: Some(0.1), ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.method = Method::QG;
        cfg.validate().unwrap();
        cfg.domain = Domain::TaxiRoot;
        cfg.method = Method::QGIl;
        assert!(cfg.validate().is_err());
        let json = ExperimentConfig::default().to_json();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), ExperimentConfig::default());
        assert!("z-is-il".parse::<Method>().is_ok());
    }

    #[test]
    fn plateau_crossing() {
        let rows: Vec<CurveRow> = [0.0, 0.5, 0.95, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &m)| CurveRow { trial: i, metric: m, steps: 10 * (i + 1), wall_ms: 0.0, clips: 0 })
            .collect();
        assert_eq!(steps_to_plateau_fraction(&rows, 0.9, 1), Some(30));
        assert_eq!(steps_to_plateau_fraction(&rows, 0.9, 2), Some(40));
    }

    #[test]
    fn layout_hash_is_content_based() {
        let a = Layout::resolve(Domain::TaxiRoot, "open5").unwrap();
        let b = Layout::Taxi(TaxiLayout::open(5));
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Layout::resolve(Domain::TaxiRoot, "classic").unwrap().hash());
        assert_eq!(a.hash().len(), 64);
    }
}
