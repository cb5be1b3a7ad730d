use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{run_seed, write_run, Domain, ExperimentConfig, LearningCurve, Method, RunMeta, RunOutput};

/// Grid over methods, schedule constants and exploration rates. Z methods
/// ignore `epsilons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub methods: Vec<Method>,
    pub cs: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &c in &self.cs {
                let eps: Vec<Option<f64>> = if method.is_q() && !self.epsilons.is_empty() {
                    self.epsilons.iter().map(|&e| Some(e)).collect()
                } else {
                    vec![None]
                };
                for epsilon in eps {
                    out.push(ExperimentConfig { method, c, epsilon, ..self.base.clone() });
                }
            }
        }
        out
    }
}

/// Directory name of one grid cell.
pub fn cell_name(cfg: &ExperimentConfig) -> String {
    match cfg.epsilon {
        Some(e) => format!("{}_c{}_eps{}", cfg.method, cfg.c, e),
        None => format!("{}_c{}", cfg.method, cfg.c),
    }
}

/// Runs every cell and seed in parallel. With `out`, each cell writes into
/// its own subdirectory.
pub fn sweep(grid: &SweepGrid, out: Option<&Path>) -> Result<Vec<RunOutput>> {
    let cells = grid.cells();
    for c in &cells {
        c.validate()?;
    }
    let jobs: Vec<(&ExperimentConfig, u64)> =
        cells.iter().flat_map(|c| c.seeds.iter().map(move |&s| (c, s))).collect();
    jobs.par_iter()
        .map(|&(cfg, seed)| {
            let run = run_seed(cfg, seed)?;
            if let Some(dir) = out {
                write_run(&dir.join(cell_name(cfg)), &run)?;
            }
            Ok(run)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggRow {
    pub trial: usize,
    pub steps: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Median and interquartile range over seeds of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub domain: Domain,
    pub method: Method,
    pub c: f64,
    pub epsilon: Option<f64>,
    pub seeds: Vec<u64>,
    pub rows: Vec<AggRow>,
}

impl Aggregate {
    pub fn final_median(&self) -> Option<f64> {
        self.rows.last().map(|r| r.median)
    }

    pub fn name(&self) -> String {
        match self.epsilon {
            Some(e) => format!("{}_c{}_eps{}", self.method, self.c, e),
            None => format!("{}_c{}", self.method, self.c),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn same<'a, T: PartialEq + std::fmt::Debug + 'a>(what: &str, mut it: impl Iterator<Item = &'a T>) -> Result<()> {
    let first = it.next();
    if let Some(other) = it.find(|x| Some(*x) != first) {
        return Err(Error::InvalidParameter(format!("refusing to aggregate mixed {what}: {first:?} and {other:?}")));
    }
    Ok(())
}

/// Groups runs by `(method, c, epsilon)` and aggregates each group over
/// seeds, row by row up to the shortest curve. All runs must share code
/// version, domain and layout.
pub fn aggregate(runs: &[RunOutput]) -> Result<Vec<Aggregate>> {
    same("versions", runs.iter().map(|r| &r.meta.version))?;
    same("domains", runs.iter().map(|r| &r.meta.config.domain))?;
    same("layouts", runs.iter().map(|r| &r.meta.layout_hash))?;
    type Key = (Method, u64, Option<u64>);
    let mut groups: BTreeMap<Key, Vec<&RunOutput>> = BTreeMap::new();
    for r in runs {
        let key = (r.curve.method, r.meta.c.to_bits(), r.meta.epsilon.map(f64::to_bits));
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, c, epsilon), mut group) in groups {
        group.sort_by_key(|r| r.meta.seed);
        let n_rows = group.iter().map(|r| r.curve.rows.len()).min().unwrap_or(0);
        let rows = (0..n_rows)
            .map(|i| {
                let mut m: Vec<f64> = group.iter().map(|r| r.curve.rows[i].metric).collect();
                let mut s: Vec<f64> = group.iter().map(|r| r.curve.rows[i].steps as f64).collect();
                m.sort_by(f64::total_cmp);
                s.sort_by(f64::total_cmp);
                AggRow {
                    trial: group[0].curve.rows[i].trial,
                    steps: quantile(&s, 0.5),
                    median: quantile(&m, 0.5),
                    q1: quantile(&m, 0.25),
                    q3: quantile(&m, 0.75),
                }
            })
            .collect();
        out.push(Aggregate {
            domain: group[0].meta.config.domain,
            method,
            c: f64::from_bits(c),
            epsilon: epsilon.map(f64::from_bits),
            seeds: group.iter().map(|r| r.meta.seed).collect(),
            rows,
        });
    }
    Ok(out)
}

/// Index of the best cell per method by final median: lowest error, or
/// highest throughput.
pub fn select_best(aggs: &[Aggregate]) -> BTreeMap<Method, usize> {
    let mut best: BTreeMap<Method, usize> = BTreeMap::new();
    for (i, a) in aggs.iter().enumerate() {
        let Some(v) = a.final_median() else { continue };
        let better = |j: usize| {
            let w = aggs[j].final_median().unwrap();
            if a.domain.minimizes() {
                v < w
            } else {
                v > w
            }
        };
        match best.get(&a.method) {
            Some(&j) if !better(j) => {}
            _ => {
                best.insert(a.method, i);
            }
        }
    }
    best
}

fn find_meta(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_meta(&p, out)?;
        } else if p.to_string_lossy().ends_with(".meta.json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Loads every run found below `dir`.
pub fn read_runs(dir: &Path) -> Result<Vec<RunOutput>> {
    let mut metas = Vec::new();
    find_meta(dir, &mut metas)?;
    metas
        .into_iter()
        .map(|path| {
            let meta: RunMeta = serde_json::from_str(&fs::read_to_string(&path)?)?;
            let name = path.to_string_lossy();
            let stem = name.trim_end_matches(".meta.json");
            let curve = LearningCurve::from_csv(&fs::read_to_string(format!("{stem}.csv"))?)?;
            if curve.seed != meta.seed {
                return Err(Error::Format(format!("{stem}: seed differs between curve and metadata")));
            }
            Ok(RunOutput { curve, meta })
        })
        .collect()
}

/// Writes `summary.csv` (one line per cell, best cells flagged) and one
/// plot-ready file per cell under `plot/`.
pub fn write_report(out: &Path, aggs: &[Aggregate]) -> Result<()> {
    let best = select_best(aggs);
    fs::create_dir_all(out.join("plot"))?;
    let mut summary = String::from("method,c,epsilon,seeds,final_median,final_q1,final_q3,selected\n");
    for (i, a) in aggs.iter().enumerate() {
        let last = a.rows.last();
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.method,
            a.c,
            a.epsilon.map(|e| e.to_string()).unwrap_or_default(),
            a.seeds.len(),
            last.map_or(f64::NAN, |r| r.median),
            last.map_or(f64::NAN, |r| r.q1),
            last.map_or(f64::NAN, |r| r.q3),
            best.get(&a.method) == Some(&i),
        ));
        let mut plot = String::from("trial,steps,median,q1,q3\n");
        for r in &a.rows {
            plot.push_str(&format!("{},{},{},{},{}\n", r.trial, r.steps, r.median, r.q1, r.q3));
        }
        fs::write(out.join("plot").join(format!("{}.csv", a.name())), plot)?;
    }
    fs::write(out.join("summary.csv"), summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{CurveRow, VERSION};

    fn fake(method: Method, c: f64, seed: u64, metric: f64) -> RunOutput {
        let config = ExperimentConfig { method, c, ..Default::default() };
        RunOutput {
            curve: LearningCurve {
                method,
                seed,
                rows: vec![CurveRow { trial: 0, metric, steps: 10, wall_ms: 0.0, clips: 0 }],
            },
            meta: RunMeta {
                version: VERSION.into(),
                config,
                seed,
                layout_hash: "h".into(),
                c,
                epsilon: None,
                solver: vec![],
                goal_certificate: None,
            },
        }
    }

    #[test]
    fn quantiles() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&d, 0.5), 2.5);
        assert_eq!(quantile(&d, 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }

    #[test]
    fn selection_picks_min_final_median() {
        let mut runs = Vec::new();
        for (c, base) in [(10.0, 3.0), (100.0, 1.0), (1000.0, 2.0)] {
            for seed in 0..3 {
                runs.push(fake(Method::ZIs, c, seed, base + seed as f64 * 0.1));
            }
        }
        let aggs = aggregate(&runs).unwrap();
        assert_eq!(aggs.len(), 3);
        let best = select_best(&aggs);
        assert_eq!(aggs[best[&Method::ZIs]].c, 100.0);
        assert!((aggs[best[&Method::ZIs]].final_median().unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn mixed_versions_refused() {
        let a = fake(Method::Z, 1.0, 0, 1.0);
        let mut b = fake(Method::Z, 1.0, 1, 1.0);
        b.meta.version = "0.0.0-other".into();
        assert!(aggregate(&[a, b]).is_err());
    }

    #[test]
    fn grid_cells() {
        let grid = SweepGrid {
            base: ExperimentConfig::default(),
            methods: vec![Method::ZIs, Method::QG],
            cs: vec![10.0, 100.0],
            epsilons: vec![0.05, 0.2],
        };
        let cells = grid.cells();
        assert_eq!(cells.len(), 2 + 4);
        assert!(cells.iter().all(|c| c.validate().is_ok()));
        assert_eq!(cell_name(&cells[3]), "Q-G_c10_eps0.2");
    }
}
