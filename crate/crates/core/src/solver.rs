//! Exact solution of first-exit LMDPs.
//!
//! Terminal desirabilities are clamped to `exp(g(t)/lambda)` (a Dirichlet
//! boundary); the non-terminal block is then the unique fixed point of
//! `z = Gamma z`. [`power_iterate`] finds it iteratively in the linear or the
//! log domain, [`direct_solve`] by dense elimination. [`value_iteration`]
//! solves a traditional MDP and serves as the independent oracle for the
//! embedding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, Policy, StateId, TraditionalMdp};
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DIRECT_SOLVE_LIMIT: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Linear,
    Log,
}

/// Desirability `Z = exp(V/lambda)`, stored directly or as `log Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Desirability {
    Linear(Vec<f64>),
    Log(Vec<f64>),
}

impl Desirability {
    pub fn len(&self) -> usize {
        match self {
            Desirability::Linear(z) | Desirability::Log(z) => z.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn representation(&self) -> Representation {
        match self {
            Desirability::Linear(_) => Representation::Linear,
            Desirability::Log(_) => Representation::Log,
        }
    }

    /// `log Z`; `-inf` where a linear entry is zero.
    pub fn log_z(&self) -> Vec<f64> {
        match self {
            Desirability::Linear(z) => z.iter().map(|x| x.ln()).collect(),
            Desirability::Log(l) => l.clone(),
        }
    }

    pub fn linear(&self) -> Vec<f64> {
        match self {
            Desirability::Linear(z) => z.clone(),
            Desirability::Log(l) => l.iter().map(|x| x.exp()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Max-abs fixed-point defect (in `log Z` units for the log domain).
    pub residual: f64,
    pub converged: bool,
    pub representation: Representation,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// `None` means `10 * n_states`.
    pub max_iter: Option<usize>,
    pub representation: Representation,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            max_iter: None,
            representation: Representation::Linear,
        }
    }
}

impl SolveOptions {
    pub fn log() -> Self {
        SolveOptions {
            representation: Representation::Log,
            ..Default::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }
}

fn check_reachable(model: &Lmdp) -> Result<()> {
    match model.dead_states().first() {
        Some(&s) => Err(Error::NoTerminalReachable(s)),
        None => Ok(()),
    }
}

/// Starting point `Z = 1` (`V = 0`) off the boundary.
fn initial(model: &Lmdp, repr: Representation) -> Desirability {
    let log: Vec<f64> = (0..model.n_states())
        .map(|s| model.boundary_log_z(s).unwrap_or(0.0))
        .collect();
    match repr {
        Representation::Log => Desirability::Log(log),
        Representation::Linear => Desirability::Linear(log.iter().map(|l| l.exp()).collect()),
    }
}

pub fn power_iterate(model: &Lmdp, opts: &SolveOptions) -> Result<(Desirability, SolveReport)> {
    power_iterate_from(model, initial(model, opts.representation), opts)
}

/// Power iteration from a given start. Terminal entries of `start` are
/// overwritten with the boundary values.
///
/// Linear mode fails with [`Error::Underflow`] when a non-terminal entry drops
/// below the smallest normal float, or below `tol` after convergence, where
/// the absolute residual test can no longer resolve it.
pub fn power_iterate_from(
    model: &Lmdp,
    start: Desirability,
    opts: &SolveOptions,
) -> Result<(Desirability, SolveReport)> {
    model.ensure_valid()?;
    check_reachable(model)?;
    if start.len() != model.n_states() {
        return Err(Error::IndexMismatch(start.len(), model.n_states()));
    }
    let gamma = model.gamma_unchecked();
    let n = model.n_states();
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let nonterminal: Vec<StateId> = (0..n).filter(|&s| !model.is_terminal(s)).collect();
    let repr = opts.representation;

    let mut z = match (start, repr) {
        (Desirability::Linear(z), Representation::Linear) => z,
        (Desirability::Log(l), Representation::Log) => l,
        (d, Representation::Linear) => d.linear(),
        (d, Representation::Log) => d.log_z(),
    };
    for (t, _) in model.terminals() {
        let b = model.boundary_log_z(t).unwrap();
        z[t] = match repr {
            Representation::Linear => b.exp(),
            Representation::Log => b,
        };
    }

    let sweep = |z: &[f64], s: StateId| -> f64 {
        match repr {
            Representation::Linear => gamma.matrix().row(s).map(|(c, g)| g * z[c]).sum(),
            Representation::Log => {
                let range = gamma.matrix().row_range(s);
                let cols = gamma.matrix().row_cols(s);
                log_sum_exp(cols.iter().zip(&gamma.log_values()[range]).map(|(&c, &lg)| lg + z[c]))
            }
        }
    };

    let mut next = z.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut diff = 0.0f64;
        for &s in &nonterminal {
            let v = sweep(&z, s);
            diff = diff.max((v - z[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut z, &mut next);
        if repr == Representation::Linear {
            if let Some(&s) = nonterminal.iter().find(|&&s| !(z[s] >= f64::MIN_POSITIVE)) {
                return Err(Error::Underflow { state: s, value: z[s] });
            }
        }
        if diff.is_nan() {
            return Err(Error::NotConverged {
                iterations: it,
                residual: f64::NAN,
            });
        }
        if diff <= opts.tol {
            residual = nonterminal
                .iter()
                .map(|&s| (sweep(&z, s) - z[s]).abs())
                .fold(0.0, f64::max);
            if residual <= opts.tol {
                if repr == Representation::Linear {
                    if let Some(&s) = nonterminal.iter().find(|&&s| z[s] < opts.tol) {
                        return Err(Error::Underflow { state: s, value: z[s] });
                    }
                }
                let report = SolveReport {
                    iterations: it,
                    residual,
                    converged: true,
                    representation: repr,
                    tolerance: opts.tol,
                };
                let d = match repr {
                    Representation::Linear => Desirability::Linear(z),
                    Representation::Log => Desirability::Log(z),
                };
                return Ok((d, report));
            }
        } else {
            residual = diff;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Linear-domain power iteration, retried in the log domain on underflow.
pub fn solve_auto(model: &Lmdp, opts: &SolveOptions) -> Result<(Desirability, SolveReport)> {
    match power_iterate(model, opts) {
        Err(Error::Underflow { .. }) if opts.representation == Representation::Linear => {
            power_iterate(
                model,
                &SolveOptions {
                    representation: Representation::Log,
                    ..*opts
                },
            )
        }
        other => other,
    }
}

/// Dense LU where it fits, polished (or, for large or underflowing models,
/// computed outright) by log-domain power iteration to `tol`.
pub fn solve_exact(model: &Lmdp, tol: f64) -> Result<(Desirability, SolveReport)> {
    let n = model.n_states();
    let opts = SolveOptions::log()
        .with_tol(tol)
        .with_max_iter((10 * n).max(100_000));
    match direct_solve(model) {
        Ok(z) => power_iterate_from(model, Desirability::Log(z.log_z()), &opts),
        Err(Error::TooLarge { .. } | Error::Singular) => power_iterate(model, &opts),
        Err(e) => Err(e),
    }
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Solves `(I - Gamma_NN) z_N = Gamma_NT z_T` by dense LU.
pub fn direct_solve(model: &Lmdp) -> Result<Desirability> {
    model.ensure_valid()?;
    let n = model.n_states();
    if n > DIRECT_SOLVE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DIRECT_SOLVE_LIMIT,
        });
    }
    if !model.dead_states().is_empty() {
        return Err(Error::Singular);
    }
    let gamma = model.gamma_unchecked();
    let mut z: Vec<f64> = (0..n)
        .map(|s| model.boundary_log_z(s).map_or(0.0, f64::exp))
        .collect();
    let index: Vec<Option<usize>> = {
        let mut k = 0;
        (0..n)
            .map(|s| {
                if model.is_terminal(s) {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect()
    };
    let m = index.iter().flatten().count();
    if m == 0 {
        return Ok(Desirability::Linear(z));
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for s in 0..n {
        let Some(i) = index[s] else { continue };
        for (c, g) in gamma.matrix().row(s) {
            match index[c] {
                Some(j) => a[(i, j)] -= g,
                None => b[i] += g * z[c],
            }
        }
    }
    let x = a.lu().solve(&b).ok_or(Error::Singular)?;
    for s in 0..n {
        if let Some(i) = index[s] {
            if !(x[i] > 0.0) || !x[i].is_finite() {
                return Err(Error::Singular);
            }
            z[s] = x[i];
        }
    }
    Ok(Desirability::Linear(z))
}

/// `a*(s'|s) = Gamma(s, s') z(s') / sum_s'' Gamma(s, s'') z(s'')`, computed
/// with a max-shift in the log domain. Terminal rows are `a*(t|t) = 1`.
pub fn optimal_policy(model: &Lmdp, z: &Desirability) -> Result<Policy> {
    if z.len() != model.n_states() {
        return Err(Error::IndexMismatch(z.len(), model.n_states()));
    }
    let gamma = model.gamma_unchecked();
    let log_z = z.log_z();
    let mut vals = Vec::with_capacity(model.passive().nnz());
    for s in 0..model.n_states() {
        let range = model.passive().row_range(s);
        let cols = model.passive().row_cols(s);
        if model.is_terminal(s) {
            vals.extend(cols.iter().map(|&c| if c == s { 1.0 } else { 0.0 }));
            continue;
        }
        let w: Vec<f64> = cols
            .iter()
            .zip(&gamma.log_values()[range])
            .map(|(&c, &lg)| lg + log_z[c])
            .collect();
        let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::ZeroNormalizer(s));
        }
        let e: Vec<f64> = w.iter().map(|x| (x - m).exp()).collect();
        let total: f64 = e.iter().sum();
        vals.extend(e.iter().map(|x| x / total));
    }
    Ok(Policy::new(model.passive().with_values(vals)))
}

/// `V = lambda log Z`.
pub fn value_of(z: &Desirability, lambda: f64) -> Result<Vec<f64>> {
    match z {
        Desirability::Linear(v) => v
            .iter()
            .enumerate()
            .map(|(s, &x)| {
                if x > 0.0 {
                    Ok(lambda * x.ln())
                } else {
                    Err(Error::NonPositive { state: s, value: x })
                }
            })
            .collect(),
        Desirability::Log(l) => Ok(l.iter().map(|x| lambda * x).collect()),
    }
}

/// `Z = exp(V/lambda)`.
pub fn desirability_of(v: &[f64], lambda: f64) -> Desirability {
    Desirability::Linear(v.iter().map(|x| (x / lambda).exp()).collect())
}

/// In-place (Gauss-Seidel) value iteration for the undiscounted first-exit MDP,
/// started from `V = 0` off the boundary.
pub fn value_iteration(mdp: &TraditionalMdp, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = mdp.n_states();
    let mut v: Vec<f64> = (0..n).map(|s| mdp.final_reward(s).unwrap_or(0.0)).collect();
    for s in 0..n {
        if !mdp.is_terminal(s) && mdp.actions(s).is_empty() {
            return Err(Error::NoTerminalReachable(s));
        }
    }
    let mut diff = f64::INFINITY;
    for it in 1..=max_iter {
        diff = 0.0;
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            let best = mdp
                .actions(s)
                .iter()
                .map(|a| a.reward + a.next.iter().map(|&(c, p)| p * v[c]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            diff = diff.max((best - v[s]).abs());
            v[s] = best;
        }
        if !diff.is_finite() {
            break;
        }
        if diff <= tol {
            return Ok((
                v,
                SolveReport {
                    iterations: it,
                    residual: diff,
                    converged: true,
                    representation: Representation::Linear,
                    tolerance: tol,
                },
            ));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: diff,
    })
}

/// Values of following `policy` in `model`, including the KL control cost:
/// `V(s) = sum_s' a(s'|s) [R(s,s') - lambda log(a(s'|s)/P(s'|s)) + V(s')]`,
/// with `V(t) = boundary(t)` at terminals.
pub fn evaluate_policy(model: &Lmdp, policy: &Policy, boundary: &[f64]) -> Result<Vec<f64>> {
    let n = model.n_states();
    let lambda = model.lambda();
    let mut rows = Vec::with_capacity(n);
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        if model.is_terminal(s) {
            rows.push(Vec::new());
            rhs[s] = boundary[s];
            continue;
        }
        let mut row = Vec::new();
        for (i, idx) in model.passive().row_range(s).enumerate() {
            let c = model.passive().row_cols(s)[i];
            let p = model.passive().values()[idx];
            let a = policy.prob(s, c);
            if a > 0.0 {
                rhs[s] += a * (model.edge_reward(s, idx) - lambda * (a / p).ln());
                row.push((c, a));
            }
        }
        rows.push(row);
    }
    solve_absorbing_linear(&rows, &rhs, &(0..n).map(|s| model.is_terminal(s)).collect::<Vec<_>>())
}

/// Solves `x_s = rhs_s + sum_c w(s,c) x_c` over non-fixed states, with
/// `x_s = rhs_s` for fixed states. Dense LU for small systems, Gauss-Seidel
/// sweeps otherwise.
pub(crate) fn solve_absorbing_linear(
    rows: &[Vec<(usize, f64)>],
    rhs: &[f64],
    fixed: &[bool],
) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut x: Vec<f64> = rhs.to_vec();
    let index: Vec<Option<usize>> = {
        let mut k = 0;
        fixed
            .iter()
            .map(|&f| {
                if f {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect()
    };
    let m = index.iter().flatten().count();
    if m == 0 {
        return Ok(x);
    }
    if m <= DIRECT_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for s in 0..n {
            let Some(i) = index[s] else { continue };
            b[i] = rhs[s];
            for &(c, w) in &rows[s] {
                match index[c] {
                    Some(j) => a[(i, j)] -= w,
                    None => b[i] += w * rhs[c],
                }
            }
        }
        let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
        for s in 0..n {
            if let Some(i) = index[s] {
                x[s] = sol[i];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        return Ok(x);
    }
    for _ in 0..1_000_000 {
        let mut diff = 0.0f64;
        for s in 0..n {
            if fixed[s] {
                continue;
            }
            let v = rhs[s] + rows[s].iter().map(|&(c, w)| w * x[c]).sum::<f64>();
            diff = diff.max((v - x[s]).abs());
            x[s] = v;
        }
        if diff <= 1e-13 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Ok(x);
        }
    }
    Err(Error::Singular)
}

/// Dense view of a policy row aligned with the passive support of `s`.
pub fn policy_row(policy: &Policy, model: &Lmdp, s: StateId) -> Vec<f64> {
    model
        .passive()
        .row_cols(s)
        .iter()
        .map(|&c| policy.prob(s, c))
        .collect()
}

/// Converts a policy matrix into per-row transition lists.
pub fn policy_rows(policy: &Policy) -> Vec<Vec<(StateId, f64)>> {
    let m: &CsrMatrix = policy.control();
    (0..m.n_rows()).map(|s| m.row(s).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmdp::{embed_traditional_mdp, MdpAction};
    use approx::assert_abs_diff_eq;

    fn one_step() -> Lmdp {
        Lmdp::with_state_rewards(2, 1.0, &[(0, 1, 1.0)], vec![-1.0, 0.0], &[(1, 0.0)]).unwrap()
    }

    fn chain() -> Lmdp {
        Lmdp::with_state_rewards(2, 1.0, &[(0, 0, 0.5), (0, 1, 0.5)], vec![-1.0, 0.0], &[(1, 0.0)])
            .unwrap()
    }

    // Oracle: Z = e^-1 (Z/2 + 1/2)  =>  Z = e^-1 / (2 - e^-1)
    fn chain_z() -> f64 {
        let e = (-1.0f64).exp();
        e / (2.0 - e)
    }

    #[test]
    fn chain_oracle_values() {
        assert_abs_diff_eq!(chain_z(), 0.225399, epsilon = 1e-6);
        assert_abs_diff_eq!(chain_z().ln(), -1.489880, epsilon = 1e-6);
    }

    #[test]
    fn one_step_chain() {
        let (z, rep) = power_iterate(&one_step(), &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(z.linear()[0], (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(value_of(&z, 1.0).unwrap()[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_state_chain_all_routes() {
        let m = chain();
        let (z, rep) = power_iterate(&m, &SolveOptions::default()).unwrap();
        assert!(rep.residual <= 1e-10);
        assert_abs_diff_eq!(z.linear()[0], chain_z(), epsilon = 1e-9);
        let (zl, _) = power_iterate(&m, &SolveOptions::log().with_tol(1e-12)).unwrap();
        assert_abs_diff_eq!(zl.linear()[0], chain_z(), epsilon = 1e-11);
        let zd = direct_solve(&m).unwrap();
        assert_abs_diff_eq!(zd.linear()[0], chain_z(), epsilon = 1e-14);
    }

    #[test]
    fn exact_start_converges_in_one_sweep() {
        let m = chain();
        let exact = direct_solve(&m).unwrap();
        let (_, rep) = power_iterate_from(&m, exact, &SolveOptions::default().with_tol(1e-12)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.residual <= 1e-15);
    }

    #[test]
    fn unreachable_terminal_errors() {
        let m = Lmdp::with_state_rewards(3, 1.0, &[(0, 1, 1.0), (2, 2, 1.0)], vec![-1.0, 0.0, -1.0], &[(1, 0.0)])
            .unwrap();
        assert_eq!(power_iterate(&m, &SolveOptions::default()).unwrap_err(), Error::NoTerminalReachable(2));
        assert_eq!(direct_solve(&m).unwrap_err(), Error::Singular);
    }

    #[test]
    fn all_terminal_model_returns_boundary() {
        let m = Lmdp::with_state_rewards(2, 2.0, &[], vec![0.0, 0.0], &[(0, -2.0), (1, 0.0)]).unwrap();
        let z = direct_solve(&m).unwrap().linear();
        assert_abs_diff_eq!(z[0], (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(z[1], 1.0);
    }

    #[test]
    fn max_iter_exceeded() {
        let m = chain();
        let e = power_iterate(&m, &SolveOptions::default().with_max_iter(2)).unwrap_err();
        assert!(matches!(e, Error::NotConverged { iterations: 2, .. }));
    }

    #[test]
    fn long_corridor_underflows_in_linear_mode() {
        // 400-state corridor at low temperature: Z at the far end is ~exp(-2000).
        let n = 401;
        let mut edges = Vec::new();
        for s in 0..n - 1 {
            edges.push((s, s + 1, 1.0));
        }
        let mut r = vec![-1.0; n];
        r[n - 1] = 0.0;
        let m = Lmdp::with_state_rewards(n, 0.2, &edges, r, &[(n - 1, 0.0)]).unwrap();
        assert!(matches!(
            power_iterate(&m, &SolveOptions::default()),
            Err(Error::Underflow { .. })
        ));
        let (z, _) = power_iterate(&m, &SolveOptions::log()).unwrap();
        assert_abs_diff_eq!(z.log_z()[0], -400.0 / 0.2, epsilon = 1e-9);
        let (z2, rep) = solve_auto(&m, &SolveOptions::default()).unwrap();
        assert_eq!(rep.representation, Representation::Log);
        assert_eq!(z2, z);
    }

    #[test]
    fn policy_on_chain() {
        let m = chain();
        let z = direct_solve(&m).unwrap();
        let a = optimal_policy(&m, &z).unwrap();
        // a*(t|s) = 0.5 * 1 / (0.5 Z + 0.5)
        let oracle = 0.5 / (0.5 * chain_z() + 0.5);
        assert_abs_diff_eq!(a.prob(0, 1), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(a.prob(0, 1), 0.816060, epsilon = 1e-6);
        assert_abs_diff_eq!(a.prob(0, 0), 0.183940, epsilon = 1e-6);
        assert_eq!(a.prob(1, 1), 1.0);
        a.check(&m).unwrap();
    }

    #[test]
    fn symmetric_policy() {
        let m = Lmdp::with_state_rewards(3, 1.0, &[(0, 1, 0.5), (0, 2, 0.5)], vec![-1.0, 0.0, 0.0], &[(1, 0.0), (2, 0.0)])
            .unwrap();
        let a = optimal_policy(&m, &direct_solve(&m).unwrap()).unwrap();
        assert_eq!(a.prob(0, 1), 0.5);
        assert_eq!(a.prob(0, 2), 0.5);
    }

    #[test]
    fn zero_normalizer() {
        let m = chain();
        let z = Desirability::Linear(vec![0.0, 0.0]);
        assert_eq!(optimal_policy(&m, &z).unwrap_err(), Error::ZeroNormalizer(0));
    }

    #[test]
    fn value_desirability_conversions() {
        assert_eq!(value_of(&Desirability::Linear(vec![1.0]), 1.0).unwrap(), vec![0.0]);
        assert_eq!(desirability_of(&[0.0], 1.0), Desirability::Linear(vec![1.0]));
        assert_abs_diff_eq!(
            value_of(&Desirability::Linear(vec![(-1.0f64).exp()]), 1.0).unwrap()[0],
            -1.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            value_of(&Desirability::Linear(vec![0.0]), 1.0),
            Err(Error::NonPositive { state: 0, .. })
        ));
    }

    #[test]
    fn value_iteration_backward_induction() {
        let act = |to: usize| MdpAction {
            next: vec![(to, 1.0)],
            reward: -1.0,
        };
        let mdp = TraditionalMdp::new(vec![vec![act(1)], vec![act(2)], vec![]], vec![None, None, Some(0.0)]).unwrap();
        let (v, _) = value_iteration(&mdp, 1e-12, 100).unwrap();
        assert_eq!(v, vec![-2.0, -1.0, 0.0]);
    }

    #[test]
    fn value_iteration_dominant_action() {
        let mdp = TraditionalMdp::new(
            vec![
                vec![
                    MdpAction { next: vec![(1, 1.0)], reward: -3.0 },
                    MdpAction { next: vec![(1, 1.0)], reward: -1.0 },
                ],
                vec![],
            ],
            vec![None, Some(0.5)],
        )
        .unwrap();
        let (v, _) = value_iteration(&mdp, 1e-12, 100).unwrap();
        assert_eq!(v, vec![-0.5, 0.5]);
    }

    #[test]
    fn embedded_chain_value() {
        let m = chain();
        let z = direct_solve(&m).unwrap();
        let mdp = embed_traditional_mdp(&m, &optimal_policy(&m, &z).unwrap()).unwrap();
        let (v, _) = value_iteration(&mdp, 1e-13, 10_000).unwrap();
        assert_abs_diff_eq!(v[0], -1.489880, epsilon = 1e-6);
        assert_abs_diff_eq!(v[0], chain_z().ln(), epsilon = 1e-9);
    }

    #[test]
    fn policy_evaluation_of_optimal_policy_recovers_values() {
        let m = chain();
        let z = direct_solve(&m).unwrap();
        let a = optimal_policy(&m, &z).unwrap();
        let v = evaluate_policy(&m, &a, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], chain_z().ln(), epsilon = 1e-12);
    }
}
