//! Multi-terminal tasks: split into single-goal components, recombine their
//! solutions, and compute where the composite policy exits.

use crate::error::{Error, Result};
use crate::lmdp::{Lmdp, Policy, StateId};
use crate::solver::{log_sum_exp, solve_absorbing_linear};

/// Absorption rows must sum to one within this tolerance.
pub const ABSORPTION_TOL: f64 = 1e-9;

/// Default pseudo-reward on the non-goal terminals of a component task.
pub fn default_component_penalty(lambda: f64) -> f64 {
    -25.0 * lambda
}

/// One model per terminal `t_k`: final reward 0 at `t_k` and `c` at every
/// other terminal. Dynamics are shared with `model`.
pub fn split_model(model: &Lmdp, c: f64) -> Result<Vec<Lmdp>> {
    if !(c < 0.0) {
        return Err(Error::InvalidParameter(format!("component penalty must be negative, got {c}")));
    }
    let terminals: Vec<StateId> = model.terminals().map(|(t, _)| t).collect();
    if terminals.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two terminals to split, found {}",
            terminals.len()
        )));
    }
    terminals
        .iter()
        .map(|&goal| {
            let g = model
                .final_rewards()
                .iter()
                .enumerate()
                .map(|(s, f)| f.map(|_| if s == goal { 0.0 } else { c }))
                .collect();
            model.with_final_rewards(g)
        })
        .collect()
}

/// Final reward at every terminal of the single model whose solution equals
/// the composite of the `n_terminals` components built with penalty `c`.
pub fn composite_boundary(n_terminals: usize, c: f64, lambda: f64) -> f64 {
    let k = n_terminals as f64;
    lambda * ((1.0 + (k - 1.0) * (c / lambda).exp()) / k).ln()
}

/// Composite desirability (log domain) and policy:
/// `Z = mean_k Z_k`, `a(.|s) = sum_k w_k(s) a_k(.|s)` with `w_k = Z_k / sum_l Z_l`.
/// All component policies must share one sparsity pattern.
pub fn compose(components: &[(Vec<f64>, Policy)]) -> Result<(Vec<f64>, Policy)> {
    let Some((first_z, first_p)) = components.first() else {
        return Err(Error::InvalidParameter("no components to compose".into()));
    };
    let n = first_z.len();
    let m = first_p.control();
    for (z, p) in components {
        if z.len() != n {
            return Err(Error::IndexMismatch(z.len(), n));
        }
        if p.control().n_rows() != m.n_rows() || p.control().cols() != m.cols() {
            return Err(Error::InvalidParameter("component policies differ in support".into()));
        }
    }
    let k = components.len() as f64;
    let mut log_z = Vec::with_capacity(n);
    let mut vals = vec![0.0; m.nnz()];
    for s in 0..n {
        let lse = log_sum_exp(components.iter().map(|(z, _)| z[s]));
        log_z.push(lse - k.ln());
        for (z, p) in components {
            let w = (z[s] - lse).exp();
            if w == 0.0 {
                continue;
            }
            for idx in m.row_range(s) {
                vals[idx] += w * p.control().values()[idx];
            }
        }
    }
    Ok((log_z, Policy::new(m.with_values(vals))))
}

/// `V_{j,k}(s) = lambda log(Z_{j,k}(s) / Z_j(s))`.
pub fn subtask_value(z_component: f64, z_composite: f64, lambda: f64) -> Result<f64> {
    for (s, v) in [(0, z_component), (1, z_composite)] {
        if !(v > 0.0) {
            return Err(Error::NonPositive { state: s, value: v });
        }
    }
    Ok(lambda * (z_component / z_composite).ln())
}

/// Probability of exiting through each terminal (in ascending state order)
/// when following `policy` from every state. Row `s` is indexed by terminal.
pub fn terminal_distribution(model: &Lmdp, policy: &Policy) -> Result<(Vec<StateId>, Vec<Vec<f64>>)> {
    let n = model.n_states();
    let terminals: Vec<StateId> = model.terminals().map(|(t, _)| t).collect();
    let fixed: Vec<bool> = (0..n).map(|s| model.is_terminal(s)).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|s| {
            if fixed[s] {
                Vec::new()
            } else {
                policy.row(s).filter(|&(_, a)| a > 0.0).collect()
            }
        })
        .collect();
    let mut out = vec![vec![0.0; terminals.len()]; n];
    if terminals.len() == 1 {
        for row in &mut out {
            row[0] = 1.0;
        }
    } else {
        for (k, &t) in terminals.iter().enumerate() {
            let mut rhs = vec![0.0; n];
            rhs[t] = 1.0;
            let col = solve_absorbing_linear(&rows, &rhs, &fixed)?;
            for s in 0..n {
                out[s][k] = col[s];
            }
        }
    }
    for (s, row) in out.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ABSORPTION_TOL {
            return Err(Error::AbsorptionUncertain { state: s, sum });
        }
    }
    Ok((terminals, out))
}
