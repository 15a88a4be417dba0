//! Slow reference implementation of the exact recurrences.
//!
//! Everything here is written out with nested `Vec`s and explicit index loops,
//! straight from the update equations. Nothing is borrowed from the matrix
//! kernel or the fast paths, so agreement between the two is evidence that
//! both are right. Sizes are capped to keep each case cheap.

use crate::error::{Error, Result};
use crate::projection::GateBundle;

pub const MAX_DIM: usize = 8;
pub const MAX_STEPS: usize = 64;
pub const MAX_VARIATES: usize = 8;

/// Row-major log-state, `m[i][j]`.
pub type OracleMatrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCell {
    pub m1: OracleMatrix,
    pub m2: OracleMatrix,
}

fn check_sizes(d_k: usize, d_v: usize, steps: usize, variates: usize) -> Result<()> {
    if d_k > MAX_DIM || d_v > MAX_DIM || steps > MAX_STEPS || variates > MAX_VARIATES {
        return Err(Error::Contract(format!(
            "oracle limited to d <= {MAX_DIM}, T <= {MAX_STEPS}, V <= {MAX_VARIATES}; \
             got d_k = {d_k}, d_v = {d_v}, T = {steps}, V = {variates}"
        )));
    }
    Ok(())
}

fn zeros(d_v: usize, d_k: usize) -> OracleMatrix {
    vec![vec![0.0; d_k]; d_v]
}

/// Residual `Σ_j exp(m[i][j]) k[j] − v[i]` for every row `i`.
fn exp_residual(m: &OracleMatrix, k: &[f64], v: &[f64]) -> Vec<f64> {
    let mut r = Vec::new();
    for i in 0..m.len() {
        let mut s = 0.0;
        for j in 0..k.len() {
            s += m[i][j].exp() * k[j];
        }
        r.push(s - v[i]);
    }
    r
}

/// Exact one-dimensional run from `m0`; returns the state after every step.
pub fn oracle_run_1d(
    m0: &OracleMatrix,
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    alphas: &[f64],
    etas: &[f64],
) -> Result<Vec<OracleMatrix>> {
    let steps = keys.len();
    if vals.len() != steps || alphas.len() != steps || etas.len() != steps {
        return Err(Error::Dimension("oracle inputs differ in length".into()));
    }
    let d_v = m0.len();
    let d_k = m0.first().map_or(0, Vec::len);
    check_sizes(d_k, d_v, steps, 1)?;
    let mut m = m0.clone();
    let mut out = Vec::new();
    for t in 0..steps {
        if keys[t].len() != d_k || vals[t].len() != d_v {
            return Err(Error::Dimension(format!(
                "step {t} has the wrong key or value length"
            )));
        }
        let r = exp_residual(&m, &keys[t], &vals[t]);
        let mut next = zeros(d_v, d_k);
        for i in 0..d_v {
            for j in 0..d_k {
                next[i][j] = alphas[t] * m[i][j] - etas[t] * r[i] * keys[t][j];
            }
        }
        m = next;
        out.push(m.clone());
    }
    Ok(out)
}

/// Exact two-dimensional run from zero states, indexed `[v][t]`.
///
/// Head 2's gradients are taken at the previous time step of the same variate,
/// or at the previous variate's own heads when `per_head_predecessor` is set.
pub fn oracle_run_2d(
    keys: &[Vec<Vec<f64>>],
    vals: &[Vec<Vec<f64>>],
    gates: &[Vec<GateBundle>],
    per_head_predecessor: bool,
) -> Result<Vec<Vec<OracleCell>>> {
    let variates = keys.len();
    if variates == 0 || vals.len() != variates || gates.len() != variates {
        return Err(Error::Dimension(
            "oracle inputs differ in variate count".into(),
        ));
    }
    let steps = keys[0].len();
    if steps == 0 {
        return Err(Error::Dimension("oracle needs at least one step".into()));
    }
    let d_k = keys[0][0].len();
    let d_v = vals[0][0].len();
    check_sizes(d_k, d_v, steps, variates)?;
    let empty = OracleCell {
        m1: zeros(d_v, d_k),
        m2: zeros(d_v, d_k),
    };
    let mut grid: Vec<Vec<OracleCell>> = Vec::new();
    for v in 0..variates {
        if keys[v].len() != steps || vals[v].len() != steps || gates[v].len() != steps {
            return Err(Error::Dimension(format!(
                "variate {v} has the wrong length"
            )));
        }
        let mut row: Vec<OracleCell> = Vec::new();
        for t in 0..steps {
            let k = &keys[v][t];
            let x = &vals[v][t];
            if k.len() != d_k || x.len() != d_v {
                return Err(Error::Dimension(format!(
                    "cell ({v}, {t}) has the wrong shape"
                )));
            }
            let g = gates[v][t];
            let left = if t == 0 { &empty } else { &row[t - 1] };
            let below = if v == 0 { &empty } else { &grid[v - 1][t] };
            let r1 = exp_residual(&left.m1, k, x);
            let r2 = exp_residual(&left.m2, k, x);
            let (s1, s2) = if per_head_predecessor {
                (exp_residual(&below.m1, k, x), exp_residual(&below.m2, k, x))
            } else {
                (r1.clone(), r2.clone())
            };
            let mut m1 = zeros(d_v, d_k);
            let mut m2 = zeros(d_v, d_k);
            for i in 0..d_v {
                for j in 0..d_k {
                    let g1 = r1[i] * k[j];
                    let g2 = r2[i] * k[j];
                    let h1 = s1[i] * k[j];
                    let h2 = s2[i] * k[j];
                    m1[i][j] = g.alpha * left.m1[i][j] - g.eta * g1 + g.beta * left.m2[i][j]
                        - g.gamma * g2;
                    m2[i][j] = g.theta * below.m1[i][j] - g.lambda * h1 + g.mu * below.m2[i][j]
                        - g.omega * h2;
                }
            }
            row.push(OracleCell { m1, m2 });
        }
        grid.push(row);
    }
    Ok(grid)
}
