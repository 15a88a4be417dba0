//! Randomised agreement checks between the fast paths, the oracle, and the
//! algebraic identities the chunked forms rely on.
//!
//! Every suite reports the largest deviation it saw. With `fault` set, each
//! suite flips one sign in the path under test so the harness can show it
//! notices a regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chunked::{run_chunked, ChunkPrecompute1D, ChunkSpec1D};
use crate::chunked_grid::{
    run_chunked_inputs, AnchoredResiduals, ChunkEval, ChunkProblem, ChunkSpec2D, RowExpansion,
};
use crate::error::Result;
use crate::grid::{run_grid_inputs, AnchorConvention, GridInputs, HeadPair, Traversal};
use crate::kernel::Mat;
use crate::memory::{self, grad, LogMemoryState, StepGates};
use crate::oracle::{oracle_run_1d, oracle_run_2d, OracleMatrix};
use crate::parallel::Parallelism;
use crate::projection::GateBundle;

pub const ORACLE_TOL: f64 = 1e-12;
pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const SUPERPOSITION_TOL: f64 = 1e-10;
pub const REDUCTION_TOL: f64 = 1e-12;
pub const GRADCHECK_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_variates: usize,
    pub max_steps: usize,
    pub max_dim: usize,
    pub fault: bool,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 7,
            max_variates: 6,
            max_steps: 32,
            max_dim: 4,
            fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_dev: f64,
    pub tol: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_dev <= self.tol
    }
}

fn rng_for(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng
}

fn vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_vec(rows, cols, vector(rng, rows * cols, scale)).expect("positive shape")
}

fn gates(rng: &mut ChaCha8Rng) -> GateBundle {
    GateBundle {
        alpha: rng.random_range(0.5..=1.0),
        beta: rng.random_range(0.0..=0.5),
        theta: rng.random_range(0.5..=1.0),
        mu: rng.random_range(0.0..=0.5),
        eta: rng.random_range(0.0..=0.2),
        gamma: rng.random_range(0.0..=0.1),
        lambda: rng.random_range(0.0..=0.2),
        omega: rng.random_range(0.0..=0.1),
    }
}

/// Random grid with keys scaled by `1/√d_k` so memories stay moderate.
pub fn random_grid(
    rng: &mut ChaCha8Rng,
    variates: usize,
    steps: usize,
    d_k: usize,
    d_v: usize,
) -> GridInputs {
    let n = variates * steps;
    let ks = 1.0 / (d_k as f64).sqrt();
    let keys: Vec<Vec<f64>> = (0..n).map(|_| vector(rng, d_k, ks)).collect();
    let values = (0..n).map(|_| vector(rng, d_v, 1.0)).collect();
    let queries = (0..n).map(|_| vector(rng, d_k, ks)).collect();
    let g = (0..n).map(|_| gates(rng)).collect();
    GridInputs::new(variates, steps, keys, values, queries, g).expect("consistent random grid")
}

fn sizes(rng: &mut ChaCha8Rng, cfg: &EquivConfig) -> (usize, usize, usize, usize) {
    (
        rng.random_range(1..=cfg.max_variates.max(1)),
        rng.random_range(1..=cfg.max_steps.max(1)),
        rng.random_range(1..=cfg.max_dim.max(1)),
        rng.random_range(1..=cfg.max_dim.max(1)),
    )
}

fn negate_values(inputs: &mut GridInputs) {
    for v in &mut inputs.values {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn to_oracle(m: &Mat) -> OracleMatrix {
    m.to_rows()
}

fn oracle_diff(a: &Mat, b: &OracleMatrix) -> f64 {
    let mut d: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            d = d.max((a[(i, j)] - x).abs());
        }
    }
    d
}

type OracleLayout = (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, Vec<Vec<GateBundle>>);

fn grid_to_oracle_layout(inputs: &GridInputs) -> OracleLayout {
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let pick = |all: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
        (0..nv)
            .map(|v| (0..nt).map(|t| all[v * nt + t].clone()).collect())
            .collect()
    };
    let gates = (0..nv)
        .map(|v| inputs.gates[v * nt..(v + 1) * nt].to_vec())
        .collect();
    (pick(&inputs.keys), pick(&inputs.values), gates)
}

/// Analytic gradient against central differences of `½ ‖M k − v‖²`.
pub fn gradcheck(trials: usize, max_dim: usize, seed: u64, fault: bool) -> SuiteResult {
    let mut rng = rng_for(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let d_k = rng.random_range(1..=max_dim.max(1));
        let d_v = rng.random_range(1..=max_dim.max(1));
        let m = matrix(&mut rng, d_v, d_k, 1.0).map(|x| x.exp());
        let k = vector(&mut rng, d_k, 1.0);
        let v = vector(&mut rng, d_v, 2.0);
        let mut analytic = grad(&m, &k, &v).expect("matching shapes");
        if fault {
            analytic = analytic.scaled(-1.0);
        }
        let half_loss = |m: &Mat| -> f64 {
            (0..d_v)
                .map(|i| {
                    let p: f64 = (0..d_k).map(|j| m[(i, j)] * k[j]).sum();
                    0.5 * (p - v[i]) * (p - v[i])
                })
                .sum()
        };
        for i in 0..d_v {
            for j in 0..d_k {
                let mut plus = m.clone();
                plus[(i, j)] += FD_STEP;
                let mut minus = m.clone();
                minus[(i, j)] -= FD_STEP;
                let numeric = (half_loss(&plus) - half_loss(&minus)) / (2.0 * FD_STEP);
                let a = analytic[(i, j)];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    SuiteResult {
        name: "gradcheck",
        trials,
        max_dev: worst,
        tol: GRADCHECK_TOL,
    }
}

/// Exact and unit-chunk 1D runs against the oracle.
pub fn chunk1d_oracle(cfg: &EquivConfig) -> Result<SuiteResult> {
    let mut rng = rng_for(cfg.seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.trials {
        let (_, steps, d_k, d_v) = sizes(&mut rng, cfg);
        let ks = 1.0 / (d_k as f64).sqrt();
        let keys: Vec<Vec<f64>> = (0..steps).map(|_| vector(&mut rng, d_k, ks)).collect();
        let mut vals: Vec<Vec<f64>> = (0..steps).map(|_| vector(&mut rng, d_v, 1.0)).collect();
        let g: Vec<StepGates> = (0..steps)
            .map(|_| StepGates::new(rng.random_range(0.5..=1.0), rng.random_range(0.0..=0.3)))
            .collect();
        let s0 = LogMemoryState {
            mlog: matrix(&mut rng, d_v, d_k, 0.5),
        };
        let alphas: Vec<f64> = g.iter().map(|g| g.alpha).collect();
        let etas: Vec<f64> = g.iter().map(|g| g.eta).collect();
        let want = oracle_run_1d(&to_oracle(&s0.mlog), &keys, &vals, &alphas, &etas)?;
        if cfg.fault {
            vals[0][0] = -vals[0][0];
        }
        let exact = memory::run_sequence(&s0, &keys, &vals, &g)?;
        let chunked = run_chunked(&s0, &keys, &vals, &g, ChunkSpec1D::new(1)?)?;
        for ((e, c), w) in exact.iter().zip(&chunked).zip(&want) {
            worst = worst
                .max(oracle_diff(&e.mlog, w))
                .max(oracle_diff(&c.mlog, w));
        }
    }
    Ok(SuiteResult {
        name: "chunk1d_vs_oracle",
        trials: cfg.trials,
        max_dev: worst,
        tol: ORACLE_TOL,
    })
}

/// Exact grid (both conventions) and unit-chunk grid against the oracle.
pub fn chunk2d_oracle(cfg: &EquivConfig) -> Result<SuiteResult> {
    let mut rng = rng_for(cfg.seed, 3);
    let par = Parallelism::sequential();
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.trials {
        let (nv, nt, d_k, d_v) = sizes(&mut rng, cfg);
        let mut inputs = random_grid(&mut rng, nv, nt, d_k, d_v);
        let (keys, vals, gates) = grid_to_oracle_layout(&inputs);
        let per_head = oracle_run_2d(&keys, &vals, &gates, true)?;
        let prev_time = oracle_run_2d(&keys, &vals, &gates, false)?;
        if cfg.fault {
            negate_values(&mut inputs);
        }
        let chunked = run_chunked_inputs(&inputs, ChunkSpec2D::new(1, 1)?, ChunkEval::Loop, &par)?;
        let exact_ph = run_grid_inputs(
            &inputs,
            AnchorConvention::PerHeadPredecessor,
            Traversal::TimeMajor,
            &par,
        );
        let exact_pt = run_grid_inputs(
            &inputs,
            AnchorConvention::PrevTimeBoth,
            Traversal::Wavefront,
            &par,
        );
        for v in 0..nv {
            for t in 0..nt {
                let o = &per_head[v][t];
                let p = &prev_time[v][t];
                for (traj, want) in [(&chunked, o), (&exact_ph, o), (&exact_pt, p)] {
                    let s = traj.get(v, t);
                    worst = worst
                        .max(oracle_diff(&s.m1, &want.m1))
                        .max(oracle_diff(&s.m2, &want.m2));
                }
            }
        }
    }
    Ok(SuiteResult {
        name: "chunk2d_vs_oracle",
        trials: cfg.trials,
        max_dev: worst,
        tol: ORACLE_TOL,
    })
}

/// 1D chunk closed form, per-row 2D expansion, and whole-chunk closed form
/// against loop evaluation, on chunks of length up to 16.
pub fn closed_form(cfg: &EquivConfig) -> Result<SuiteResult> {
    let mut rng = rng_for(cfg.seed, 4);
    let sign = if cfg.fault { -1.0 } else { 1.0 };
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.trials {
        let len = rng.random_range(1..=16);
        let (d_k, d_v) = (
            rng.random_range(1..=cfg.max_dim.max(1)),
            rng.random_range(1..=cfg.max_dim.max(1)),
        );

        let u: Vec<Mat> = (0..len).map(|_| matrix(&mut rng, d_v, d_k, 1.0)).collect();
        let g: Vec<StepGates> = (0..len)
            .map(|_| StepGates::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=0.5)))
            .collect();
        let start = matrix(&mut rng, d_v, d_k, 1.0);
        let pre = ChunkPrecompute1D::new(u, &g);
        let scan = pre.scan(&start);
        let mut closed = pre.closed_form(&start);
        closed[len - 1] = closed[len - 1].scaled(sign);
        for (a, b) in scan.iter().zip(&closed) {
            worst = worst.max(a.max_abs_diff(b));
        }
        worst = worst.max(pre.final_state(&start).max_abs_diff(&scan[len - 1]));

        let m2: Vec<Mat> = (0..len).map(|_| matrix(&mut rng, d_v, d_k, 1.0)).collect();
        let mut row = RowExpansion {
            start: &start,
            m2_prev: m2.iter().collect(),
            g1: (0..len).map(|_| matrix(&mut rng, d_v, d_k, 1.0)).collect(),
            g2: (0..len).map(|_| matrix(&mut rng, d_v, d_k, 1.0)).collect(),
            gates: (0..len).map(|_| gates(&mut rng)).collect(),
        };
        let looped = row.loop_form();
        if cfg.fault {
            row.g2[0] = row.g2[0].scaled(-1.0);
        }
        for (a, b) in looped.iter().zip(&row.closed_form()) {
            worst = worst.max(a.max_abs_diff(b));
        }

        let (nv, nt) = (rng.random_range(1..=4), rng.random_range(1..=16));
        let mut inputs = random_grid(&mut rng, nv, nt, d_k, d_v);
        let init = HeadPair {
            m1: matrix(&mut rng, d_v, d_k, 0.5),
            m2: matrix(&mut rng, d_v, d_k, 0.5),
        };
        inputs = inputs.with_initial(init)?;
        let par = Parallelism::sequential();
        let spec = ChunkSpec2D::new(nt, nv)?;
        let a = run_chunked_inputs(&inputs, spec, ChunkEval::Loop, &par)?;
        let b = run_chunked_inputs(&inputs, spec, ChunkEval::ClosedForm, &par)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(SuiteResult {
        name: "closed_form_vs_loop",
        trials: cfg.trials,
        max_dev: worst,
        tol: CLOSED_FORM_TOL,
    })
}

fn random_forcing(rng: &mut ChaCha8Rng, d_v: usize) -> AnchoredResiduals {
    AnchoredResiduals {
        u1: vector(rng, d_v, 1.0),
        u2: vector(rng, d_v, 1.0),
        p1: vector(rng, d_v, 1.0),
        p2: vector(rng, d_v, 1.0),
    }
}

fn combine_forcing(
    a: f64,
    x: &AnchoredResiduals,
    b: f64,
    y: &AnchoredResiduals,
) -> AnchoredResiduals {
    let mix = |p: &[f64], q: &[f64]| -> Vec<f64> {
        p.iter().zip(q).map(|(p, q)| a * p + b * q).collect()
    };
    AnchoredResiduals {
        u1: mix(&x.u1, &y.u1),
        u2: mix(&x.u2, &y.u2),
        p1: mix(&x.p1, &y.p1),
        p2: mix(&x.p2, &y.p2),
    }
}

/// With fixed gates a whole-grid chunk is affine in its anchored residuals:
/// `f(a·x + b·y) = a·f(x) + b·f(y) + (1 − a − b)·f(0)`.
pub fn superposition(cfg: &EquivConfig) -> Result<SuiteResult> {
    let mut rng = rng_for(cfg.seed, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.trials {
        let (nv, nt, d_k, d_v) = sizes(&mut rng, cfg);
        let ks = 1.0 / (d_k as f64).sqrt();
        let left: Vec<HeadPair> = (0..nv)
            .map(|_| HeadPair {
                m1: matrix(&mut rng, d_v, d_k, 0.5),
                m2: matrix(&mut rng, d_v, d_k, 0.5),
            })
            .collect();
        let below: Vec<HeadPair> = (0..nt)
            .map(|_| HeadPair {
                m1: matrix(&mut rng, d_v, d_k, 0.5),
                m2: matrix(&mut rng, d_v, d_k, 0.5),
            })
            .collect();
        let n = nv * nt;
        let keys: Vec<Vec<f64>> = (0..n).map(|_| vector(&mut rng, d_k, ks)).collect();
        let gate_list: Vec<GateBundle> = (0..n).map(|_| gates(&mut rng)).collect();
        let x: Vec<AnchoredResiduals> = (0..n).map(|_| random_forcing(&mut rng, d_v)).collect();
        let y: Vec<AnchoredResiduals> = (0..n).map(|_| random_forcing(&mut rng, d_v)).collect();
        let zero = combine_forcing(0.0, &x[0], 0.0, &y[0]);
        let (a, b) = (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0));
        let solve = |forcing: Vec<AnchoredResiduals>| {
            ChunkProblem {
                rows: nv,
                cols: nt,
                left: left.iter().collect(),
                below: below.iter().collect(),
                keys: keys.iter().map(Vec::as_slice).collect(),
                gates: gate_list.clone(),
                forcing,
            }
            .solve()
        };
        let fx = solve(x.clone());
        let fy = solve(y.clone());
        let f0 = solve(vec![zero; n]);
        let b_eff = if cfg.fault { -b } else { b };
        let fxy = solve(
            x.iter()
                .zip(&y)
                .map(|(p, q)| combine_forcing(a, p, b_eff, q))
                .collect(),
        );
        for i in 0..n {
            for (got, hx, hy, h0) in [
                (&fxy[i].m1, &fx[i].m1, &fy[i].m1, &f0[i].m1),
                (&fxy[i].m2, &fx[i].m2, &fy[i].m2, &f0[i].m2),
            ] {
                let mut want = hx.scaled(a);
                want.add_scaled(b, hy);
                want.add_scaled(1.0 - a - b, h0);
                worst = worst.max(got.max_abs_diff(&want));
            }
        }
    }
    Ok(SuiteResult {
        name: "superposition",
        trials: cfg.trials,
        max_dev: worst,
        tol: SUPERPOSITION_TOL,
    })
}

/// One variate with every cross gate closed: head 1 is the 1D memory.
pub fn reduction_1d(cfg: &EquivConfig) -> Result<SuiteResult> {
    let mut rng = rng_for(cfg.seed, 6);
    let par = Parallelism::sequential();
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.trials {
        let (_, nt, d_k, d_v) = sizes(&mut rng, cfg);
        let mut inputs = random_grid(&mut rng, 1, nt, d_k, d_v);
        for g in &mut inputs.gates {
            *g = GateBundle::one_dimensional(g.alpha, g.eta);
        }
        let steps: Vec<StepGates> = inputs
            .gates
            .iter()
            .map(|g| StepGates::new(g.alpha, g.eta))
            .collect();
        let s0 = LogMemoryState::zeros(d_v, d_k);
        let want = memory::run_sequence(&s0, &inputs.keys, &inputs.values, &steps)?;
        if cfg.fault {
            negate_values(&mut inputs);
        }
        for conv in [
            AnchorConvention::PrevTimeBoth,
            AnchorConvention::PerHeadPredecessor,
        ] {
            let traj = run_grid_inputs(&inputs, conv, Traversal::TimeMajor, &par);
            for (t, w) in want.iter().enumerate() {
                worst = worst.max(traj.get(0, t).m1.max_abs_diff(&w.mlog));
            }
        }
    }
    Ok(SuiteResult {
        name: "reduction_1d",
        trials: cfg.trials,
        max_dev: worst,
        tol: REDUCTION_TOL,
    })
}

/// All suites driven by `cfg`, in a fixed order.
pub fn run_all(cfg: &EquivConfig) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        chunk1d_oracle(cfg)?,
        chunk2d_oracle(cfg)?,
        closed_form(cfg)?,
        superposition(cfg)?,
        reduction_1d(cfg)?,
    ])
}
