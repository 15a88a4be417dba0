//! Chunk-wise approximation of the two-dimensional recurrence.
//!
//! The grid is cut into `b_v × b_t` rectangles. Inside a rectangle every
//! gradient is frozen at one of two anchors on the already processed frontier:
//!
//! * time anchor: the top variate of the chunk at the last step before it,
//!   giving `u¹, u²` for head 1;
//! * variate anchor: the last step of the chunk in the variate just below it,
//!   giving `p¹, p²` for head 2.
//!
//! Anchors outside the grid fall back to the initial state. With anchored
//! gradients the recurrence inside the rectangle is linear:
//!
//! ```text
//! M̃¹[v,t] = α M̃¹[v,t−1] + β M̃²[v,t−1] − (η u¹ + γ u²) kᵀ
//! M̃²[v,t] = θ M̃¹[v−1,t] + μ M̃²[v−1,t] − (λ p¹ + ω p²) kᵀ
//! ```
//!
//! With `b_t = b_v = 1` both anchors are the true predecessors and the result is
//! the exact recurrence under [`AnchorConvention::PerHeadPredecessor`].

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{
    combine, mix, residual, run_grid_inputs, AnchorConvention, ColumnStore, GridInputs, HeadPair,
    Trajectory, Traversal,
};
use crate::kernel::{outer, suffix_products, Mat};
use crate::parallel::Parallelism;
use crate::projection::{GateBundle, GateSource, ProjectionSet};
use crate::series::SeriesTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkSpec2D {
    pub b_t: usize,
    pub b_v: usize,
}

impl ChunkSpec2D {
    pub fn new(b_t: usize, b_v: usize) -> Result<Self> {
        if b_t == 0 || b_v == 0 {
            return Err(Error::Contract("chunk sizes must be at least 1".into()));
        }
        Ok(Self { b_t, b_v })
    }

    pub fn validate(&self, variates: usize, steps: usize) -> Result<()> {
        if self.b_t == 0 || self.b_t > steps || self.b_v == 0 || self.b_v > variates {
            return Err(Error::Contract(format!(
                "chunk {}x{} (time x variate) does not fit a grid of {steps} steps and {variates} variates",
                self.b_t, self.b_v
            )));
        }
        Ok(())
    }

    pub fn chunk_count(&self, variates: usize, steps: usize) -> usize {
        steps.div_ceil(self.b_t) * variates.div_ceil(self.b_v)
    }

    /// Zero-based cell ranges of chunk `(i, j)`, `i` along time and `j` along variates.
    pub fn rect(&self, variates: usize, steps: usize, i: usize, j: usize) -> ChunkRect {
        let t0 = i * self.b_t;
        let v0 = j * self.b_v;
        ChunkRect {
            t: t0..(t0 + self.b_t).min(steps),
            v: v0..(v0 + self.b_v).min(variates),
        }
    }
}

/// Zero-based half-open cell ranges of one chunk; edge chunks may be smaller.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkRect {
    pub v: Range<usize>,
    pub t: Range<usize>,
}

/// Anchor cells of a chunk as one-based `(v, t)`; a zero coordinate is the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkAnchors {
    pub time_anchor: (usize, usize),
    pub variate_anchor: (usize, usize),
}

impl ChunkAnchors {
    pub fn of(rect: &ChunkRect) -> Self {
        Self {
            time_anchor: (rect.v.end, rect.t.start),
            variate_anchor: (rect.v.start, rect.t.end),
        }
    }
}

/// Residuals `exp(M̃_anchor) k − v` of one cell; the gradients are these times `kᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredResiduals {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl AnchoredResiduals {
    pub fn at(time_anchor: &HeadPair, variate_anchor: &HeadPair, k: &[f64], val: &[f64]) -> Self {
        Self {
            u1: residual(&time_anchor.m1, k, val),
            u2: residual(&time_anchor.m2, k, val),
            p1: residual(&variate_anchor.m1, k, val),
            p2: residual(&variate_anchor.m2, k, val),
        }
    }
}

/// One chunk with its gradients already anchored. Cells are row-major,
/// one row per variate.
#[derive(Clone, Debug)]
pub struct ChunkProblem<'a> {
    pub rows: usize,
    pub cols: usize,
    /// State just before the chunk in time, per row.
    pub left: Vec<&'a HeadPair>,
    /// State just below the chunk in variates, per column.
    pub below: Vec<&'a HeadPair>,
    pub keys: Vec<&'a [f64]>,
    pub gates: Vec<GateBundle>,
    pub forcing: Vec<AnchoredResiduals>,
}

impl ChunkProblem<'_> {
    fn head2(&self, i: usize, below: &HeadPair) -> Mat {
        let (g, f) = (&self.gates[i], &self.forcing[i]);
        let c2 = mix(g.lambda, &f.p1, g.omega, &f.p2);
        combine(g.theta, &below.m1, g.mu, &below.m2, &c2, self.keys[i])
    }

    /// Double loop over the rectangle.
    pub fn solve(&self) -> Vec<HeadPair> {
        let mut out: Vec<HeadPair> = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let i = r * self.cols + c;
                let next = {
                    let left = if c == 0 { self.left[r] } else { &out[i - 1] };
                    let below = if r == 0 {
                        self.below[c]
                    } else {
                        &out[i - self.cols]
                    };
                    let (g, f) = (&self.gates[i], &self.forcing[i]);
                    let c1 = mix(g.eta, &f.u1, g.gamma, &f.u2);
                    HeadPair {
                        m1: combine(g.alpha, &left.m1, g.beta, &left.m2, &c1, self.keys[i]),
                        m2: self.head2(i, below),
                    }
                };
                out.push(next);
            }
        }
        out
    }

    /// Head 2 of a row only needs the row below, so it is stepped directly;
    /// head 1 of each row is expanded in closed form from its left boundary.
    pub fn solve_rows_closed_form(&self) -> Vec<HeadPair> {
        let mut out: Vec<HeadPair> = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            let base = r * self.cols;
            let m2: Vec<Mat> = (0..self.cols)
                .map(|c| {
                    let below = if r == 0 {
                        self.below[c]
                    } else {
                        &out[base - self.cols + c]
                    };
                    self.head2(base + c, below)
                })
                .collect();
            let m1 = {
                let cells = base..base + self.cols;
                let mut m2_prev = vec![&self.left[r].m2];
                m2_prev.extend(m2.iter().take(self.cols - 1));
                let g1 = cells
                    .clone()
                    .map(|i| outer(&self.forcing[i].u1, self.keys[i]))
                    .collect();
                let g2 = cells
                    .clone()
                    .map(|i| outer(&self.forcing[i].u2, self.keys[i]))
                    .collect();
                RowExpansion {
                    start: &self.left[r].m1,
                    m2_prev,
                    g1,
                    g2,
                    gates: self.gates[cells].to_vec(),
                }
                .closed_form()
            };
            out.extend(m1.into_iter().zip(m2).map(|(m1, m2)| HeadPair { m1, m2 }));
        }
        out
    }
}

/// Head 1 along one variate row of a chunk:
/// `M¹_c = α_c M¹_{c−1} + β_c M²_{c−1} − η_c G¹_c − γ_c G²_c`.
#[derive(Clone, Debug)]
pub struct RowExpansion<'a> {
    pub start: &'a Mat,
    /// `M²` one step back in time, for every position of the row.
    pub m2_prev: Vec<&'a Mat>,
    pub g1: Vec<Mat>,
    pub g2: Vec<Mat>,
    pub gates: Vec<GateBundle>,
}

impl RowExpansion<'_> {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn loop_form(&self) -> Vec<Mat> {
        let mut out: Vec<Mat> = Vec::with_capacity(self.len());
        for (c, g) in self.gates.iter().enumerate() {
            let prev = if c == 0 { self.start } else { &out[c - 1] };
            let mut m = prev.scaled(g.alpha);
            m.add_scaled(g.beta, self.m2_prev[c]);
            m.add_scaled(-g.eta, &self.g1[c]);
            m.add_scaled(-g.gamma, &self.g2[c]);
            out.push(m);
        }
        out
    }

    /// `M¹_c = (α_0…α_c) M¹_start + Σ_i A_i (β_i M²_{i−1} − η_i G¹_i − γ_i G²_i)`
    /// with `A_i = α_{i+1}…α_c`.
    pub fn closed_form(&self) -> Vec<Mat> {
        let alphas: Vec<f64> = self.gates.iter().map(|g| g.alpha).collect();
        (0..self.len())
            .map(|c| {
                let a = suffix_products(&alphas[..=c]);
                let b: Vec<f64> = (0..=c).map(|i| a[i] * self.gates[i].beta).collect();
                let e: Vec<f64> = (0..=c).map(|i| a[i] * self.gates[i].eta).collect();
                let j: Vec<f64> = (0..=c).map(|i| a[i] * self.gates[i].gamma).collect();
                let mut m = self.start.scaled(a[0] * alphas[0]);
                for i in 0..=c {
                    m.add_scaled(b[i], self.m2_prev[i]);
                    m.add_scaled(-e[i], &self.g1[i]);
                    m.add_scaled(-j[i], &self.g2[i]);
                }
                m
            })
            .collect()
    }
}

/// Closed-form evaluation of every row of a chunk.
pub fn expand_chunk_closed_form(problem: &ChunkProblem<'_>) -> Vec<HeadPair> {
    problem.solve_rows_closed_form()
}

/// How the inside of each chunk is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChunkEval {
    #[default]
    Loop,
    ClosedForm,
}

/// Order in which chunks are visited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChunkOrder {
    /// Anti-diagonals of the chunk grid; chunks on one diagonal run concurrently.
    #[default]
    Wavefront,
    /// One time slab after another, keeping only `b_t + 1` columns alive.
    Streaming,
}

fn build_problem<'a>(
    inputs: &'a GridInputs,
    rect: &ChunkRect,
    store: &'a ColumnStore<HeadPair>,
    par: &Parallelism,
) -> ChunkProblem<'a> {
    let anchors = ChunkAnchors::of(rect);
    let ta = store
        .get(anchors.time_anchor.0, anchors.time_anchor.1)
        .linear();
    let va = store
        .get(anchors.variate_anchor.0, anchors.variate_anchor.1)
        .linear();
    let cells: Vec<usize> = rect
        .v
        .clone()
        .flat_map(|v| rect.t.clone().map(move |t| inputs.cell(v, t)))
        .collect();
    let forcing = par.map(&cells, |&i| {
        AnchoredResiduals::at(&ta, &va, &inputs.keys[i], &inputs.values[i])
    });
    ChunkProblem {
        rows: rect.v.len(),
        cols: rect.t.len(),
        left: rect
            .v
            .clone()
            .map(|v| store.get(v + 1, rect.t.start))
            .collect(),
        below: rect
            .t
            .clone()
            .map(|t| store.get(rect.v.start, t + 1))
            .collect(),
        keys: cells.iter().map(|&i| inputs.keys[i].as_slice()).collect(),
        gates: cells.iter().map(|&i| inputs.gates[i]).collect(),
        forcing,
    }
}

fn solve(problem: &ChunkProblem<'_>, eval: ChunkEval) -> Vec<HeadPair> {
    match eval {
        ChunkEval::Loop => problem.solve(),
        ChunkEval::ClosedForm => problem.solve_rows_closed_form(),
    }
}

/// Runs the chunked recurrence, handing every state to `sink` as zero-based
/// `(v, t)`. Returns the number of chunks processed.
pub fn chunked_sweep<F>(
    inputs: &GridInputs,
    spec: ChunkSpec2D,
    order: ChunkOrder,
    eval: ChunkEval,
    par: &Parallelism,
    mut sink: F,
) -> Result<usize>
where
    F: FnMut(usize, usize, &HeadPair),
{
    let (nv, nt) = (inputs.variates(), inputs.steps());
    spec.validate(nv, nt)?;
    let (ni, nj) = (nt.div_ceil(spec.b_t), nv.div_ceil(spec.b_v));
    let capacity = match order {
        ChunkOrder::Wavefront => nt,
        ChunkOrder::Streaming => spec.b_t + 1,
    };
    let mut store = ColumnStore::new(nv, capacity, inputs.initial.clone());
    let mut processed = 0;
    let mut commit =
        |store: &mut ColumnStore<HeadPair>, rect: &ChunkRect, states: Vec<HeadPair>| {
            let mut states = states.into_iter();
            for v in rect.v.clone() {
                for t in rect.t.clone() {
                    let s = states.next().expect("one state per cell");
                    sink(v, t, &s);
                    store.put(v + 1, t + 1, s);
                }
            }
        };
    match order {
        ChunkOrder::Streaming => {
            for i in 0..ni {
                for j in 0..nj {
                    let rect = spec.rect(nv, nt, i, j);
                    let states = solve(&build_problem(inputs, &rect, &store, par), eval);
                    commit(&mut store, &rect, states);
                    processed += 1;
                }
            }
        }
        ChunkOrder::Wavefront => {
            for diag in 0..ni + nj - 1 {
                let rects: Vec<ChunkRect> = (0..nj)
                    .filter(|&j| diag >= j && diag - j < ni)
                    .map(|j| spec.rect(nv, nt, diag - j, j))
                    .collect();
                let solved = {
                    let store = &store;
                    par.map(&rects, |rect| {
                        let seq = Parallelism::sequential();
                        solve(&build_problem(inputs, rect, store, &seq), eval)
                    })
                };
                for (rect, states) in rects.iter().zip(solved) {
                    commit(&mut store, rect, states);
                    processed += 1;
                }
            }
        }
    }
    Ok(processed)
}

pub fn run_chunked_inputs(
    inputs: &GridInputs,
    spec: ChunkSpec2D,
    eval: ChunkEval,
    par: &Parallelism,
) -> Result<Trajectory> {
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let mut cells = vec![None; nv * nt];
    chunked_sweep(inputs, spec, ChunkOrder::Wavefront, eval, par, |v, t, s| {
        cells[v * nt + t] = Some(s.clone());
    })?;
    Ok(Trajectory::collect(nv, nt, inputs.initial.clone(), cells))
}

/// Chunked run keeping `b_t + 1` columns alive; returns the last column.
pub fn run_chunked_final_column(
    inputs: &GridInputs,
    spec: ChunkSpec2D,
    par: &Parallelism,
) -> Result<Vec<HeadPair>> {
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let mut last = vec![None; nv];
    chunked_sweep(
        inputs,
        spec,
        ChunkOrder::Streaming,
        ChunkEval::Loop,
        par,
        |v, t, s| {
            if t + 1 == nt {
                last[v] = Some(s.clone());
            }
        },
    )?;
    Ok(last
        .into_iter()
        .map(|s| s.expect("last column visited"))
        .collect())
}

pub fn run_grid_chunked(
    x: &SeriesTensor,
    proj: &ProjectionSet,
    gates: &GateSource,
    spec: ChunkSpec2D,
) -> Result<Trajectory> {
    let inputs = GridInputs::build(x, proj, gates)?;
    run_chunked_inputs(&inputs, spec, ChunkEval::Loop, &Parallelism::sequential())
}

/// Largest entrywise gap between the chunked trajectory and the exact one
/// whose cross-variate gradients come from each head's own predecessor.
pub fn approximation_gap_2d(
    x: &SeriesTensor,
    proj: &ProjectionSet,
    gates: &GateSource,
    spec: ChunkSpec2D,
) -> Result<f64> {
    let inputs = GridInputs::build(x, proj, gates)?;
    let par = Parallelism::sequential();
    let chunked = run_chunked_inputs(&inputs, spec, ChunkEval::Loop, &par)?;
    let exact = run_grid_inputs(
        &inputs,
        AnchorConvention::PerHeadPredecessor,
        Traversal::TimeMajor,
        &par,
    );
    Ok(chunked.max_abs_diff(&exact))
}
