//! Exact two-dimensional dual-memory recurrence over the (variate, time) grid.
//!
//! Every cell `(v, t)` carries two log-domain memories. Head 1 steps along time
//! and head 2 along variates, each mixing in the other:
//!
//! ```text
//! M̃¹[v,t] = α M̃¹[v,t−1] − η g¹ + β M̃²[v,t−1] − γ g²
//! M̃²[v,t] = θ M̃¹[v−1,t] − λ g̃¹ + μ M̃²[v−1,t] − ω g̃²
//! ```
//!
//! where `gⁱ = (exp(M̃ⁱ[v,t−1]) k − v) kᵀ`. The cross-variate gradients `g̃ⁱ`
//! depend on the [`AnchorConvention`]. Cells outside the grid (`v = 0` or
//! `t = 0` in one-based terms) hold the initial state.
//!
//! A cell only depends on its left and lower neighbours, so any order that
//! visits those first gives bit-identical results; cells with equal `v + t`
//! are independent and may be computed concurrently.

use std::fmt;
use std::str::FromStr;

use crate::error::{dim_check, Error, Result};
use crate::kernel::{emap_exp, residual_into, Mat};
use crate::parallel::Parallelism;
use crate::projection::{project_kvq, GateBundle, GateSource, ProjectionSet};
use crate::series::SeriesTensor;

/// Where the cross-variate gradients of head 2 are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnchorConvention {
    /// `g̃ⁱ = gⁱ`: both heads' errors come from the previous time step of the
    /// same variate.
    #[default]
    PrevTimeBoth,
    /// `g̃ⁱ` is taken at head `i` of the previous variate, `M̃ⁱ[v−1,t]`.
    PerHeadPredecessor,
}

impl AnchorConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorConvention::PrevTimeBoth => "prev_time_both",
            AnchorConvention::PerHeadPredecessor => "per_head_predecessor",
        }
    }
}

impl fmt::Display for AnchorConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnchorConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prev_time_both" => Ok(AnchorConvention::PrevTimeBoth),
            "per_head_predecessor" => Ok(AnchorConvention::PerHeadPredecessor),
            other => Err(Error::Contract(format!(
                "unknown anchor convention {other:?}"
            ))),
        }
    }
}

/// Log-domain states of both heads at one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadPair {
    pub m1: Mat,
    pub m2: Mat,
}

impl HeadPair {
    pub fn zeros(d_v: usize, d_k: usize) -> Self {
        Self {
            m1: Mat::zeros(d_v, d_k),
            m2: Mat::zeros(d_v, d_k),
        }
    }

    pub fn linear(&self) -> Self {
        Self {
            m1: emap_exp(&self.m1),
            m2: emap_exp(&self.m2),
        }
    }

    pub fn max_abs_diff(&self, other: &HeadPair) -> f64 {
        self.m1
            .max_abs_diff(&other.m1)
            .max(self.m2.max_abs_diff(&other.m2))
    }

    pub fn is_finite(&self) -> bool {
        self.m1.is_finite() && self.m2.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    First,
    Second,
}

/// Keys, values, queries and gates for every cell, row-major over `(v, t)`.
#[derive(Clone, Debug)]
pub struct GridInputs {
    variates: usize,
    steps: usize,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub gates: Vec<GateBundle>,
    pub initial: HeadPair,
}

impl GridInputs {
    pub fn new(
        variates: usize,
        steps: usize,
        keys: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
        queries: Vec<Vec<f64>>,
        gates: Vec<GateBundle>,
    ) -> Result<Self> {
        if variates == 0 || steps == 0 {
            return Err(Error::Contract("grid needs at least one cell".into()));
        }
        let n = variates * steps;
        dim_check(
            keys.len() == n && values.len() == n && queries.len() == n && gates.len() == n,
            || format!("expected {n} cells of keys, values, queries and gates"),
        )?;
        let d_k = keys[0].len();
        let d_v = values[0].len();
        dim_check(d_k > 0 && d_v > 0, || "empty keys or values".into())?;
        dim_check(
            keys.iter().chain(&queries).all(|k| k.len() == d_k)
                && values.iter().all(|v| v.len() == d_v),
            || "keys, queries or values change length across cells".into(),
        )?;
        if let Some((i, g)) = gates.iter().enumerate().find(|(_, g)| !g.is_valid()) {
            return Err(Error::Contract(format!(
                "gates of cell {i} out of range: {g:?}"
            )));
        }
        Ok(Self {
            variates,
            steps,
            keys,
            values,
            queries,
            gates,
            initial: HeadPair::zeros(d_v, d_k),
        })
    }

    /// Projects every `x[v,t]` and evaluates its gates.
    pub fn build(x: &SeriesTensor, proj: &ProjectionSet, gates: &GateSource) -> Result<Self> {
        proj.validate()?;
        let n = x.variates() * x.steps();
        let (mut keys, mut values, mut queries, mut bundles) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for v in 0..x.variates() {
            for t in 0..x.steps() {
                let input = x.input(v, t);
                let kvq = project_kvq(proj, input)?;
                keys.push(kvq.k);
                values.push(kvq.v);
                queries.push(kvq.q);
                bundles.push(gates.gates_at(v * x.steps() + t, input)?);
            }
        }
        Self::new(x.variates(), x.steps(), keys, values, queries, bundles)
    }

    pub fn with_initial(mut self, initial: HeadPair) -> Result<Self> {
        dim_check(initial.m1.shape() == self.initial.m1.shape(), || {
            "initial state has the wrong shape".into()
        })?;
        dim_check(initial.m2.shape() == self.initial.m2.shape(), || {
            "initial state has the wrong shape".into()
        })?;
        self.initial = initial;
        Ok(self)
    }

    pub fn variates(&self) -> usize {
        self.variates
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn d_k(&self) -> usize {
        self.keys[0].len()
    }

    pub fn d_v(&self) -> usize {
        self.values[0].len()
    }

    pub fn cell(&self, v: usize, t: usize) -> usize {
        v * self.steps + t
    }
}

/// All cell states of a run, zero-based `(v, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    variates: usize,
    steps: usize,
    initial: HeadPair,
    cells: Vec<HeadPair>,
}

impl Trajectory {
    pub(crate) fn collect(
        variates: usize,
        steps: usize,
        initial: HeadPair,
        cells: Vec<Option<HeadPair>>,
    ) -> Self {
        let cells = cells
            .into_iter()
            .map(|c| c.expect("every cell visited"))
            .collect();
        Self {
            variates,
            steps,
            initial,
            cells,
        }
    }

    pub fn variates(&self) -> usize {
        self.variates
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn initial(&self) -> &HeadPair {
        &self.initial
    }

    pub fn get(&self, v: usize, t: usize) -> &HeadPair {
        assert!(v < self.variates && t < self.steps, "cell out of range");
        &self.cells[v * self.steps + t]
    }

    pub fn head(&self, head: Head, v: usize, t: usize) -> &Mat {
        let cell = self.get(v, t);
        match head {
            Head::First => &cell.m1,
            Head::Second => &cell.m2,
        }
    }

    pub fn final_column(&self) -> Vec<&HeadPair> {
        (0..self.variates)
            .map(|v| self.get(v, self.steps - 1))
            .collect()
    }

    /// Entry `(0, 0)` of the linear memory of `head` for every cell, one row per variate.
    pub fn linear_scalar_grid(&self, head: Head) -> Vec<Vec<f64>> {
        (0..self.variates)
            .map(|v| {
                (0..self.steps)
                    .map(|t| self.head(head, v, t)[(0, 0)].exp())
                    .collect()
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        assert_eq!((self.variates, self.steps), (other.variates, other.steps));
        self.cells
            .iter()
            .zip(&other.cells)
            .fold(0.0, |acc, (a, b)| acc.max(a.max_abs_diff(b)))
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(HeadPair::is_finite)
    }
}

/// Ring buffer of grid columns with one-based coordinates; `0` on either axis
/// is the boundary and always yields the initial state.
pub(crate) struct ColumnStore<S> {
    variates: usize,
    capacity: usize,
    slots: Vec<Option<(usize, S)>>,
    boundary: S,
}

impl<S> ColumnStore<S> {
    pub(crate) fn new(variates: usize, capacity: usize, boundary: S) -> Self {
        let capacity = capacity.max(1);
        Self {
            variates,
            capacity,
            slots: (0..variates * capacity).map(|_| None).collect(),
            boundary,
        }
    }

    pub(crate) fn get(&self, v: usize, t: usize) -> &S {
        if v == 0 || t == 0 {
            return &self.boundary;
        }
        let (tag, state) = self.slots[self.slot(v, t)]
            .as_ref()
            .expect("state read before it was computed");
        assert_eq!(*tag, t, "state evicted before it was read");
        state
    }

    pub(crate) fn put(&mut self, v: usize, t: usize, state: S) {
        let i = self.slot(v, t);
        self.slots[i] = Some((t, state));
    }

    fn slot(&self, v: usize, t: usize) -> usize {
        debug_assert!(v >= 1 && v <= self.variates);
        ((t - 1) % self.capacity) * self.variates + (v - 1)
    }
}

/// `out = a·x + b·y − c kᵀ`, one pass over the entries.
pub(crate) fn combine(a: f64, x: &Mat, b: f64, y: &Mat, c: &[f64], k: &[f64]) -> Mat {
    let (rows, cols) = x.shape();
    let mut data = vec![0.0; rows * cols];
    let rows_out = data.chunks_exact_mut(cols);
    for (((out, xi), yi), &ci) in rows_out
        .zip(x.data().chunks_exact(cols))
        .zip(y.data().chunks_exact(cols))
        .zip(c)
    {
        for (((o, &xv), &yv), &kv) in out.iter_mut().zip(xi).zip(yi).zip(k) {
            *o = a * xv + b * yv - ci * kv;
        }
    }
    Mat::from_vec(rows, cols, data).expect("shape preserved")
}

pub(crate) fn mix(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect()
}

pub(crate) fn residual(m_linear: &Mat, k: &[f64], val: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; m_linear.rows()];
    residual_into(m_linear, k, val, &mut r);
    r
}

/// Log state plus its exponential, so each state is exponentiated once.
#[derive(Clone)]
struct ExactState {
    log: HeadPair,
    lin: HeadPair,
}

impl ExactState {
    fn new(log: HeadPair) -> Self {
        let lin = log.linear();
        Self { log, lin }
    }
}

fn exact_cell(
    time_prev: &ExactState,
    var_prev: &ExactState,
    k: &[f64],
    val: &[f64],
    g: &GateBundle,
    conv: AnchorConvention,
) -> HeadPair {
    let r1 = residual(&time_prev.lin.m1, k, val);
    let r2 = residual(&time_prev.lin.m2, k, val);
    let c1 = mix(g.eta, &r1, g.gamma, &r2);
    let c2 = match conv {
        AnchorConvention::PrevTimeBoth => mix(g.lambda, &r1, g.omega, &r2),
        AnchorConvention::PerHeadPredecessor => {
            let s1 = residual(&var_prev.lin.m1, k, val);
            let s2 = residual(&var_prev.lin.m2, k, val);
            mix(g.lambda, &s1, g.omega, &s2)
        }
    };
    HeadPair {
        m1: combine(
            g.alpha,
            &time_prev.log.m1,
            g.beta,
            &time_prev.log.m2,
            &c1,
            k,
        ),
        m2: combine(g.theta, &var_prev.log.m1, g.mu, &var_prev.log.m2, &c2, k),
    }
}

/// One cell of the exact recurrence given its left (`time_prev`) and lower
/// (`var_prev`) neighbours.
pub fn cell_update(
    time_prev: &HeadPair,
    var_prev: &HeadPair,
    k: &[f64],
    val: &[f64],
    gates: &GateBundle,
    conv: AnchorConvention,
) -> Result<HeadPair> {
    let shape = time_prev.m1.shape();
    dim_check(
        time_prev.m2.shape() == shape
            && var_prev.m1.shape() == shape
            && var_prev.m2.shape() == shape,
        || "neighbouring states disagree in shape".into(),
    )?;
    dim_check(shape == (val.len(), k.len()), || {
        format!(
            "memory {}x{} with key {} and value {}",
            shape.0,
            shape.1,
            k.len(),
            val.len()
        )
    })?;
    Ok(exact_cell(
        &ExactState::new(time_prev.clone()),
        &ExactState::new(var_prev.clone()),
        k,
        val,
        gates,
        conv,
    ))
}

/// Cell visiting order for the exact recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    /// Column by column; only two columns are kept alive.
    TimeMajor,
    /// Row by row.
    VariateMajor,
    /// Anti-diagonals `v + t = const`, each computed in parallel when allowed.
    Wavefront,
}

/// Runs the exact recurrence and hands every state to `sink` as zero-based `(v, t)`.
pub fn run_exact_with<F>(
    inputs: &GridInputs,
    conv: AnchorConvention,
    traversal: Traversal,
    par: &Parallelism,
    mut sink: F,
) where
    F: FnMut(usize, usize, &HeadPair),
{
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let capacity = match traversal {
        Traversal::TimeMajor => 2,
        _ => nt,
    };
    let mut store = ColumnStore::new(nv, capacity, ExactState::new(inputs.initial.clone()));
    let compute = |store: &ColumnStore<ExactState>, v: usize, t: usize| {
        let i = inputs.cell(v - 1, t - 1);
        exact_cell(
            store.get(v, t - 1),
            store.get(v - 1, t),
            &inputs.keys[i],
            &inputs.values[i],
            &inputs.gates[i],
            conv,
        )
    };
    let mut visit = |store: &mut ColumnStore<ExactState>, v: usize, t: usize, log: HeadPair| {
        sink(v - 1, t - 1, &log);
        store.put(v, t, ExactState::new(log));
    };
    match traversal {
        Traversal::TimeMajor => {
            for t in 1..=nt {
                for v in 1..=nv {
                    let s = compute(&store, v, t);
                    visit(&mut store, v, t, s);
                }
            }
        }
        Traversal::VariateMajor => {
            for v in 1..=nv {
                for t in 1..=nt {
                    let s = compute(&store, v, t);
                    visit(&mut store, v, t, s);
                }
            }
        }
        Traversal::Wavefront => {
            for diag in 2..=nv + nt {
                let cells: Vec<(usize, usize)> = (1..=nv)
                    .filter(|&v| diag > v && diag - v <= nt)
                    .map(|v| (v, diag - v))
                    .collect();
                let states = par.map(&cells, |&(v, t)| compute(&store, v, t));
                for ((v, t), s) in cells.into_iter().zip(states) {
                    visit(&mut store, v, t, s);
                }
            }
        }
    }
}

pub fn run_grid_inputs(
    inputs: &GridInputs,
    conv: AnchorConvention,
    traversal: Traversal,
    par: &Parallelism,
) -> Trajectory {
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let mut cells = vec![None; nv * nt];
    run_exact_with(inputs, conv, traversal, par, |v, t, s| {
        cells[v * nt + t] = Some(s.clone());
    });
    Trajectory::collect(nv, nt, inputs.initial.clone(), cells)
}

/// Exact run keeping only two columns alive; returns the last column.
pub fn run_grid_final_column(inputs: &GridInputs, conv: AnchorConvention) -> Vec<HeadPair> {
    let (nv, nt) = (inputs.variates(), inputs.steps());
    let mut last = vec![None; nv];
    run_exact_with(
        inputs,
        conv,
        Traversal::TimeMajor,
        &Parallelism::sequential(),
        |v, t, s| {
            if t + 1 == nt {
                last[v] = Some(s.clone());
            }
        },
    );
    last.into_iter()
        .map(|s| s.expect("last column visited"))
        .collect()
}

/// Projects `x`, evaluates gates and runs the exact recurrence over the whole grid.
pub fn run_grid(
    x: &SeriesTensor,
    proj: &ProjectionSet,
    gates: &GateSource,
    conv: AnchorConvention,
) -> Result<Trajectory> {
    let inputs = GridInputs::build(x, proj, gates)?;
    Ok(run_grid_inputs(
        &inputs,
        conv,
        Traversal::TimeMajor,
        &Parallelism::sequential(),
    ))
}

/// `o[v,t] = w_out · exp(M̃[v,t]) q[v,t]` for the chosen head.
pub fn readout(
    traj: &Trajectory,
    queries: &[Vec<f64>],
    w_out: &Mat,
    head: Head,
) -> Result<SeriesTensor> {
    let (nv, nt) = (traj.variates(), traj.steps());
    dim_check(queries.len() == nv * nt, || {
        format!("{} queries for {} cells", queries.len(), nv * nt)
    })?;
    let mut out = Vec::with_capacity(nv * nt * w_out.rows());
    for v in 0..nv {
        for t in 0..nt {
            let m = traj.head(head, v, t);
            let retrieved = crate::kernel::matvec(&emap_exp(m), &queries[v * nt + t])?;
            out.extend(crate::kernel::matvec(w_out, &retrieved)?);
        }
    }
    SeriesTensor::new(nv, nt, w_out.rows(), out)
}

/// True when head 1 of `target` is unchanged (within 1e-12) after replacing
/// every other variate's data with `perturbed`.
///
/// Head 1 only sees other variates through the `β`/`γ` terms, so closing
/// those gates on `target` must isolate it.
pub fn cross_variate_isolation_check(
    x: &SeriesTensor,
    perturbed: &SeriesTensor,
    proj: &ProjectionSet,
    gates: &GateSource,
    conv: AnchorConvention,
    target: usize,
) -> Result<bool> {
    if (x.variates(), x.steps(), x.dim())
        != (perturbed.variates(), perturbed.steps(), perturbed.dim())
    {
        return Err(Error::Dimension(
            "perturbed series has a different shape".into(),
        ));
    }
    if target >= x.variates() {
        return Err(Error::Contract(format!("no variate {target}")));
    }
    for t in 0..x.steps() {
        if x.input(target, t) != perturbed.input(target, t) {
            return Err(Error::Contract(format!(
                "perturbation touches the target variate at step {t}"
            )));
        }
    }
    let a = run_grid(x, proj, gates, conv)?;
    let b = run_grid(perturbed, proj, gates, conv)?;
    Ok((0..x.steps()).all(|t| a.get(target, t).m1.max_abs_diff(&b.get(target, t).m1) <= 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{init_projections, InitMode, ModelDims};

    fn scalar(x: f64) -> HeadPair {
        HeadPair {
            m1: Mat::filled(1, 1, x),
            m2: Mat::filled(1, 1, x),
        }
    }

    fn golden_gates() -> GateBundle {
        GateBundle::uniform(0.5, 0.01)
    }

    #[test]
    fn first_golden_cell() {
        let s = cell_update(
            &scalar(0.0),
            &scalar(0.0),
            &[1.0],
            &[2.0],
            &golden_gates(),
            AnchorConvention::PrevTimeBoth,
        )
        .unwrap();
        assert!((s.m1[(0, 0)] - 0.02).abs() < 1e-15);
        assert!((s.m2[(0, 0)] - 0.02).abs() < 1e-15);
        assert_eq!(format!("{:.3}", s.m1[(0, 0)].exp()), "1.020");
    }

    #[test]
    fn second_row_second_column_golden_cell() {
        // Left neighbour (2,1): log states 0.08 / 0.10; lower neighbour (1,2): 0.09838 / 0.07838.
        let left = HeadPair {
            m1: Mat::filled(1, 1, 0.08),
            m2: Mat::filled(1, 1, 0.10),
        };
        let below = HeadPair {
            m1: Mat::filled(1, 1, 0.02 + 0.01 * 3.919_206_388 * 2.0),
            m2: Mat::filled(1, 1, 0.01 * 3.919_206_388 * 2.0),
        };
        let s = cell_update(
            &left,
            &below,
            &[3.0],
            &[6.0],
            &golden_gates(),
            AnchorConvention::PrevTimeBoth,
        )
        .unwrap();
        assert!((s.m1[(0, 0)] - 0.25304).abs() < 5e-5);
        assert!((s.m2[(0, 0)] - 0.25142).abs() < 5e-5);
        let g1 = (0.08f64.exp() * 3.0 - 6.0) * 3.0;
        let g2 = (0.10f64.exp() * 3.0 - 6.0) * 3.0;
        assert_eq!(format!("{g1:.3}"), "-8.250");
        assert_eq!(format!("{g2:.3}"), "-8.053");
    }

    #[test]
    fn closed_gates_reset() {
        let s = cell_update(
            &scalar(0.7),
            &scalar(-0.3),
            &[1.0],
            &[2.0],
            &GateBundle::closed(),
            AnchorConvention::PerHeadPredecessor,
        )
        .unwrap();
        assert_eq!(s, HeadPair::zeros(1, 1));
    }

    #[test]
    fn cell_update_checks_shapes() {
        assert!(cell_update(
            &scalar(0.0),
            &scalar(0.0),
            &[1.0, 2.0],
            &[1.0],
            &golden_gates(),
            AnchorConvention::PrevTimeBoth
        )
        .is_err());
    }

    #[test]
    fn anchor_convention_parses() {
        for c in [
            AnchorConvention::PrevTimeBoth,
            AnchorConvention::PerHeadPredecessor,
        ] {
            assert_eq!(c.as_str().parse::<AnchorConvention>().unwrap(), c);
        }
        assert!("both".parse::<AnchorConvention>().is_err());
    }

    #[test]
    fn store_boundary_and_eviction() {
        let mut store = ColumnStore::new(2, 2, 0u32);
        store.put(1, 1, 11);
        store.put(2, 1, 21);
        store.put(1, 2, 12);
        assert_eq!(*store.get(0, 5), 0);
        assert_eq!(*store.get(2, 0), 0);
        assert_eq!(*store.get(2, 1), 21);
        store.put(1, 3, 13);
        assert_eq!(*store.get(1, 3), 13);
        let evicted = std::panic::catch_unwind(|| *store.get(1, 1));
        assert!(evicted.is_err());
    }

    #[test]
    fn boundary_row_and_column_expansion() {
        // First variate: head 2 only sees the zero boundary plus its own gradients.
        let x = SeriesTensor::from_columns(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let (proj, _) = init_projections(
            ModelDims::square(1, 1),
            0,
            InitMode::Identity {
                gate_biases: [0.0; 8],
            },
        );
        let traj = run_grid(
            &x,
            &proj,
            &GateSource::Fixed(golden_gates()),
            AnchorConvention::PrevTimeBoth,
        )
        .unwrap();
        let g12 = (0.02f64.exp() * 2.0 - 4.0) * 2.0;
        assert!((traj.get(0, 1).m2[(0, 0)] - (-0.02 * g12)).abs() < 1e-15);
        // First step of the second variate: head 1 sees only the boundary.
        assert!((traj.get(1, 0).m1[(0, 0)] - 0.08).abs() < 1e-15);
        assert_eq!(traj.initial(), &HeadPair::zeros(1, 1));
    }

    #[test]
    fn readout_examples() {
        let x = SeriesTensor::from_columns(&[vec![1.0, 2.0]]).unwrap();
        let (proj, _) = init_projections(
            ModelDims::square(1, 1),
            0,
            InitMode::Identity {
                gate_biases: [0.0; 8],
            },
        );
        let frozen = GateSource::Fixed(GateBundle::uniform(1.0, 0.0));
        let traj = run_grid(&x, &proj, &frozen, AnchorConvention::PrevTimeBoth).unwrap();
        let out = readout(
            &traj,
            &[vec![1.0], vec![1.0]],
            &Mat::identity(1),
            Head::First,
        )
        .unwrap();
        assert_eq!(out.values(), &[1.0, 1.0]);
        assert!(readout(&traj, &[vec![1.0]], &Mat::identity(1), Head::First).is_err());
    }

    #[test]
    fn grid_inputs_validation() {
        let g = golden_gates();
        assert!(GridInputs::new(
            1,
            2,
            vec![vec![1.0]; 2],
            vec![vec![1.0]; 2],
            vec![vec![1.0]; 2],
            vec![g; 2]
        )
        .is_ok());
        assert!(GridInputs::new(
            1,
            2,
            vec![vec![1.0]; 1],
            vec![vec![1.0]; 2],
            vec![vec![1.0]; 2],
            vec![g; 2]
        )
        .is_err());
        let bad = GateBundle { alpha: 1.5, ..g };
        assert!(matches!(
            GridInputs::new(
                1,
                1,
                vec![vec![1.0]],
                vec![vec![1.0]],
                vec![vec![1.0]],
                vec![bad]
            ),
            Err(Error::Contract(_))
        ));
    }
}
