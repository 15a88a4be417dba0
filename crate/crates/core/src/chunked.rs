//! Chunk-wise evaluation of the single-sequence recurrence.
//!
//! Within a chunk every gradient is taken at the frozen anchor, the last state
//! of the previous chunk (or the initial state for the first chunk):
//!
//! ```text
//! u_t = (exp(M̃_anchor) k_t − v_t) k_tᵀ,    M̃_t = α_t M̃_{t−1} − η_t u_t
//! ```
//!
//! Once the `u_t` are known the recurrence is linear, so it can be unrolled
//! into a weighted sum with decay coefficients from [`suffix_products`].
//! A chunk length of 1 reproduces the exact recurrence.

use crate::error::{Error, Result};
use crate::kernel::{suffix_products, Mat};
use crate::memory::{self, check_lengths, LogMemoryState, StepGates};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkSpec1D {
    pub chunk_len: usize,
}

impl ChunkSpec1D {
    pub fn new(chunk_len: usize) -> Result<Self> {
        if chunk_len == 0 {
            return Err(Error::Contract("chunk length must be at least 1".into()));
        }
        Ok(Self { chunk_len })
    }

    /// Number of chunks covering `steps`, the last possibly short.
    pub fn chunk_count(&self, steps: usize) -> usize {
        steps.div_ceil(self.chunk_len)
    }
}

/// Everything a chunk needs once its gradients are anchored.
#[derive(Clone, Debug)]
pub struct ChunkPrecompute1D {
    /// Anchored gradient per position.
    pub u: Vec<Mat>,
    pub alphas: Vec<f64>,
    /// Diagonal of the decay matrix: product of the retention gates after position `i`.
    pub decay: Vec<f64>,
    /// Diagonal of the rate matrix, `η_i`.
    pub rates: Vec<f64>,
}

impl ChunkPrecompute1D {
    pub fn new(u: Vec<Mat>, gates: &[StepGates]) -> Self {
        let alphas: Vec<f64> = gates.iter().map(|g| g.alpha).collect();
        Self {
            decay: suffix_products(&alphas),
            rates: gates.iter().map(|g| g.eta).collect(),
            alphas,
            u,
        }
    }

    /// Anchors every gradient of the chunk at `anchor`.
    pub fn anchored(
        anchor: &LogMemoryState,
        keys: &[Vec<f64>],
        vals: &[Vec<f64>],
        gates: &[StepGates],
    ) -> Result<Self> {
        let lin = anchor.linear();
        let u = keys
            .iter()
            .zip(vals)
            .map(|(k, v)| memory::grad(&lin, k, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(u, gates))
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Loop form: step the linear recurrence position by position.
    pub fn scan(&self, start: &Mat) -> Vec<Mat> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = start.clone();
        for ((u, a), e) in self.u.iter().zip(&self.alphas).zip(&self.rates) {
            let mut next = m.scaled(*a);
            next.add_scaled(-e, u);
            out.push(next.clone());
            m = next;
        }
        out
    }

    /// Closed form: position `t` is `(α_1…α_t) M̃_0 − Σ_{i≤t} (α_{i+1}…α_t) η_i u_i`.
    pub fn closed_form(&self, start: &Mat) -> Vec<Mat> {
        (0..self.len())
            .map(|t| {
                let prefix = &self.alphas[..=t];
                let decay = suffix_products(prefix);
                let mut m = start.scaled(decay[0] * prefix[0]);
                for i in 0..=t {
                    m.add_scaled(-decay[i] * self.rates[i], &self.u[i]);
                }
                m
            })
            .collect()
    }

    /// State at the end of the chunk, `(α_1…α_b) M̃_0 − A E U`, using the stored decay diagonal.
    pub fn final_state(&self, start: &Mat) -> Mat {
        let mut m = start.scaled(self.decay[0] * self.alphas[0]);
        for ((u, d), e) in self.u.iter().zip(&self.decay).zip(&self.rates) {
            m.add_scaled(-d * e, u);
        }
        m
    }
}

fn run_with(
    state0: &LogMemoryState,
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
    spec: ChunkSpec1D,
    closed: bool,
) -> Result<Vec<LogMemoryState>> {
    check_lengths(keys, vals, gates)?;
    if let Some(g) = gates
        .iter()
        .find(|g| !(0.0..=1.0).contains(&g.alpha) || !(g.eta >= 0.0))
    {
        return Err(Error::Contract(format!("gates out of range: {g:?}")));
    }
    let mut out: Vec<LogMemoryState> = Vec::with_capacity(keys.len());
    let mut anchor = state0.clone();
    for start in (0..keys.len()).step_by(spec.chunk_len) {
        let end = (start + spec.chunk_len).min(keys.len());
        let pre = ChunkPrecompute1D::anchored(
            &anchor,
            &keys[start..end],
            &vals[start..end],
            &gates[start..end],
        )?;
        let states = if closed {
            pre.closed_form(&anchor.mlog)
        } else {
            pre.scan(&anchor.mlog)
        };
        out.extend(states.into_iter().map(|mlog| LogMemoryState { mlog }));
        anchor = out.last().expect("non-empty chunk").clone();
    }
    Ok(out)
}

/// Chunked evaluation, loop form inside each chunk.
pub fn run_chunked(
    state0: &LogMemoryState,
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
    spec: ChunkSpec1D,
) -> Result<Vec<LogMemoryState>> {
    run_with(state0, keys, vals, gates, spec, false)
}

/// Chunked evaluation, unrolled weighted-sum form inside each chunk.
pub fn run_chunked_closed_form(
    state0: &LogMemoryState,
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
    spec: ChunkSpec1D,
) -> Result<Vec<LogMemoryState>> {
    run_with(state0, keys, vals, gates, spec, true)
}

/// Largest entrywise gap between chunked and exact states over the whole sequence,
/// both started from the zero log-state.
pub fn approximation_gap(
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
    chunk_len: usize,
) -> Result<f64> {
    let (Some(k), Some(v)) = (keys.first(), vals.first()) else {
        return Ok(0.0);
    };
    let s0 = LogMemoryState::zeros(v.len(), k.len());
    let exact = memory::run_sequence(&s0, keys, vals, gates)?;
    let chunked = run_chunked(&s0, keys, vals, gates, ChunkSpec1D::new(chunk_len)?)?;
    Ok(exact
        .iter()
        .zip(&chunked)
        .fold(0.0, |acc, (a, b)| acc.max(a.mlog.max_abs_diff(&b.mlog))))
}
