//! Exact sequential EGD memory for one sequence.
//!
//! The memory is a positive matrix `M` kept in the log domain `M̃ = log M`.
//! One step of exponentiated gradient descent on `‖M k − v‖²` with retention
//! gate `α` is
//!
//! ```text
//! M̃_t = α_t M̃_{t−1} − η_t (M_{t−1} k_t − v_t) k_tᵀ,   M_{t−1} = exp(M̃_{t−1})
//! ```
//!
//! which is additive in the log domain. `α = 0` resets `M̃` to zero, i.e. the
//! linear memory to all ones.

use crate::error::{dim_check, Error, Result};
use crate::kernel::{emap_exp, matvec, outer, Mat};

#[derive(Clone, Debug, PartialEq)]
pub struct LogMemoryState {
    pub mlog: Mat,
}

impl LogMemoryState {
    /// `M̃ = 0`, the all-ones linear memory.
    pub fn zeros(d_v: usize, d_k: usize) -> Self {
        Self {
            mlog: Mat::zeros(d_v, d_k),
        }
    }

    pub fn linear(&self) -> Mat {
        emap_exp(&self.mlog)
    }
}

/// Retention and learning rate of one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepGates {
    pub alpha: f64,
    pub eta: f64,
}

impl StepGates {
    pub fn new(alpha: f64, eta: f64) -> Self {
        Self { alpha, eta }
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(self.eta >= 0.0) {
            return Err(Error::Contract(format!(
                "gates out of range: alpha = {}, eta = {}",
                self.alpha, self.eta
            )));
        }
        Ok(())
    }
}

/// `‖exp(M̃) k − v‖²`.
pub fn loss(state: &LogMemoryState, k: &[f64], v: &[f64]) -> Result<f64> {
    let pred = matvec(&state.linear(), k)?;
    dim_check(pred.len() == v.len(), || {
        format!("memory has {} outputs, value has {}", pred.len(), v.len())
    })?;
    Ok(pred.iter().zip(v).map(|(p, y)| (p - y) * (p - y)).sum())
}

/// Gradient of the loss with respect to the linear memory, `(M k − v) kᵀ`.
pub fn grad(m_linear: &Mat, k: &[f64], v: &[f64]) -> Result<Mat> {
    let mut r = matvec(m_linear, k)?;
    dim_check(r.len() == v.len(), || {
        format!("memory has {} outputs, value has {}", r.len(), v.len())
    })?;
    for (ri, vi) in r.iter_mut().zip(v) {
        *ri -= vi;
    }
    Ok(outer(&r, k))
}

pub fn step(
    state: &LogMemoryState,
    k: &[f64],
    v: &[f64],
    gates: StepGates,
) -> Result<LogMemoryState> {
    gates.check()?;
    let g = grad(&state.linear(), k, v)?;
    let mut next = state.mlog.scaled(gates.alpha);
    next.add_scaled(-gates.eta, &g);
    Ok(LogMemoryState { mlog: next })
}

/// Runs the recurrence over a whole sequence and returns the state after every step.
pub fn run_sequence(
    state0: &LogMemoryState,
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
) -> Result<Vec<LogMemoryState>> {
    check_lengths(keys, vals, gates)?;
    let mut out = Vec::with_capacity(keys.len());
    let mut state = state0.clone();
    for ((k, v), g) in keys.iter().zip(vals).zip(gates) {
        state = step(&state, k, v, *g)?;
        out.push(state.clone());
    }
    Ok(out)
}

pub(crate) fn check_lengths(
    keys: &[Vec<f64>],
    vals: &[Vec<f64>],
    gates: &[StepGates],
) -> Result<()> {
    dim_check(
        keys.len() == vals.len() && keys.len() == gates.len(),
        || {
            format!(
                "sequence lengths differ: {} keys, {} values, {} gates",
                keys.len(),
                vals.len(),
                gates.len()
            )
        },
    )
}

/// `exp(M̃) q`.
pub fn retrieve(state: &LogMemoryState, q: &[f64]) -> Result<Vec<f64>> {
    matvec(&state.linear(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> LogMemoryState {
        LogMemoryState {
            mlog: Mat::filled(1, 1, x),
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&scalar(0.0), &[1.0], &[2.0]).unwrap(), 1.0);
        let s = LogMemoryState {
            mlog: Mat::from_rows(&[vec![0.1, -0.3], vec![0.2, 0.0]]).unwrap(),
        };
        let k = [0.7, -1.1];
        let v = matvec(&s.linear(), &k).unwrap();
        assert!(loss(&s, &k, &v).unwrap() <= 1e-30);
        assert!(loss(&s, &k, &[1.0]).is_err());
    }

    #[test]
    fn loss_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlog: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut want = 0.0;
        for i in 0..3 {
            let mut p = 0.0;
            for j in 0..3 {
                p += mlog[3 * i + j].exp() * k[j];
            }
            want += (p - v[i]).powi(2);
        }
        let s = LogMemoryState {
            mlog: Mat::from_vec(3, 3, mlog).unwrap(),
        };
        assert!((loss(&s, &k, &v).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn grad_examples() {
        let g = grad(&Mat::filled(1, 1, 1.0), &[1.0], &[2.0]).unwrap();
        assert_eq!(g[(0, 0)], -1.0);
        let m = Mat::filled(1, 1, 0.02f64.exp());
        let g = grad(&m, &[2.0], &[4.0]).unwrap();
        assert_eq!(format!("{:.3}", g[(0, 0)]), "-3.919");
    }

    #[test]
    fn single_step_from_zero() {
        let s = step(&scalar(0.0), &[1.0], &[2.0], StepGates::new(1.0, 0.02)).unwrap();
        assert!((s.mlog[(0, 0)] - 0.02).abs() <= 1e-15);
        assert_eq!(format!("{:.3}", s.linear()[(0, 0)]), "1.020");
    }

    #[test]
    fn no_op_and_erase() {
        let s0 = scalar(0.37);
        let same = step(&s0, &[1.5], &[-2.0], StepGates::new(1.0, 0.0)).unwrap();
        assert_eq!(same, s0);
        let erased = step(&s0, &[1.5], &[-2.0], StepGates::new(0.0, 0.0)).unwrap();
        assert_eq!(erased.mlog[(0, 0)], 0.0);
        assert_eq!(erased.linear()[(0, 0)], 1.0);
    }

    #[test]
    fn step_rejects_out_of_range_gates() {
        assert!(step(&scalar(0.0), &[1.0], &[1.0], StepGates::new(1.5, 0.1)).is_err());
        assert!(step(&scalar(0.0), &[1.0], &[1.0], StepGates::new(0.5, -0.1)).is_err());
    }

    #[test]
    fn run_sequence_lengths() {
        let s0 = scalar(0.0);
        let one = run_sequence(
            &s0,
            &[vec![1.0]],
            &[vec![2.0]],
            &[StepGates::new(1.0, 0.02)],
        )
        .unwrap();
        assert_eq!(
            one[0],
            step(&s0, &[1.0], &[2.0], StepGates::new(1.0, 0.02)).unwrap()
        );
        assert!(run_sequence(&s0, &[vec![1.0]], &[], &[]).is_err());
    }

    #[test]
    fn first_order_drift_for_small_rates() {
        // With α = 1 the state moves by −η·g per step; for tiny η the memory
        // barely changes so g stays ≈ g(M̃_0).
        let s0 = LogMemoryState {
            mlog: Mat::from_rows(&[vec![0.1, -0.2], vec![0.0, 0.3]]).unwrap(),
        };
        let k = vec![0.5, -1.0];
        let v = vec![1.0, 0.25];
        let eta = 1e-6;
        let t = 50;
        let states = run_sequence(
            &s0,
            &vec![k.clone(); t],
            &vec![v.clone(); t],
            &vec![StepGates::new(1.0, eta); t],
        )
        .unwrap();
        let mut want = s0.mlog.clone();
        want.add_scaled(-(t as f64) * eta, &grad(&s0.linear(), &k, &v).unwrap());
        let bound = 10.0 * eta * eta * (t * t) as f64;
        assert!(states[t - 1].mlog.max_abs_diff(&want) <= bound);
    }

    #[test]
    fn memorises_a_single_association() {
        let mut state = LogMemoryState::zeros(2, 2);
        let (k, v) = ([1.0, 0.0], [5.0, 0.0]);
        let mut prev = loss(&state, &k, &v).unwrap();
        for _ in 0..200 {
            state = step(&state, &k, &v, StepGates::new(1.0, 0.1)).unwrap();
            let now = loss(&state, &k, &v).unwrap();
            assert!(now <= prev + 1e-12);
            prev = now;
        }
        assert!((retrieve(&state, &[1.0, 0.0]).unwrap()[0] - 5.0).abs() < 1e-2);
    }

    #[test]
    fn retrieve_examples() {
        assert_eq!(retrieve(&scalar(0.0), &[3.0]).unwrap(), vec![3.0]);
        assert!(retrieve(&scalar(0.0), &[3.0, 1.0]).is_err());
    }
}
