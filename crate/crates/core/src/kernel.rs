//! Dense row-major real matrices and the handful of kernels the recurrences need.
//!
//! Everything is `f64`. Products sum left to right so results are reproducible
//! bit-for-bit on a given platform.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{dim_check, Error, Result};

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        dim_check(data.len() == rows * cols, || {
            format!("{} values for a {rows}x{cols} matrix", data.len())
        })?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        dim_check(rows.iter().all(|row| row.len() == c), || {
            "ragged rows".to_string()
        })?;
        Self::from_vec(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|x| s * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `self += a ⊗ b`, the rank-1 update `a bᵀ`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        assert_eq!((a.len(), b.len()), self.shape());
        for (row, &ai) in self.data.chunks_mut(self.cols).zip(a) {
            for (x, &bj) in row.iter_mut().zip(b) {
                *x += ai * bj;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}", self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols)).finish()
    }
}

/// Matrix-vector product `m·x`.
pub fn matvec(m: &Mat, x: &[f64]) -> Result<Vec<f64>> {
    dim_check(m.cols == x.len(), || {
        format!(
            "matvec of {}x{} with vector of length {}",
            m.rows,
            m.cols,
            x.len()
        )
    })?;
    let mut out = vec![0.0; m.rows];
    matvec_into(m, x, &mut out);
    Ok(out)
}

pub(crate) fn matvec_into(m: &Mat, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.data.chunks(m.cols)) {
        *o = dot(row, x);
    }
}

pub(crate) fn residual_into(m: &Mat, x: &[f64], y: &[f64], out: &mut [f64]) {
    matvec_into(m, x, out);
    for (o, &yi) in out.iter_mut().zip(y) {
        *o -= yi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (&x, &y) in ra.iter().zip(rb) {
        acc += x * y;
    }
    acc
}

/// Outer product `a bᵀ`.
pub fn outer(a: &[f64], b: &[f64]) -> Mat {
    let mut m = Mat::zeros(a.len(), b.len());
    m.add_outer(a, b);
    m
}

pub fn emap_exp(m: &Mat) -> Mat {
    m.map(f64::exp)
}

pub fn emap_log(m: &Mat) -> Result<Mat> {
    if let Some(bad) = m.data.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("log of non-positive entry {bad}")));
    }
    Ok(m.map(f64::ln))
}

/// `out[i] = g[i+1] * ... * g[n-1]`, with the empty product at the end equal to 1.
///
/// These are the decay ratios multiplying the `i`-th forcing term when a gated
/// linear recurrence is unrolled to its last position.
pub fn suffix_products(g: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; g.len()];
    for i in (0..g.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * g[i + 1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
        Mat::from_vec(
            r,
            c,
            (0..r * c)
                .map(|_| rng.random_range(-scale..scale))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn matvec_identity_and_scalar() {
        assert_eq!(
            matvec(&Mat::identity(2), &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert_eq!(matvec(&Mat::filled(1, 1, 1.0), &[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn matvec_rejects_bad_dims() {
        assert!(matches!(
            matvec(&Mat::zeros(2, 3), &[1.0, 2.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn matvec_and_outer_match_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.random_range(1..=16);
            let c = rng.random_range(1..=16);
            let m = random_mat(&mut rng, r, c, 2.0);
            let x: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = matvec(&m, &x).unwrap();
            for i in 0..r {
                let mut want = 0.0;
                for j in 0..c {
                    want += m.data()[i * c + j] * x[j];
                }
                assert!((got[i] - want).abs() <= 1e-12);
            }
            let a: Vec<f64> = (0..r).map(|_| rng.random_range(-2.0..2.0)).collect();
            let o = outer(&a, &x);
            for i in 0..r {
                for j in 0..c {
                    assert!((o[(i, j)] - a[i] * x[j]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn outer_examples() {
        let o = outer(&[1.0, 0.0], &[0.0, 1.0]);
        assert_eq!(o.to_rows(), vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(outer(&[-1.0], &[1.0])[(0, 0)], -1.0);
    }

    #[test]
    fn exp_log_examples() {
        assert_eq!(emap_exp(&Mat::zeros(2, 3)), Mat::filled(2, 3, 1.0));
        let m = emap_exp(&Mat::filled(1, 1, 0.02));
        assert_eq!(format!("{:.3}", m[(0, 0)]), "1.020");
        assert!(matches!(
            emap_log(&Mat::from_rows(&[vec![1.0, 0.0]]).unwrap()),
            Err(Error::Domain(_))
        ));
        assert!(emap_log(&Mat::filled(1, 1, -2.0)).is_err());
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_mat(&mut rng, 7, 5, 30.0);
        let back = emap_log(&emap_exp(&m)).unwrap();
        assert!(back.max_abs_diff(&m) <= 1e-12);
        let p = random_mat(&mut rng, 4, 4, 5.0).map(|x| x.abs() + 1e-3);
        assert!(emap_exp(&emap_log(&p).unwrap()).max_abs_diff(&p) <= 1e-12);
    }

    #[test]
    fn residual_and_dot_match_scalar_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cols in [1, 3, 4, 7, 9] {
            let m = random_mat(&mut rng, 3, cols, 1.0);
            let x: Vec<f64> = (0..cols).map(|j| 0.5 - j as f64 * 0.3).collect();
            let y = [1.0, 2.0, 3.0];
            let mut got = [0.0; 3];
            residual_into(&m, &x, &y, &mut got);
            for i in 0..3 {
                let mut want = -y[i];
                for j in 0..cols {
                    want += m[(i, j)] * x[j];
                }
                assert!((got[i] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn suffix_product_examples() {
        assert_eq!(suffix_products(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(suffix_products(&[0.5, 0.5]), vec![0.5, 1.0]);
        assert_eq!(suffix_products(&[0.3]), vec![1.0]);
    }

    #[test]
    fn suffix_products_match_quadratic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..2.0)).collect();
        let got = suffix_products(&g);
        for i in 0..g.len() {
            let mut want = 1.0;
            for x in &g[i + 1..] {
                want *= x;
            }
            assert!((got[i] - want).abs() <= 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn exp_is_strictly_positive(xs in proptest::collection::vec(-700.0f64..700.0, 1..32)) {
            let n = xs.len();
            let m = Mat::from_vec(1, n, xs).unwrap();
            proptest::prop_assert!(emap_exp(&m).data().iter().all(|&x| x > 0.0));
        }

        #[test]
        fn suffix_products_chain(g in proptest::collection::vec(0.01f64..1.5, 1..24)) {
            let s = suffix_products(&g);
            proptest::prop_assert_eq!(s[g.len() - 1], 1.0);
            for i in 1..g.len() {
                proptest::prop_assert!((s[i] * g[i] - s[i - 1]).abs() <= 1e-12);
            }
        }
    }
}
