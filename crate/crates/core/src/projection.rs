//! Key/value/query projections and the input-dependent gate scalars.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_check, Result};
use crate::kernel::{matvec, Mat};

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSet {
    pub w_k: Mat,
    pub w_v: Mat,
    pub w_q: Mat,
    /// Readout applied to the retrieved value, `d_out × d_v`.
    pub w_out: Mat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kvq {
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl ProjectionSet {
    pub fn d_in(&self) -> usize {
        self.w_k.cols()
    }

    pub fn d_k(&self) -> usize {
        self.w_k.rows()
    }

    pub fn d_v(&self) -> usize {
        self.w_v.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d_in = self.d_in();
        dim_check(self.w_v.cols() == d_in && self.w_q.cols() == d_in, || {
            "projections disagree on d_in".into()
        })?;
        dim_check(self.w_q.rows() == self.d_k(), || {
            "query and key projections disagree on d_k".into()
        })?;
        dim_check(self.w_out.cols() == self.d_v(), || {
            "readout does not match d_v".into()
        })
    }

    /// Plain-text `name[i,j] = value` dump of every weight.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (name, m) in [
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_q", &self.w_q),
            ("w_out", &self.w_out),
        ] {
            dump_mat(&mut out, name, m);
        }
        out
    }
}

fn dump_mat(out: &mut String, name: &str, m: &Mat) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let _ = writeln!(out, "{name}[{i},{j}] = {:?}", m[(i, j)]);
        }
    }
}

pub fn project_kvq(p: &ProjectionSet, x: &[f64]) -> Result<Kvq> {
    Ok(Kvq {
        k: matvec(&p.w_k, x)?,
        v: matvec(&p.w_v, x)?,
        q: matvec(&p.w_q, x)?,
    })
}

/// The eight gate scalars of one cell.
///
/// `alpha`, `beta`, `theta`, `mu` are retention gates in `[0, 1]`;
/// `eta`, `gamma`, `lambda`, `omega` are non-negative learning rates.
/// The single-sequence recurrence uses only `alpha` and `eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateBundle {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub mu: f64,
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub omega: f64,
}

impl GateBundle {
    /// All retention gates equal to `retain`, all rates equal to `rate`.
    pub fn uniform(retain: f64, rate: f64) -> Self {
        Self {
            alpha: retain,
            beta: retain,
            theta: retain,
            mu: retain,
            eta: rate,
            gamma: rate,
            lambda: rate,
            omega: rate,
        }
    }

    /// Only the single-sequence gates set; every cross term is closed.
    pub fn one_dimensional(alpha: f64, eta: f64) -> Self {
        Self {
            alpha,
            eta,
            ..Self::closed()
        }
    }

    pub fn closed() -> Self {
        Self::uniform(0.0, 0.0)
    }

    pub fn retention(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.theta, self.mu]
    }

    pub fn rates(&self) -> [f64; 4] {
        [self.eta, self.gamma, self.lambda, self.omega]
    }

    pub fn is_valid(&self) -> bool {
        self.retention().iter().all(|g| (0.0..=1.0).contains(g))
            && self.rates().iter().all(|r| *r >= 0.0 && r.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateName {
    Alpha,
    Beta,
    Theta,
    Mu,
    Eta,
    Gamma,
    Lambda,
    Omega,
}

impl GateName {
    pub const ALL: [GateName; 8] = [
        GateName::Alpha,
        GateName::Beta,
        GateName::Theta,
        GateName::Mu,
        GateName::Eta,
        GateName::Gamma,
        GateName::Lambda,
        GateName::Omega,
    ];

    pub fn is_retention(self) -> bool {
        matches!(
            self,
            GateName::Alpha | GateName::Beta | GateName::Theta | GateName::Mu
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateName::Alpha => "alpha",
            GateName::Beta => "beta",
            GateName::Theta => "theta",
            GateName::Mu => "mu",
            GateName::Eta => "eta",
            GateName::Gamma => "gamma",
            GateName::Lambda => "lambda",
            GateName::Omega => "omega",
        }
    }
}

/// One linear map `w·x + b` per gate, in [`GateName::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct GateProjection {
    pub weights: [Vec<f64>; 8],
    pub biases: [f64; 8],
}

impl GateProjection {
    pub fn zeros(d_in: usize) -> Self {
        Self {
            weights: std::array::from_fn(|_| vec![0.0; d_in]),
            biases: [0.0; 8],
        }
    }

    pub fn d_in(&self) -> usize {
        self.weights[0].len()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (g, (w, b)) in GateName::ALL
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
        {
            for (j, x) in w.iter().enumerate() {
                let _ = writeln!(out, "w_{}[{j}] = {x:?}", g.as_str());
            }
            let _ = writeln!(out, "b_{} = {b:?}", g.as_str());
        }
        out
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Retention gates go through the logistic, rates through softplus, so the
/// bundle is always in range.
pub fn compute_gates(gp: &GateProjection, x: &[f64]) -> Result<GateBundle> {
    dim_check(gp.d_in() == x.len(), || {
        format!(
            "gate weights of length {} for input of length {}",
            gp.d_in(),
            x.len()
        )
    })?;
    let pre: Vec<f64> = gp
        .weights
        .iter()
        .zip(&gp.biases)
        .map(|(w, b)| crate::kernel::dot(w, x) + b)
        .collect();
    let squash = |i: usize| {
        if GateName::ALL[i].is_retention() {
            logistic(pre[i])
        } else {
            softplus(pre[i])
        }
    };
    Ok(GateBundle {
        alpha: squash(0),
        beta: squash(1),
        theta: squash(2),
        mu: squash(3),
        eta: squash(4),
        gamma: squash(5),
        lambda: squash(6),
        omega: squash(7),
    })
}

/// Where the per-cell gates come from.
#[derive(Clone, Debug)]
pub enum GateSource {
    /// Input-dependent gates from linear maps.
    Projected(GateProjection),
    /// The same constants everywhere, independent of the input.
    Fixed(GateBundle),
    /// Explicit gates per cell, indexed `v * steps + t`.
    PerCell(Vec<GateBundle>),
}

impl GateSource {
    /// Gates of cell number `cell` (row-major over variates then steps) with input `x`.
    pub fn gates_at(&self, cell: usize, x: &[f64]) -> Result<GateBundle> {
        match self {
            GateSource::Projected(gp) => compute_gates(gp, x),
            GateSource::Fixed(g) => Ok(*g),
            GateSource::PerCell(all) => all.get(cell).copied().ok_or_else(|| {
                crate::Error::Dimension(format!("no gates for cell {cell} of {}", all.len()))
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelDims {
    pub d_in: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub d_out: usize,
}

impl ModelDims {
    pub fn square(d_in: usize, d: usize) -> Self {
        Self {
            d_in,
            d_k: d,
            d_v: d,
            d_out: d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitMode {
    /// Uniform weights in `[-1/√d_in, 1/√d_in]`.
    Uniform,
    /// `w_k = w_q = I`, `w_v = 2I`, `w_out = I`, zero gate weights with the given biases.
    Identity { gate_biases: [f64; 8] },
}

pub fn init_projections(
    dims: ModelDims,
    seed: u64,
    mode: InitMode,
) -> (ProjectionSet, GateProjection) {
    let ModelDims {
        d_in,
        d_k,
        d_v,
        d_out,
    } = dims;
    match mode {
        InitMode::Identity { gate_biases } => {
            let eye = |r: usize, c: usize, s: f64| {
                let mut m = Mat::zeros(r, c);
                for i in 0..r.min(c) {
                    m[(i, i)] = s;
                }
                m
            };
            let proj = ProjectionSet {
                w_k: eye(d_k, d_in, 1.0),
                w_v: eye(d_v, d_in, 2.0),
                w_q: eye(d_k, d_in, 1.0),
                w_out: eye(d_out, d_v, 1.0),
            };
            let mut gates = GateProjection::zeros(d_in);
            gates.biases = gate_biases;
            (proj, gates)
        }
        InitMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bound = 1.0 / (d_in as f64).sqrt();
            let mut draw = |r: usize, c: usize, bound: f64| {
                let data = (0..r * c)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Mat::from_vec(r, c, data).expect("positive dims")
            };
            let proj = ProjectionSet {
                w_k: draw(d_k, d_in, bound),
                w_v: draw(d_v, d_in, bound),
                w_q: draw(d_k, d_in, bound),
                w_out: draw(d_out, d_v, 1.0 / (d_v as f64).sqrt()),
            };
            let mut gates = GateProjection::zeros(d_in);
            for w in gates.weights.iter_mut() {
                *w = draw(1, d_in, bound).data().to_vec();
            }
            (proj, gates)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_1d() -> ProjectionSet {
        init_projections(
            ModelDims::square(1, 1),
            0,
            InitMode::Identity {
                gate_biases: [0.0; 8],
            },
        )
        .0
    }

    #[test]
    fn identity_projections() {
        let p = ProjectionSet {
            w_v: Mat::identity(1),
            ..identity_1d()
        };
        let kvq = project_kvq(&p, &[2.0]).unwrap();
        assert_eq!((kvq.k, kvq.v, kvq.q), (vec![2.0], vec![2.0], vec![2.0]));
    }

    #[test]
    fn identity_init_doubles_values() {
        let p = identity_1d();
        assert_eq!(p.w_k, Mat::identity(1));
        assert_eq!(p.w_v, Mat::filled(1, 1, 2.0));
        let kvq = project_kvq(&p, &[3.0]).unwrap();
        assert_eq!((kvq.k, kvq.v), (vec![3.0], vec![6.0]));
        assert!(p.validate().is_ok());
    }

    #[test]
    fn project_rejects_bad_input() {
        assert!(project_kvq(&identity_1d(), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn neutral_gates() {
        let g = compute_gates(&GateProjection::zeros(3), &[1.0, -2.0, 0.5]).unwrap();
        for r in g.retention() {
            assert_eq!(r, 0.5);
        }
        for r in g.rates() {
            assert!((r - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_retention() {
        let mut gp = GateProjection::zeros(2);
        gp.biases = [20.0; 8];
        let g = compute_gates(&gp, &[0.0, 0.0]).unwrap();
        for r in g.retention() {
            assert!((1.0 - r).abs() < 1e-8);
        }
        assert!((g.eta - 20.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_override_ignores_input() {
        let fixed = GateBundle {
            alpha: 0.5,
            beta: 0.5,
            theta: 0.5,
            mu: 0.5,
            eta: 0.01,
            gamma: 0.01,
            lambda: 0.01,
            omega: 0.01,
        };
        let src = GateSource::Fixed(fixed);
        assert_eq!(src.gates_at(0, &[1.0]).unwrap(), fixed);
        assert_eq!(src.gates_at(41, &[-300.0]).unwrap(), fixed);
        assert_eq!(fixed, GateBundle::uniform(0.5, 0.01));
        assert!(GateSource::PerCell(vec![fixed])
            .gates_at(1, &[0.0])
            .is_err());
    }

    #[test]
    fn uniform_init_is_seeded() {
        let dims = ModelDims::square(4, 3);
        let a = init_projections(dims, 17, InitMode::Uniform);
        let b = init_projections(dims, 17, InitMode::Uniform);
        assert_eq!(a, b);
        let bound = 0.5;
        assert!(a.0.w_k.data().iter().all(|x| x.abs() <= bound));
        for s in 0..100u64 {
            let x = init_projections(dims, s, InitMode::Uniform);
            let y = init_projections(dims, s + 1000, InitMode::Uniform);
            assert_ne!(x.0.w_k, y.0.w_k);
        }
    }

    #[test]
    fn dump_lists_every_weight() {
        let (p, g) = init_projections(ModelDims::square(2, 2), 1, InitMode::Uniform);
        assert_eq!(p.dump().lines().count(), 4 * 4);
        assert_eq!(g.dump().lines().count(), 8 * 3);
        assert!(g.dump().contains("b_omega = "));
    }

    proptest::proptest! {
        #[test]
        fn gates_always_in_range(
            x in proptest::collection::vec(-1e3f64..1e3, 3),
            w in proptest::collection::vec(-10.0f64..10.0, 24),
            b in proptest::collection::vec(-50.0f64..50.0, 8),
        ) {
            let gp = GateProjection {
                weights: std::array::from_fn(|i| w[3 * i..3 * i + 3].to_vec()),
                biases: std::array::from_fn(|i| b[i]),
            };
            proptest::prop_assert!(compute_gates(&gp, &x).unwrap().is_valid());
        }

        #[test]
        fn projection_is_linear(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            seed in 0u64..1000,
        ) {
            let (p, _) = init_projections(ModelDims::square(3, 4), seed, InitMode::Uniform);
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let (a, b, c) = (project_kvq(&p, &x).unwrap(), project_kvq(&p, &y).unwrap(), project_kvq(&p, &xy).unwrap());
            for i in 0..4 {
                proptest::prop_assert!((c.k[i] - a.k[i] - b.k[i]).abs() <= 1e-12);
                proptest::prop_assert!((c.v[i] - a.v[i] - b.v[i]).abs() <= 1e-12);
                proptest::prop_assert!((c.q[i] - a.q[i] - b.q[i]).abs() <= 1e-12);
            }
        }
    }
}
