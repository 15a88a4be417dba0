//! Multivariate series container, CSV ingestion and seeded SAR generators.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Values indexed by `(variate, step, feature)`, all zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTensor {
    variates: usize,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SeriesTensor {
    pub fn new(variates: usize, steps: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if variates == 0 || steps == 0 || dim == 0 {
            return Err(Error::Contract(format!(
                "series shape must be positive, got {variates}x{steps}x{dim}"
            )));
        }
        if values.len() != variates * steps * dim {
            return Err(Error::Dimension(format!(
                "{} values for a {variates}x{steps}x{dim} series",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("series values must be finite".into()));
        }
        Ok(Self {
            variates,
            steps,
            dim,
            values,
        })
    }

    /// Single-feature series from one vector per variate.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let steps = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != steps) {
            return Err(Error::Dimension("variates have different lengths".into()));
        }
        Self::new(columns.len(), steps, 1, columns.concat())
    }

    pub fn variates(&self) -> usize {
        self.variates
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, v: usize, t: usize, f: usize) -> f64 {
        assert!(
            v < self.variates && t < self.steps && f < self.dim,
            "index out of range"
        );
        self.values[(v * self.steps + t) * self.dim + f]
    }

    /// Feature vector `x_{v,t}`.
    pub fn input(&self, v: usize, t: usize) -> &[f64] {
        assert!(v < self.variates && t < self.steps, "index out of range");
        let start = (v * self.steps + t) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// First feature of variate `v` across all steps.
    pub fn column(&self, v: usize) -> Vec<f64> {
        (0..self.steps).map(|t| self.get(v, t, 0)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.variates).map(|v| self.column(v)).collect()
    }

    /// Steps `start..start + len` of every variate.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.steps {
            return Err(Error::Contract(format!(
                "window {start}..{} outside 0..{}",
                start + len,
                self.steps
            )));
        }
        let mut values = Vec::with_capacity(self.variates * len * self.dim);
        for v in 0..self.variates {
            let from = (v * self.steps + start) * self.dim;
            values.extend_from_slice(&self.values[from..from + len * self.dim]);
        }
        Self::new(self.variates, len, self.dim, values)
    }
}

/// Context length `L` and horizon `H` of a forecasting task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForecastTask {
    pub context_len: usize,
    pub horizon: usize,
}

/// Splits the trailing `L + H` steps into context and target.
pub fn split_task(x: &SeriesTensor, task: ForecastTask) -> Result<(SeriesTensor, SeriesTensor)> {
    let ForecastTask {
        context_len,
        horizon,
    } = task;
    if context_len == 0 || horizon == 0 {
        return Err(Error::Contract(
            "context length and horizon must be positive".into(),
        ));
    }
    if context_len + horizon > x.steps() {
        return Err(Error::Contract(format!(
            "context {context_len} + horizon {horizon} exceeds {} steps",
            x.steps()
        )));
    }
    let start = x.steps() - context_len - horizon;
    Ok((
        x.window(start, context_len)?,
        x.window(start + context_len, horizon)?,
    ))
}

/// Reads a wide CSV: header row, one column per variate, one row per step.
/// With `time_col` the first column is skipped.
pub fn read_csv<R: Read>(reader: R, time_col: bool) -> Result<SeriesTensor> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::Parse {
            line: 1,
            msg: "missing header row".into(),
        });
    }
    let skip = usize::from(time_col);
    let variates = header.len().saturating_sub(skip);
    if variates == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no value columns".into(),
        });
    }
    let mut columns = vec![Vec::new(); variates];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (v, cell) in record.iter().skip(skip).enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric cell {cell:?} in column {}", v + skip + 1),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite cell {cell:?}"),
                });
            }
            columns[v].push(x);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    SeriesTensor::from_columns(&columns)
}

pub fn load_csv(path: impl AsRef<Path>, time_col: bool) -> Result<SeriesTensor> {
    read_csv(std::fs::File::open(path)?, time_col)
}

/// Writes the first feature of every variate as a wide CSV with a leading `time` column.
pub fn write_csv<W: Write>(x: &SeriesTensor, mut out: W) -> Result<()> {
    let names: Vec<String> = (0..x.variates()).map(|v| format!("v{v}")).collect();
    writeln!(out, "time,{}", names.join(","))?;
    for t in 0..x.steps() {
        let row: Vec<String> = (0..x.variates())
            .map(|v| format!("{:?}", x.get(v, t, 0)))
            .collect();
        writeln!(out, "{t},{}", row.join(","))?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Parse {
            line,
            msg: e.to_string(),
        },
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            line,
            msg: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        _ => Error::Parse {
            line,
            msg: e.to_string(),
        },
    }
}

/// Seasonal autoregressive process
/// `x_k = Σ_i φ_i x_{k-i} + Σ_j η_j x_{k-j·s} + σ ε_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SarParams {
    pub phi: Vec<f64>,
    /// Seasonal coefficients (not the memory learning rate).
    pub eta_seasonal: Vec<f64>,
    pub s: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Explicit starting values replacing the noise burn-in; length must equal
    /// [`SarParams::burn_in`].
    pub init: Option<Vec<f64>>,
}

impl SarParams {
    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn q(&self) -> usize {
        self.eta_seasonal.len()
    }

    pub fn burn_in(&self) -> usize {
        self.p().max(self.q() * self.s)
    }
}

const DIVERGENCE_LIMIT: f64 = 1e12;

/// Generates `variates` independent SAR paths of `steps` values each.
///
/// Variate `v` draws from ChaCha stream `v` of the seeded generator, so adding
/// variates never changes the existing ones.
pub fn generate_sar(params: &SarParams, variates: usize, steps: usize) -> Result<SeriesTensor> {
    if params.s == 0 {
        return Err(Error::Contract("seasonal period must be at least 1".into()));
    }
    if !(params.noise_std >= 0.0) {
        return Err(Error::Contract("noise_std must be non-negative".into()));
    }
    let burn = params.burn_in();
    if steps <= burn {
        return Err(Error::Contract(format!(
            "need more than {burn} steps for the burn-in, got {steps}"
        )));
    }
    if let Some(init) = &params.init {
        if init.len() != burn {
            return Err(Error::Contract(format!(
                "deterministic init needs {burn} values, got {}",
                init.len()
            )));
        }
    }
    let mut columns = Vec::with_capacity(variates);
    for v in 0..variates {
        let mut rng = variate_rng(params.seed, v);
        let mut noise = || -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            params.noise_std * z
        };
        let mut x = Vec::with_capacity(steps);
        match &params.init {
            Some(init) => x.extend_from_slice(init),
            None => x.extend((0..burn).map(|_| noise())),
        }
        for k in burn..steps {
            let mut value = 0.0;
            for (i, phi) in params.phi.iter().enumerate() {
                value += phi * x[k - 1 - i];
            }
            for (j, eta) in params.eta_seasonal.iter().enumerate() {
                value += eta * x[k - (j + 1) * params.s];
            }
            value += noise();
            if !(value.abs() <= DIVERGENCE_LIMIT) {
                return Err(Error::Diverged {
                    variate: v,
                    step: k,
                    value,
                });
            }
            x.push(value);
        }
        columns.push(x);
    }
    SeriesTensor::from_columns(&columns)
}

/// Generator for variate `v`: the seed selects the key, the variate the stream.
pub fn variate_rng(seed: u64, v: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(v as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(phi: Vec<f64>, eta: Vec<f64>, s: usize, init: Vec<f64>) -> SarParams {
        SarParams {
            phi,
            eta_seasonal: eta,
            s,
            noise_std: 0.0,
            seed: 0,
            init: Some(init),
        }
    }

    #[test]
    fn csv_basic_shape() {
        let x = read_csv("a,b\n1,2\n3,4\n5,6\n".as_bytes(), false).unwrap();
        assert_eq!((x.variates(), x.steps(), x.dim()), (2, 3, 1));
        assert_eq!(x.column(1), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn csv_time_column_skipped() {
        let x = read_csv("time,a,b\n0,1,2\n1,3,4\n".as_bytes(), true).unwrap();
        assert_eq!(x.variates(), 2);
        assert_eq!(x.column(0), vec![1.0, 3.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        assert!(matches!(
            read_csv("".as_bytes(), false),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_csv("a,b\n".as_bytes(), false),
            Err(Error::Parse { .. })
        ));
        match read_csv("a,b\n1,2\n3,x\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_csv("a,b\n1,2\n3\n".as_bytes(), false) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("ragged"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_roundtrip_through_writer() {
        let x = SeriesTensor::from_columns(&[vec![1.5, -2.25, 1e-7], vec![0.1, 0.2, 0.3]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&x, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), true).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn ar1_geometric_decay() {
        let x = generate_sar(&noiseless(vec![0.5], vec![], 1, vec![1.0]), 1, 20).unwrap();
        for (k, value) in x.column(0).iter().enumerate() {
            assert!((value - 0.5f64.powi(k as i32)).abs() <= 1e-15);
        }
    }

    #[test]
    fn pure_seasonal_copy_repeats() {
        let x = generate_sar(
            &noiseless(vec![], vec![1.0], 3, vec![4.0, -1.0, 2.5]),
            2,
            30,
        )
        .unwrap();
        for v in 0..2 {
            let c = x.column(v);
            for k in 3..30 {
                assert_eq!(c[k], c[k - 3]);
            }
        }
    }

    #[test]
    fn noiseless_paths_satisfy_the_recurrence() {
        let p = noiseless(vec![0.6, 0.2], vec![0.15], 4, vec![1.0, -0.5, 0.25, 2.0]);
        let c = generate_sar(&p, 1, 80).unwrap().column(0);
        for k in p.burn_in()..c.len() {
            let r = c[k] - 0.6 * c[k - 1] - 0.2 * c[k - 2] - 0.15 * c[k - 4];
            assert!(r.abs() <= 1e-12);
        }
    }

    #[test]
    fn generator_is_reproducible_and_variates_are_independent_streams() {
        let p = SarParams {
            phi: vec![0.5],
            eta_seasonal: vec![0.2],
            s: 5,
            noise_std: 1.0,
            seed: 9,
            init: None,
        };
        let a = generate_sar(&p, 3, 50).unwrap();
        let b = generate_sar(&p, 3, 50).unwrap();
        assert_eq!(a.values(), b.values());
        let wider = generate_sar(&p, 5, 50).unwrap();
        for v in 0..3 {
            assert_eq!(wider.column(v), a.column(v));
        }
        assert_ne!(a.column(0), a.column(1));
    }

    #[test]
    fn generator_rejects_short_series_and_divergence() {
        let p = SarParams {
            phi: vec![],
            eta_seasonal: vec![0.5],
            s: 12,
            noise_std: 1.0,
            seed: 1,
            init: None,
        };
        assert!(matches!(generate_sar(&p, 1, 12), Err(Error::Contract(_))));
        let explosive = SarParams {
            phi: vec![3.0],
            eta_seasonal: vec![],
            s: 1,
            noise_std: 1.0,
            seed: 1,
            init: None,
        };
        assert!(matches!(
            generate_sar(&explosive, 1, 200),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn split_task_windows() {
        let x = SeriesTensor::from_columns(&[(0..10).map(f64::from).collect()]).unwrap();
        let task = ForecastTask {
            context_len: 6,
            horizon: 4,
        };
        let (ctx, tgt) = split_task(&x, task).unwrap();
        assert_eq!(ctx.column(0), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(tgt.column(0), vec![6.0, 7.0, 8.0, 9.0]);
        let zero_h = ForecastTask {
            context_len: 6,
            horizon: 0,
        };
        assert!(matches!(split_task(&x, zero_h), Err(Error::Contract(_))));
        let too_long = ForecastTask {
            context_len: 8,
            horizon: 3,
        };
        assert!(matches!(split_task(&x, too_long), Err(Error::Contract(_))));
    }

    proptest::proptest! {
        #[test]
        fn split_reconstructs_trailing_window(
            cols in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 12), 1..4),
            l in 1usize..8,
            h in 1usize..5,
        ) {
            let x = SeriesTensor::from_columns(&cols).unwrap();
            let (ctx, tgt) = split_task(&x, ForecastTask { context_len: l, horizon: h }).unwrap();
            for v in 0..x.variates() {
                let mut joined = ctx.column(v);
                joined.extend(tgt.column(v));
                proptest::prop_assert_eq!(&joined[..], &cols[v][12 - l - h..]);
            }
        }
    }
}
