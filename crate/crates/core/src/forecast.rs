//! Multi-step forecasting with the two-dimensional memory.
//!
//! Each variate is standardised with its context mean and deviation. A cell's
//! input is the lag window `[y_t, y_{t−1}, …, y_{t−n}]`; the key is the scaled
//! lags `y_{t−1}…y_{t−n}`, the value is `y_t`, so head 1 learns an
//! autoregression online. The query is the window shifted by one step, which
//! makes the readout at the last context step a one-step-ahead prediction.
//! Predictions are fed back as inputs to cover the horizon, with the final
//! head-1 memory of each variate held fixed.
//!
//! Rates are normalised per cell by `‖k‖²`. Cells whose lag window reaches
//! before the context get rate zero.

use crate::chunked_grid::{run_chunked_final_column, ChunkSpec2D};
use crate::error::{Error, Result};
use crate::grid::{run_grid_final_column, AnchorConvention, GridInputs};
use crate::kernel::{emap_exp, matvec, Mat};
use crate::metrics::{naive_baselines, score, MetricConfig, MetricSet};
use crate::parallel::Parallelism;
use crate::projection::{GateBundle, GateSource, ProjectionSet};
use crate::series::{split_task, ForecastTask, SeriesTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastConfig {
    pub task: ForecastTask,
    pub chunk: ChunkSpec2D,
    pub seasonal_period: usize,
    /// Lag window length `n`.
    pub lags: usize,
    /// Numerator of the normalised rate `rate / (‖k‖² + 1e-3)`.
    pub rate: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier of the normalised rate used for `γ`.
    pub gamma_scale: f64,
    pub theta: f64,
    pub mu: f64,
    pub conv: AnchorConvention,
}

impl ForecastConfig {
    pub fn new(task: ForecastTask, seasonal_period: usize) -> Self {
        Self {
            task,
            chunk: ChunkSpec2D { b_t: 1, b_v: 1 },
            seasonal_period,
            lags: seasonal_period.max(2),
            rate: 0.02,
            alpha: 1.0,
            beta: 0.0,
            gamma_scale: 0.0,
            theta: 0.5,
            mu: 0.5,
            conv: AnchorConvention::PrevTimeBoth,
        }
    }

    pub fn key_scale(&self) -> f64 {
        1.0 / (2.0 * self.lags as f64)
    }

    /// `key = value` lines describing every effective setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("context".to_string(), self.task.context_len.to_string()),
            ("horizon".to_string(), self.task.horizon.to_string()),
            ("chunk_t".to_string(), self.chunk.b_t.to_string()),
            ("chunk_v".to_string(), self.chunk.b_v.to_string()),
            (
                "seasonal_period".to_string(),
                self.seasonal_period.to_string(),
            ),
            ("lags".to_string(), self.lags.to_string()),
            ("key_scale".to_string(), format!("{:?}", self.key_scale())),
            ("rate".to_string(), format!("{:?}", self.rate)),
        ];
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma_scale", self.gamma_scale),
            ("theta", self.theta),
            ("mu", self.mu),
        ] {
            out.push((name.to_string(), format!("{value:?}")));
        }
        out.push(("anchor".to_string(), self.conv.to_string()));
        out
    }

    fn validate(&self, data: &SeriesTensor) -> Result<()> {
        if data.dim() != 1 {
            return Err(Error::Dimension(format!(
                "forecasting expects one value per step, got {}",
                data.dim()
            )));
        }
        if self.lags == 0 || self.lags >= self.task.context_len {
            return Err(Error::Contract(format!(
                "lag window {} must be positive and shorter than the context {}",
                self.lags, self.task.context_len
            )));
        }
        if self.seasonal_period == 0 || self.seasonal_period >= self.task.context_len {
            return Err(Error::Contract(format!(
                "seasonal period {} must be positive and shorter than the context",
                self.seasonal_period
            )));
        }
        if !(self.rate >= 0.0) {
            return Err(Error::Contract("rate must be non-negative".into()));
        }
        self.chunk.validate(data.variates(), self.task.context_len)
    }

    pub fn projections(&self) -> ProjectionSet {
        let n = self.lags;
        let ks = self.key_scale();
        let mut w_k = Mat::zeros(n, n + 1);
        let mut w_q = Mat::zeros(n, n + 1);
        for i in 0..n {
            w_k[(i, i + 1)] = ks;
            w_q[(i, i)] = ks;
        }
        let mut w_v = Mat::zeros(1, n + 1);
        w_v[(0, 0)] = 1.0;
        ProjectionSet {
            w_k,
            w_v,
            w_q,
            w_out: Mat::identity(1),
        }
    }

    fn gates(&self, key: &[f64], full_window: bool) -> GateBundle {
        let rate = if full_window {
            self.rate / (key.iter().map(|k| k * k).sum::<f64>() + 1e-3)
        } else {
            0.0
        };
        GateBundle {
            alpha: self.alpha,
            beta: self.beta,
            theta: self.theta,
            mu: self.mu,
            eta: rate,
            gamma: self.gamma_scale * rate,
            lambda: rate,
            omega: rate,
        }
    }
}

/// Context mean and deviation of one variate; a constant series keeps scale 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Lag window `[y_t, …, y_{t−n}]`, zero before the start.
fn window(history: &[f64], t: usize, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i <= t { history[t - i] } else { 0.0 })
        .collect()
}

pub fn build_inputs(context: &[Vec<f64>], cfg: &ForecastConfig) -> Result<GridInputs> {
    let n = cfg.lags;
    let proj = cfg.projections();
    let steps = context.first().map_or(0, Vec::len);
    let mut inputs = Vec::with_capacity(context.len() * steps);
    let mut gates = Vec::with_capacity(context.len() * steps);
    for series in context {
        for t in 0..steps {
            let x = window(series, t, n);
            let key = matvec(&proj.w_k, &x)?;
            gates.push(cfg.gates(&key, t >= n));
            inputs.extend(x);
        }
    }
    let x = SeriesTensor::new(context.len(), steps, n + 1, inputs)?;
    GridInputs::build(&x, &proj, &GateSource::PerCell(gates))
}

/// Rolls the fixed memory `m1_log` forward `horizon` steps from `history`.
pub fn rollout(
    m1_log: &Mat,
    history: &[f64],
    cfg: &ForecastConfig,
    horizon: usize,
) -> Result<Vec<f64>> {
    let proj = cfg.projections();
    let memory = emap_exp(m1_log);
    let mut series = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = series.len() - 1;
        let q = matvec(&proj.w_q, &window(&series, t, cfg.lags))?;
        let y = matvec(&proj.w_out, &matvec(&memory, &q)?)?[0];
        if !y.is_finite() {
            return Err(Error::Domain(format!(
                "forecast diverged at horizon step {}",
                out.len()
            )));
        }
        out.push(y);
        series.push(y);
    }
    Ok(out)
}

/// Forecasts `horizon` steps past the end of every context column.
pub fn forecast(
    context: &[Vec<f64>],
    cfg: &ForecastConfig,
    par: &Parallelism,
) -> Result<Vec<Vec<f64>>> {
    let scalers: Vec<Standardizer> = context.iter().map(|c| Standardizer::fit(c)).collect();
    let scaled: Vec<Vec<f64>> = context
        .iter()
        .zip(&scalers)
        .map(|(c, s)| c.iter().map(|&x| s.apply(x)).collect())
        .collect();
    let inputs = build_inputs(&scaled, cfg)?;
    let last = if cfg.chunk.b_t == 1 && cfg.chunk.b_v == 1 {
        run_grid_final_column(&inputs, cfg.conv)
    } else {
        run_chunked_final_column(&inputs, cfg.chunk, par)?
    };
    scaled
        .iter()
        .zip(&last)
        .zip(&scalers)
        .map(|((hist, state), sc)| {
            Ok(rollout(&state.m1, hist, cfg, cfg.task.horizon)?
                .into_iter()
                .map(|z| sc.invert(z))
                .collect())
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ForecastReport {
    pub config: Vec<(String, String)>,
    pub model: MetricSet,
    pub persistence: MetricSet,
    pub seasonal_naive: MetricSet,
    pub predictions: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
}

impl ForecastReport {
    pub fn rows(&self) -> [(&'static str, &MetricSet); 3] {
        [
            ("hydra", &self.model),
            ("persistence", &self.persistence),
            ("seasonal_naive", &self.seasonal_naive),
        ]
    }
}

/// Splits `data` into context and target, forecasts, and scores the model and
/// both naive baselines. OWA is relative to the seasonal-naive forecast.
pub fn evaluate(
    data: &SeriesTensor,
    cfg: &ForecastConfig,
    par: &Parallelism,
) -> Result<ForecastReport> {
    cfg.validate(data)?;
    let (context, target) = split_task(data, cfg.task)?;
    let context = context.columns();
    let target = target.columns();
    let h = cfg.task.horizon;
    let predictions = forecast(&context, cfg, par)?;
    let mut persistence = Vec::new();
    let mut seasonal = Vec::new();
    for c in &context {
        let n = naive_baselines(c, cfg.seasonal_period, h)?;
        persistence.push(n.persistence);
        seasonal.push(n.seasonal);
    }
    let mcfg = MetricConfig::new(cfg.seasonal_period, h)?;
    let naive2 = score(&context, &target, &seasonal, mcfg)?;
    let report = ForecastReport {
        config: cfg.echo(),
        model: score(&context, &target, &predictions, mcfg)?.with_owa(&naive2)?,
        persistence: score(&context, &target, &persistence, mcfg)?.with_owa(&naive2)?,
        seasonal_naive: naive2.with_owa(&naive2)?,
        predictions,
        target,
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_roundtrip() {
        let s = Standardizer::fit(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.invert(s.apply(2.7)) - 2.7).abs() < 1e-12);
        assert_eq!(Standardizer::fit(&[5.0, 5.0]).std, 1.0);
    }

    #[test]
    fn lag_window_pads_with_zeros() {
        assert_eq!(window(&[1.0, 2.0, 3.0], 1, 3), vec![2.0, 1.0, 0.0, 0.0]);
        assert_eq!(window(&[1.0, 2.0, 3.0], 2, 2), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn projections_shift_the_window() {
        let cfg = ForecastConfig::new(
            ForecastTask {
                context_len: 10,
                horizon: 2,
            },
            3,
        );
        let p = cfg.projections();
        let x = [4.0, 3.0, 2.0, 1.0];
        let kvq = crate::projection::project_kvq(&p, &x).unwrap();
        let ks = cfg.key_scale();
        assert_eq!(kvq.k, vec![3.0 * ks, 2.0 * ks, ks]);
        assert_eq!(kvq.v, vec![4.0]);
        assert_eq!(kvq.q, vec![4.0 * ks, 3.0 * ks, 2.0 * ks]);
    }

    #[test]
    fn zero_memory_rollout_averages_lags() {
        let cfg = ForecastConfig::new(
            ForecastTask {
                context_len: 10,
                horizon: 2,
            },
            2,
        );
        let out = rollout(&Mat::zeros(1, 2), &[0.0, 2.0, 4.0], &cfg, 2).unwrap();
        // All-ones memory: prediction is (y_t + y_{t−1}) / 4.
        assert_eq!(out, vec![1.5, (1.5 + 4.0) / 4.0]);
    }

    #[test]
    fn config_validation() {
        let data = SeriesTensor::from_columns(&[vec![1.0; 20]]).unwrap();
        let mut cfg = ForecastConfig::new(
            ForecastTask {
                context_len: 10,
                horizon: 2,
            },
            12,
        );
        assert!(evaluate(&data, &cfg, &Parallelism::sequential()).is_err());
        cfg = ForecastConfig::new(
            ForecastTask {
                context_len: 10,
                horizon: 2,
            },
            2,
        );
        cfg.chunk = ChunkSpec2D { b_t: 11, b_v: 1 };
        assert!(evaluate(&data, &cfg, &Parallelism::sequential()).is_err());
    }
}
