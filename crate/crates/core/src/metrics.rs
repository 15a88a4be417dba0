//! Point-forecast metrics and the naive reference forecasts used to scale them.
//!
//! `MASE` divides by the mean absolute seasonal difference of the in-sample
//! history. `Naïve2` here is the seasonal-naive forecast with the configured
//! period, which is persistence when the period is 1.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricConfig {
    pub seasonal_period: usize,
    pub horizon: usize,
}

impl MetricConfig {
    pub fn new(seasonal_period: usize, horizon: usize) -> Result<Self> {
        if seasonal_period == 0 || horizon == 0 {
            return Err(Error::Contract(
                "seasonal period and horizon must be positive".into(),
            ));
        }
        Ok(Self {
            seasonal_period,
            horizon,
        })
    }
}

fn paired(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Contract("metrics need at least one value".into()));
    }
    Ok(())
}

pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    paired(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(sum / actual.len() as f64)
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    paired(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Symmetric MAPE in percent, `200/F Σ |X − X̂| / (|X| + |X̂|)`.
///
/// An index where both values are zero has no defined ratio: it is an error,
/// or is dropped from the average when `skip_zero` is set.
pub fn smape(actual: &[f64], predicted: &[f64], skip_zero: bool) -> Result<f64> {
    paired(actual, predicted)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (i, (a, p)) in actual.iter().zip(predicted).enumerate() {
        let den = a.abs() + p.abs();
        if den == 0.0 {
            if skip_zero {
                continue;
            }
            return Err(Error::Domain(format!(
                "SMAPE denominator is zero at index {i}"
            )));
        }
        sum += (a - p).abs() / den;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Domain(
            "SMAPE has no index with a nonzero denominator".into(),
        ));
    }
    Ok(200.0 * sum / used as f64)
}

/// Mean absolute seasonal difference of `insample` at lag `s`.
pub fn seasonal_scale(insample: &[f64], s: usize) -> Result<f64> {
    if s == 0 || insample.len() <= s {
        return Err(Error::Contract(format!(
            "MASE needs more than {s} in-sample values, got {}",
            insample.len()
        )));
    }
    let n = insample.len() - s;
    let sum: f64 = insample
        .iter()
        .skip(s)
        .zip(insample)
        .map(|(later, earlier)| (later - earlier).abs())
        .sum();
    let scale = sum / n as f64;
    if scale == 0.0 {
        return Err(Error::Domain(
            "in-sample series has no seasonal variation, MASE is undefined".into(),
        ));
    }
    Ok(scale)
}

pub fn mase(actual: &[f64], predicted: &[f64], insample: &[f64], s: usize) -> Result<f64> {
    let scale = seasonal_scale(insample, s)?;
    Ok(mae(actual, predicted)? / scale)
}

/// `½ (SMAPE / SMAPE_naive2 + MASE / MASE_naive2)`.
pub fn owa(smape_model: f64, mase_model: f64, smape_naive2: f64, mase_naive2: f64) -> Result<f64> {
    if !(smape_naive2 > 0.0) || !(mase_naive2 > 0.0) {
        return Err(Error::Domain(format!(
            "OWA needs positive reference scores, got SMAPE {smape_naive2} and MASE {mase_naive2}"
        )));
    }
    Ok(0.5 * (smape_model / smape_naive2 + mase_model / mase_naive2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveForecasts {
    pub persistence: Vec<f64>,
    pub seasonal: Vec<f64>,
}

/// Persistence repeats the last value; seasonal-naive repeats the last cycle of length `s`.
pub fn naive_baselines(context: &[f64], s: usize, horizon: usize) -> Result<NaiveForecasts> {
    if s == 0 || context.len() < s.max(1) {
        return Err(Error::Contract(format!(
            "naive forecasts with period {s} need at least {} context values, got {}",
            s.max(1),
            context.len()
        )));
    }
    let last = context[context.len() - 1];
    let cycle = &context[context.len() - s..];
    Ok(NaiveForecasts {
        persistence: vec![last; horizon],
        seasonal: (0..horizon).map(|h| cycle[h % s]).collect(),
    })
}

/// Scores of one forecaster over all variates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSet {
    pub mse: f64,
    pub mae: f64,
    pub smape: f64,
    pub mase: f64,
    pub owa: f64,
}

/// Error-type scores over the flattened variates, MASE averaged per variate.
/// `owa` is left at NaN; see [`with_owa`](MetricSet::with_owa).
pub fn score(
    insample: &[Vec<f64>],
    actual: &[Vec<f64>],
    predicted: &[Vec<f64>],
    cfg: MetricConfig,
) -> Result<MetricSet> {
    if insample.len() != actual.len() || actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::Dimension(
            "in-sample, actual and predicted must cover the same non-empty set of variates".into(),
        ));
    }
    let flat_a: Vec<f64> = actual.concat();
    let flat_p: Vec<f64> = predicted.concat();
    let mut mase_sum = 0.0;
    for ((h, a), p) in insample.iter().zip(actual).zip(predicted) {
        mase_sum += mase(a, p, h, cfg.seasonal_period)?;
    }
    Ok(MetricSet {
        mse: mse(&flat_a, &flat_p)?,
        mae: mae(&flat_a, &flat_p)?,
        smape: smape(&flat_a, &flat_p, true)?,
        mase: mase_sum / actual.len() as f64,
        owa: f64::NAN,
    })
}

impl MetricSet {
    pub fn with_owa(mut self, naive2: &MetricSet) -> Result<Self> {
        self.owa = owa(self.smape, self.mase, naive2.smape, naive2.mase)?;
        Ok(self)
    }
}
