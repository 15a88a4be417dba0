//! Browser bindings. Every export takes plain numbers and returns a JSON string.

use hydra_core::chunked_grid::{approximation_gap_2d, ChunkSpec2D};
use hydra_core::forecast::{evaluate, ForecastConfig};
use hydra_core::golden;
use hydra_core::grid::{AnchorConvention, Head};
use hydra_core::parallel::Parallelism;
use hydra_core::projection::{GateBundle, GateSource};
use hydra_core::series::{generate_sar, split_task, ForecastTask, SarParams};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finish(r: hydra_core::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn convention(name: &str) -> AnchorConvention {
    name.parse().unwrap_or(AnchorConvention::PrevTimeBoth)
}

/// Linear memories of the 3x6 worked example under the given gates.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn golden_grid(
    alpha: f64,
    beta: f64,
    theta: f64,
    mu: f64,
    eta: f64,
    gamma: f64,
    lambda: f64,
    omega: f64,
    anchor: &str,
) -> String {
    let gates = GateBundle {
        alpha,
        beta,
        theta,
        mu,
        eta,
        gamma,
        lambda,
        omega,
    };
    finish((|| {
        if !gates.is_valid() {
            return Err(hydra_core::Error::Contract(
                "retention gates must lie in [0, 1] and rates must be non-negative".into(),
            ));
        }
        let traj = golden::run(convention(anchor), gates)?;
        Ok(json!({
            "head1": traj.linear_scalar_grid(Head::First),
            "head2": traj.linear_scalar_grid(Head::Second),
            "published_head1": golden::HEAD1,
            "published_head2": golden::HEAD2,
        }))
    })())
}

fn sar(
    seed: u64,
    variates: usize,
    steps: usize,
) -> hydra_core::Result<hydra_core::series::SeriesTensor> {
    let params = SarParams {
        phi: vec![0.6, 0.2],
        eta_seasonal: vec![0.15],
        s: 12,
        noise_std: 0.1,
        seed,
        init: None,
    };
    generate_sar(&params, variates, steps)
}

/// Gap between chunked and exact evaluation for time chunks 1, 2, 4 and 8.
#[wasm_bindgen]
pub fn gap_sweep(seed: u64, variates: usize, steps: usize, rate: f64) -> String {
    finish((|| {
        let steps = steps.max(8);
        let x = sar(seed, variates.max(1), steps + 24)?.window(24, steps)?;
        let proj = golden::projections();
        let gates = GateSource::Fixed(GateBundle {
            alpha: 0.8,
            beta: 0.1,
            theta: 0.8,
            mu: 0.1,
            ..GateBundle::uniform(0.0, rate)
        });
        let mut rows = Vec::new();
        for b_t in [1, 2, 4, 8] {
            let spec = ChunkSpec2D::new(b_t, 1)?;
            rows.push(json!({ "b_t": b_t, "gap": approximation_gap_2d(&x, &proj, &gates, spec)? }));
        }
        Ok(Value::Array(rows))
    })())
}

/// Forecast of a seeded SAR series with both naive baselines.
#[wasm_bindgen]
pub fn forecast_demo(seed: u64, context: usize, horizon: usize) -> String {
    finish((|| {
        let task = ForecastTask {
            context_len: context,
            horizon,
        };
        let data = sar(seed, 1, context + horizon + 200)?;
        let cfg = ForecastConfig::new(task, 12);
        let report = evaluate(&data, &cfg, &Parallelism::sequential())?;
        let (ctx, _) = split_task(&data, task)?;
        let metrics: Vec<Value> = report
            .rows()
            .iter()
            .map(|(name, m)| json!({ "name": name, "mse": m.mse, "mae": m.mae, "mase": m.mase }))
            .collect();
        Ok(json!({
            "context": ctx.column(0),
            "target": report.target[0],
            "prediction": report.predictions[0],
            "metrics": metrics,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_grid_matches_published_values() {
        let g = golden::gates();
        let v: Value = serde_json::from_str(&golden_grid(
            g.alpha,
            g.beta,
            g.theta,
            g.mu,
            g.eta,
            g.gamma,
            g.lambda,
            g.omega,
            "prev_time_both",
        ))
        .unwrap();
        for (row, want) in v["head1"].as_array().unwrap().iter().zip(golden::HEAD1) {
            for (got, w) in row.as_array().unwrap().iter().zip(want) {
                assert!((got.as_f64().unwrap() - w).abs() <= golden::FINAL_TOL);
            }
        }
    }

    #[test]
    fn invalid_gates_report_an_error() {
        let v: Value =
            serde_json::from_str(&golden_grid(1.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, "")).unwrap();
        assert!(v.get("error").is_some());
    }

    #[test]
    fn gap_sweep_starts_at_zero() {
        let v: Value = serde_json::from_str(&gap_sweep(1, 3, 32, 0.1)).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0]["gap"].as_f64().unwrap(), 0.0);
    }

    #[test]
    fn forecast_demo_has_horizon_points() {
        let v: Value = serde_json::from_str(&forecast_demo(42, 96, 24)).unwrap();
        assert_eq!(v["prediction"].as_array().unwrap().len(), 24);
        assert_eq!(v["metrics"].as_array().unwrap().len(), 3);
    }
}
