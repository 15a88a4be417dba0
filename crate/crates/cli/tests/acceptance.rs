//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use hydra_core::equiv::{self, EquivConfig};
use hydra_core::forecast::{evaluate, ForecastConfig};
use hydra_core::metrics::{mae, mase, mse, owa, seasonal_scale, smape};
use hydra_core::parallel::Parallelism;
use hydra_core::series::{generate_sar, ForecastTask, SarParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_LIMIT: Duration = Duration::from_secs(1);
const GRADCHECK_LIMIT: Duration = Duration::from_secs(5);
const CHUNK_LIMIT: Duration = Duration::from_secs(30);
const CLOSED_FORM_LIMIT: Duration = Duration::from_secs(10);
const FORECAST_LIMIT: Duration = Duration::from_secs(60);
const MIN_SPEEDUP: f64 = 3.0;
const METRIC_TOL: f64 = 1e-12;

struct Outcome {
    ok: bool,
    detail: String,
}

fn timed(f: impl FnOnce() -> Outcome, limit: Duration) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.ok &= elapsed < limit;
    out.detail = format!(
        "{} time={:.2}s limit={}s",
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    out
}

fn hydra(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hydra"))
        .args(args)
        .env_remove("HYDRA_THREADS")
        .output()
        .expect("hydra binary runs")
}

fn golden() -> Outcome {
    let out = hydra(&["golden"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    Outcome {
        ok: out.status.code() == Some(0) && stdout.contains("status          PASS"),
        detail: stdout
            .lines()
            .filter(|l| l.starts_with("max_"))
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join("="))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn gradcheck() -> Outcome {
    let r = equiv::gradcheck(100, 4, 42, false);
    Outcome {
        ok: r.trials == 100 && r.max_dev <= 1e-5,
        detail: format!("trials={} max_rel_err={:.3e} tol=1e-5", r.trials, r.max_dev),
    }
}

fn sized(trials: usize, seed: u64) -> EquivConfig {
    EquivConfig {
        trials,
        seed,
        max_variates: 6,
        max_steps: 64,
        max_dim: 8,
        fault: false,
    }
}

fn chunk_exactness() -> Outcome {
    let one = equiv::chunk1d_oracle(&sized(100, 11)).expect("1D suite runs");
    let two = equiv::chunk2d_oracle(&sized(50, 12)).expect("2D suite runs");
    Outcome {
        ok: one.max_dev <= 1e-12 && two.max_dev <= 1e-12,
        detail: format!(
            "1d trials={} max_dev={:.3e} 2d trials={} max_dev={:.3e} tol=1e-12",
            one.trials, one.max_dev, two.trials, two.max_dev
        ),
    }
}

fn closed_form() -> Outcome {
    let r = equiv::closed_form(&sized(100, 13)).expect("closed-form suite runs");
    Outcome {
        ok: r.max_dev <= 1e-10,
        detail: format!("trials={} max_dev={:.3e} tol=1e-10", r.trials, r.max_dev),
    }
}

fn linear_reduction() -> Outcome {
    let sup = equiv::superposition(&sized(100, 14)).expect("superposition suite runs");
    let red = equiv::reduction_1d(&sized(100, 15)).expect("reduction suite runs");
    Outcome {
        ok: sup.max_dev <= 1e-10 && red.max_dev <= 1e-12,
        detail: format!(
            "superposition={:.3e} (tol 1e-10) reduction_1d={:.3e} (tol 1e-12)",
            sup.max_dev, red.max_dev
        ),
    }
}

fn forecasting() -> Outcome {
    let params = SarParams {
        phi: vec![0.6, 0.2],
        eta_seasonal: vec![0.15],
        s: 12,
        noise_std: 0.1,
        seed: 42,
        init: None,
    };
    let task = ForecastTask {
        context_len: 96,
        horizon: 24,
    };
    let data = generate_sar(&params, 4, 96 + 24 + 200).expect("SAR series");
    let cfg = ForecastConfig::new(task, 12);
    let report = evaluate(&data, &cfg, &Parallelism::sequential()).expect("forecast runs");
    Outcome {
        ok: report.model.mse < report.persistence.mse,
        detail: format!(
            "model_mse={:.6} persistence_mse={:.6} seasonal_naive_mse={:.6}",
            report.model.mse, report.persistence.mse, report.seasonal_naive.mse
        ),
    }
}

fn throughput() -> Outcome {
    let out = hydra(&[
        "bench",
        "--t",
        "4096",
        "--v",
        "8",
        "--dim",
        "64",
        "--chunk-t",
        "64",
        "--reps",
        "3",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let field = |key: &str| {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
            .unwrap_or_default()
    };
    let speedup: f64 = field("speedup").parse().unwrap_or(0.0);
    Outcome {
        ok: out.status.code() == Some(0) && speedup >= MIN_SPEEDUP,
        detail: format!(
            "speedup={speedup:.2} (min {MIN_SPEEDUP}) exact={}s chunked={}s threads={}",
            field("exact_median_s"),
            field("chunked_median_s"),
            field("threads")
        ),
    }
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut bounded = true;
    let mut zeros = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=40);
        let s = rng.random_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let h: Vec<f64> = (0..n + s + 1)
            .map(|_| rng.random_range(-5.0..5.0))
            .collect();

        let mut se = 0.0;
        let mut ae = 0.0;
        let mut sm = 0.0;
        for i in 0..n {
            se += (a[i] - p[i]).powi(2);
            ae += (a[i] - p[i]).abs();
            sm += (a[i] - p[i]).abs() / (a[i].abs() + p[i].abs());
        }
        let n_f = n as f64;
        let scale: f64 =
            (s..h.len()).map(|i| (h[i] - h[i - s]).abs()).sum::<f64>() / (h.len() - s) as f64;
        let want = [
            se / n_f,
            ae / n_f,
            200.0 * sm / n_f,
            ae / n_f / scale,
            scale,
        ];
        let got = [
            mse(&a, &p).unwrap(),
            mae(&a, &p).unwrap(),
            smape(&a, &p, false).unwrap(),
            mase(&a, &p, &h, s).unwrap(),
            seasonal_scale(&h, s).unwrap(),
        ];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
        }
        let (s1, m1, s2, m2) = (
            got[2],
            got[3],
            rng.random_range(1.0..50.0),
            rng.random_range(0.5..2.0),
        );
        let o = owa(s1, m1, s2, m2).unwrap();
        worst = worst.max((o - 0.5 * (s1 / s2 + m1 / m2)).abs());
        bounded &= (0.0..=200.0).contains(&got[2]);
        let sign_flip: Vec<f64> = a.iter().map(|x| -x).collect();
        bounded &= smape(&a, &sign_flip, true).unwrap() <= 200.0;
        zeros &= mse(&a, &a).unwrap() == 0.0
            && mae(&a, &a).unwrap() == 0.0
            && smape(&a, &a, true).unwrap() == 0.0
            && mase(&a, &a, &h, s).unwrap() == 0.0;
    }
    Outcome {
        ok: worst <= METRIC_TOL && bounded && zeros,
        detail: format!(
            "max_dev={worst:.3e} tol=1e-12 smape_bounded={bounded} perfect_zero={zeros}"
        ),
    }
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("golden_example", Box::new(|| timed(golden, GOLDEN_LIMIT))),
        (
            "gradient_correctness",
            Box::new(|| timed(gradcheck, GRADCHECK_LIMIT)),
        ),
        (
            "chunk_exactness",
            Box::new(|| timed(chunk_exactness, CHUNK_LIMIT)),
        ),
        (
            "closed_form_equivalence",
            Box::new(|| timed(closed_form, CLOSED_FORM_LIMIT)),
        ),
        ("linear_reduction", Box::new(linear_reduction)),
        (
            "synthetic_forecasting",
            Box::new(|| timed(forecasting, FORECAST_LIMIT)),
        ),
        ("throughput", Box::new(throughput)),
        ("metric_formulas", Box::new(metrics)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let out = check();
        if !out.ok {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if out.ok { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
