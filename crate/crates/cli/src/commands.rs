use std::time::Instant;

use anyhow::{bail, Context, Result};
use hydra_core::chunked_grid::{run_chunked_final_column, ChunkSpec2D};
use hydra_core::equiv::{self, EquivConfig, SuiteResult};
use hydra_core::forecast::{evaluate, ForecastConfig};
use hydra_core::golden;
use hydra_core::grid::{run_grid_final_column, AnchorConvention, HeadPair};
use hydra_core::kernel::Mat;
use hydra_core::memory::grad;
use hydra_core::parallel::Parallelism;
use hydra_core::projection::GateBundle;
use hydra_core::series::{
    generate_sar, load_csv, write_csv, ForecastTask, SarParams, SeriesTensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{BenchArgs, EquivArgs, ForecastArgs, Global, GradcheckArgs};
use crate::report::{emit, num, sci, Table};

fn anchor(g: &Global, default: AnchorConvention) -> AnchorConvention {
    g.anchor.map_or(default, Into::into)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn golden(g: &Global) -> Result<bool> {
    let conv = anchor(g, AnchorConvention::PrevTimeBoth);
    let check = golden::check(conv, g.tol)?;
    let mut t = Table::default();
    let mut header = String::new();
    if g.csv {
        t.row(["kind", "label", "got", "want", "diff", "status"]);
        for e in check.finals.iter().chain(&check.logs) {
            let kind = if e.label.starts_with("log") {
                "log"
            } else {
                "final"
            };
            t.row([
                kind.to_string(),
                e.label.clone(),
                format!("{:?}", e.got),
                format!("{:?}", e.want),
                sci(e.diff()),
                status(e.ok()).to_string(),
            ]);
        }
    } else {
        header = format!("golden  anchor={conv}\n");
        for (name, grid) in [("M1", &check.head1), ("M2", &check.head2)] {
            header.push_str(&format!("{name} (linear)\n"));
            for row in grid {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.3}")).collect();
                header.push_str(&cells.join("  "));
                header.push('\n');
            }
        }
        t.row(["log M1".to_string(), "got".to_string(), "want".to_string()]);
        for e in &check.logs {
            t.row([
                e.label.clone(),
                format!("{:.5}", e.got),
                format!("{:.5}", e.want),
            ]);
        }
        t.row(["max_final_diff".to_string(), sci(check.max_final_diff())]);
        t.row(["max_log_diff".to_string(), sci(check.max_log_diff())]);
        for e in check.failures() {
            t.row([
                "mismatch".to_string(),
                e.label.clone(),
                format!("got={:.5}", e.got),
                format!("want={:.5}", e.want),
                format!("diff={}", sci(e.diff())),
                format!("tol={}", sci(e.tol)),
            ]);
        }
        t.row(["status", status(check.passed())]);
    }
    header.push_str(&t.render(g.csv));
    emit(&header, g.out.as_deref())?;
    Ok(check.passed())
}

fn suite_table(results: &[SuiteResult]) -> Table {
    let mut t = Table::default();
    t.row(["suite", "trials", "max_dev", "tol", "status"]);
    for r in results {
        t.row([
            r.name.to_string(),
            r.trials.to_string(),
            sci(r.max_dev),
            sci(r.tol),
            status(r.passed()).to_string(),
        ]);
    }
    t
}

pub fn equiv(g: &Global, a: &EquivArgs) -> Result<bool> {
    let cfg = EquivConfig {
        trials: a.trials as usize,
        seed: g.seed,
        max_variates: a.max_v as usize,
        max_steps: a.max_t as usize,
        max_dim: a.max_d as usize,
        fault: a.inject_fault,
    };
    let mut results = equiv::run_all(&cfg)?;
    results.push(equiv::gradcheck(
        cfg.trials,
        cfg.max_dim.min(4),
        cfg.seed,
        cfg.fault,
    ));
    if let Some(tol) = g.tol {
        for r in &mut results {
            r.tol = tol;
        }
    }
    let ok = results.iter().all(SuiteResult::passed);
    let mut text = suite_table(&results).render(g.csv);
    if !g.csv {
        text.push_str(&format!(
            "config: seed={} max_v={} max_t={} max_d={} fault={}\nstatus: {}\n",
            cfg.seed,
            cfg.max_variates,
            cfg.max_steps,
            cfg.max_dim,
            cfg.fault,
            status(ok)
        ));
    }
    emit(&text, g.out.as_deref())?;
    Ok(ok)
}

pub fn gradcheck(g: &Global, a: &GradcheckArgs) -> Result<bool> {
    let mut r = equiv::gradcheck(a.trials as usize, a.dim as usize, g.seed, false);
    r.tol = g.tol.unwrap_or(equiv::GRADCHECK_TOL);
    // The first worked-example gradient: all-ones memory, k = 1, v = 2.
    let analytic = grad(&Mat::filled(1, 1, 1.0), &[1.0], &[2.0])?[(0, 0)];
    let h = equiv::FD_STEP;
    let half_loss = |m: f64| 0.5 * (m - 2.0) * (m - 2.0);
    let numeric = (half_loss(1.0 + h) - half_loss(1.0 - h)) / (2.0 * h);
    let example_ok = (analytic - numeric).abs() <= 1e-8;
    let ok = r.passed() && example_ok;
    let mut t = suite_table(std::slice::from_ref(&r));
    t.row([
        "example_1x1".to_string(),
        "1".to_string(),
        sci((analytic - numeric).abs()),
        sci(1e-8),
        status(example_ok).to_string(),
    ]);
    let mut text = t.render(g.csv);
    if !g.csv {
        text.push_str(&format!(
            "config: seed={} max_dim={} h={}\nstatus: {}\n",
            g.seed,
            a.dim,
            sci(h),
            status(ok)
        ));
    }
    emit(&text, g.out.as_deref())?;
    Ok(ok)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn time_reps<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Vec<f64>, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        last = f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((times, last))
}

pub fn bench(g: &Global, a: &BenchArgs) -> Result<bool> {
    let (nv, nt, d) = (a.variates as usize, a.steps as usize, a.dim as usize);
    let spec = ChunkSpec2D::new(a.chunk_t as usize, nv)?;
    spec.validate(nv, nt)?;
    let conv = anchor(g, AnchorConvention::PerHeadPredecessor);
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut inputs = equiv::random_grid(&mut rng, nv, nt, d, d);
    let gates = GateBundle {
        alpha: 0.9,
        beta: 0.1,
        theta: 0.9,
        mu: 0.1,
        eta: 0.05,
        gamma: 0.05,
        lambda: 0.05,
        omega: 0.05,
    };
    inputs.gates.iter_mut().for_each(|x| *x = gates);
    let par = Parallelism::from_env();
    let reps = a.reps as usize;
    let (exact_t, exact) = time_reps(reps, || Ok(run_grid_final_column(&inputs, conv)))?;
    let (chunk_t, chunked) =
        time_reps(reps, || Ok(run_chunked_final_column(&inputs, spec, &par)?))?;
    let diff = exact
        .iter()
        .zip(&chunked)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max);
    let finite = exact.iter().chain(&chunked).all(HeadPair::is_finite);
    let (te, tc) = (median(exact_t), median(chunk_t));
    let mut t = Table::default();
    if g.csv {
        t.row(["key", "value"]);
    }
    for (k, v) in [
        ("t", nt.to_string()),
        ("v", nv.to_string()),
        ("dim", d.to_string()),
        ("chunk_t", spec.b_t.to_string()),
        ("chunk_v", spec.b_v.to_string()),
        ("reps", reps.to_string()),
        ("seed", g.seed.to_string()),
        ("threads", par.threads().to_string()),
        ("exact_anchor", conv.to_string()),
        ("exact_median_s", format!("{te:.4}")),
        ("chunked_median_s", format!("{tc:.4}")),
        ("speedup", format!("{:.2}", te / tc)),
        ("final_column_max_abs_diff", sci(diff)),
        ("finite", finite.to_string()),
    ] {
        t.row([k.to_string(), v]);
    }
    emit(&t.render(g.csv), g.out.as_deref())?;
    Ok(true)
}

fn load_forecast_data(
    g: &Global,
    a: &ForecastArgs,
) -> Result<(SeriesTensor, Vec<(String, String)>)> {
    let mut echo = Vec::new();
    if let Some(path) = &a.input {
        let data =
            load_csv(path, a.time_col).with_context(|| format!("reading {}", path.display()))?;
        echo.push(("source".to_string(), format!("csv:{}", path.display())));
        echo.push(("time_col".to_string(), a.time_col.to_string()));
        return Ok((data, echo));
    }
    if a.synthetic.is_none() {
        bail!("one of --input or --synthetic sar is required");
    }
    if a.p.is_some_and(|p| p != a.phi.len()) {
        bail!(
            "--p {} does not match {} --phi values",
            a.p.unwrap_or(0),
            a.phi.len()
        );
    }
    if a.q.is_some_and(|q| q != a.eta_seasonal.len()) {
        bail!(
            "--q {} does not match {} --eta-seasonal values",
            a.q.unwrap_or(0),
            a.eta_seasonal.len()
        );
    }
    let params = SarParams {
        phi: a.phi.clone(),
        eta_seasonal: a.eta_seasonal.clone(),
        s: a.s,
        noise_std: a.noise_std,
        seed: g.seed,
        init: None,
    };
    let steps = a.steps.unwrap_or(a.context + a.horizon + 200);
    let data = generate_sar(&params, a.variates, steps)?;
    let list = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    for (k, v) in [
        ("source", "synthetic:sar".to_string()),
        ("seed", g.seed.to_string()),
        ("p", params.p().to_string()),
        ("q", params.q().to_string()),
        ("s", params.s.to_string()),
        ("phi", list(&params.phi)),
        ("eta_seasonal", list(&params.eta_seasonal)),
        ("noise_std", format!("{:?}", params.noise_std)),
        ("variates", a.variates.to_string()),
        ("steps", steps.to_string()),
    ] {
        echo.push((k.to_string(), v));
    }
    Ok((data, echo))
}

pub fn forecast(g: &Global, a: &ForecastArgs) -> Result<bool> {
    let (data, mut echo) = load_forecast_data(g, a)?;
    if let Some(path) = &a.dump_data {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        write_csv(&data, std::io::BufWriter::new(file))?;
    }
    let task = ForecastTask {
        context_len: a.context,
        horizon: a.horizon,
    };
    let mut cfg = ForecastConfig::new(task, a.s);
    cfg.chunk = ChunkSpec2D::new(a.chunk_t, a.chunk_v)?;
    cfg.conv = anchor(g, AnchorConvention::PrevTimeBoth);
    let report = evaluate(&data, &cfg, &Parallelism::from_env())?;
    echo.extend(report.config.iter().cloned());
    let mut cfg_t = Table::default();
    for (k, v) in &echo {
        cfg_t.row([format!("# {k}"), v.clone()]);
    }
    let mut t = Table::default();
    t.row(["model", "mse", "mae", "smape", "mase", "owa"]);
    for (name, m) in report.rows() {
        t.row([
            name.to_string(),
            num(m.mse),
            num(m.mae),
            num(m.smape),
            num(m.mase),
            num(m.owa),
        ]);
    }
    // CSV keeps the header on line one and the echo as trailing comment rows.
    let text = if g.csv {
        t.render(true) + &cfg_t.render(true)
    } else {
        cfg_t.render(false) + &t.render(false)
    };
    emit(&text, g.out.as_deref())?;
    Ok(true)
}
