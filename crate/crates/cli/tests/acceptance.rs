//! End-to-end acceptance checks, one line per numbered criterion.
//!
//! Criterion 5 asks for a strict gain from the quadratic basis on a problem
//! whose quadratic term has zero population weight; it is run as stated and
//! reported as an expected failure. The binary exits nonzero if any other
//! criterion fails, or if 5 unexpectedly passes.

use std::collections::BTreeSet;
use std::error::Error;
use std::fs;
use std::path::Path;

use condexp::basis::{gauss_grid, gauss_rule};
use condexp::cond_expect::{build_obs_basis, galerkin_solve, mmse_residual, OptimalMap};
use condexp::filters::{
    covariance_match_update, fit_state_map, fit_variance_map, gmkf_update, variance_scaled_update, NegativeTarget,
    StepOutput,
};
use condexp::linalg::rel_diff;
use condexp::models::{exact_kalman_step, LinearGaussianModel};
use condexp::rv::{EnsembleRV, GermFamily, PceRV, Rv};
use condexp_cli::config::{parse_config, ExperimentConfig, ModelSpec};
use condexp_cli::run::{run_experiment, simulate};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

type Res<T> = Result<T, Box<dyn Error>>;

const EXPECTED_FAILURES: &[u32] = &[5];

type Criterion = (u32, &'static str, fn() -> Res<Check>);

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn cfg(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap_or_else(|e| panic!("bad test config: {e}\n{text}"))
}

fn linear_model(config: &ExperimentConfig) -> LinearGaussianModel {
    let ModelSpec::LinearGaussian(s) = &config.model else {
        panic!("not linear")
    };
    let m = |rows: &Vec<Vec<f64>>| DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    LinearGaussianModel::new(m(&s.a), m(&s.h), m(&s.q), m(&s.r)).expect("valid model")
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Exact Kalman means and covariances along the twin observations of `config`.
fn kalman_oracle(config: &ExperimentConfig, observations: &[DVector<f64>]) -> Res<Vec<(DVector<f64>, DMatrix<f64>)>> {
    let model = linear_model(config);
    let d = model.a.nrows();
    let (mut m, mut p) = (DVector::zeros(d), DMatrix::identity(d, d));
    let mut out = Vec::new();
    for y in observations {
        (m, p) = exact_kalman_step(&model, &m, &p, Some(y))?;
        out.push((m.clone(), p.clone()));
    }
    Ok(out)
}

fn random_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = random_normal(rng, n, n);
    &b * b.transpose() + DMatrix::identity(n, n) * 0.1
}

fn criterion_1() -> Res<Check> {
    let config = cfg(r#"{"model": {"id": "linear-gaussian"}, "filter": "gmkf",
        "prior": {"representation": {"kind": "pce", "n": 2, "p": 1, "grid_level": 2}},
        "seeds": {"master": 7}}"#);
    let sim = simulate(&config, false)?;
    let oracle = kalman_oracle(&config, &sim.twin.observations)?;
    let mut worst: f64 = 0.0;
    for (s, (m, p)) in sim.steps.iter().zip(&oracle) {
        worst = worst.max(rel_diff(&column(&s.analysis.mean()), &column(m)));
        worst = worst.max(rel_diff(&s.analysis.covariance()?, p));
    }
    Ok(Check::new(
        worst <= 1e-8 && sim.steps.len() == 10,
        format!("10 steps, worst relative deviation from the exact Kalman filter {worst:.2e} (tol 1e-8)"),
    ))
}

fn criterion_2() -> Res<Check> {
    let sizes = [1_000usize, 10_000, 100_000];
    let mut rms = Vec::new();
    let mut worst_se: f64 = 0.0;
    for &n in &sizes {
        let mut sq = 0.0;
        let mut count = 0.0;
        for seed in [1u64, 2, 3] {
            let config = cfg(&format!(
                r#"{{"model": {{"id": "linear-gaussian"}}, "filter": "enkf",
                "prior": {{"representation": {{"kind": "ensemble", "size": {n}}}}},
                "seeds": {{"master": {seed}}}}}"#
            ));
            let sim = simulate(&config, false)?;
            let oracle = kalman_oracle(&config, &sim.twin.observations)?;
            for (s, (m, p)) in sim.steps.iter().zip(&oracle) {
                let err = s.analysis.mean() - m;
                for j in 0..err.len() {
                    sq += err[j] * err[j];
                    count += 1.0;
                    if n == 100_000 {
                        worst_se = worst_se.max(err[j].abs() / (p[(j, j)] / n as f64).sqrt());
                    }
                }
            }
        }
        rms.push((sq / count).sqrt());
    }
    let decreasing = rms.windows(2).all(|w| w[1] < w[0]);
    Ok(Check::new(
        decreasing && worst_se <= 4.0,
        format!(
            "RMS mean error {:.2e} / {:.2e} / {:.2e} for N = 1e3 / 1e4 / 1e5; worst |error| at 1e5 = {worst_se:.2} standard errors (tol 4)",
            rms[0], rms[1], rms[2]
        ),
    ))
}

fn built_in_configs(days: u32) -> Vec<(String, String)> {
    let models = [
        (
            "linear",
            r#"{"id": "linear-gaussian"}"#.to_string(),
            2,
            r#"{"every": 1, "until": 10}"#.to_string(),
        ),
        (
            "cubic",
            r#"{"id": "cubic"}"#.to_string(),
            1,
            r#"{"times": [1]}"#.to_string(),
        ),
        (
            "lorenz84",
            r#"{"id": "lorenz84"}"#.to_string(),
            3,
            format!(r#"{{"every": 1, "until": {days}}}"#),
        ),
    ];
    let filters = [
        r#""gmkf""#,
        r#"{"kind": "polynomial", "degree": 1}"#,
        r#"{"kind": "polynomial", "degree": 2}"#,
        r#"{"kind": "variance-scaled", "degree": 2, "negative_target": "clamp"}"#,
        r#"{"kind": "covariance-matched", "degree": 2}"#,
    ];
    let mut out = Vec::new();
    for (name, model, d, schedule) in &models {
        for filter in filters {
            for rep in [
                r#"{"kind": "ensemble", "size": 200}"#.to_string(),
                format!(r#"{{"kind": "pce", "n": {d}, "p": 2}}"#),
            ] {
                out.push((
                    format!("{name} {filter} {rep}"),
                    format!(
                        r#"{{"model": {model}, "filter": {filter}, "prior": {{"representation": {rep}}},
                        "schedule": {schedule}, "seeds": {{"master": 11}}}}"#
                    ),
                ));
            }
        }
    }
    out
}

fn criterion_3() -> Res<Check> {
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    let mut updates = 0;
    for (name, text) in built_in_configs(10) {
        let sim = simulate(&cfg(&text), false).map_err(|e| format!("{name}: {e}"))?;
        for s in &sim.steps {
            let r = s.report.as_ref().ok_or("missing report")?;
            updates += 1;
            if r.orthogonality_defect > worst {
                worst = r.orthogonality_defect;
                where_ = name.clone();
            }
        }
    }
    Ok(Check::new(
        worst <= 1e-10,
        format!(
            "{updates} updates over 30 runs, worst relative orthogonality defect {worst:.2e} ({where_}) (tol 1e-10)"
        ),
    ))
}

fn criterion_4() -> Res<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dx = rng.random_range(1..=4);
        let dy = rng.random_range(1..=3);
        let sigma = random_spd(&mut rng, dx + dy);
        let l = sigma.clone().cholesky().ok_or("not spd")?.l();
        let n = 400;
        let joint = random_normal(&mut rng, n, dx + dy) * l.transpose();
        let x = EnsembleRV::uniform(joint.columns(0, dx).into_owned())?;
        let y = EnsembleRV::uniform(joint.columns(dx, dy).into_owned())?;
        let y_hat = DVector::from_fn(dy, |_, _| rng.sample(StandardNormal));
        let (post, _) = gmkf_update(&Rv::Ensemble(x.clone()), &Rv::Ensemble(y.clone()), &y_hat, None)?;

        let c = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            let (ma, mb) = (a.row_mean(), b.row_mean());
            let ca = DMatrix::from_fn(n, a.ncols(), |i, j| a[(i, j)] - ma[j]);
            let cb = DMatrix::from_fn(n, b.ncols(), |i, j| b[(i, j)] - mb[j]);
            ca.transpose() * cb / n as f64
        };
        let (xs, ys) = (x.samples(), y.samples());
        let c_xy = c(xs, ys);
        let gain = &c_xy * c(ys, ys).try_inverse().ok_or("singular")?;
        let expected = c(xs, xs) - &gain * c_xy.transpose();
        let Rv::Ensemble(post) = post else {
            return Err("representation changed".into());
        };
        worst = worst.max(rel_diff(&c(post.samples(), post.samples()), &expected));
    }
    Ok(Check::new(
        worst <= 1e-10,
        format!("20 random SPD instances, worst relative deviation {worst:.2e} (tol 1e-10)"),
    ))
}

/// `E[x | ŷ]` for `x ~ N(mu, 1)`, `y = x³ + σ v`, by Gauss-Hermite quadrature.
fn cubic_true_ce(nodes: &[f64], weights: &[f64], mu: f64, sigma: f64, y_hat: f64) -> f64 {
    let logs: Vec<f64> = nodes
        .iter()
        .map(|z| {
            let x = mu + z;
            -(y_hat - x * x * x).powi(2) / (2.0 * sigma * sigma)
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for ((z, w), l) in nodes.iter().zip(weights).zip(&logs) {
        let lik = w * (l - top).exp();
        num += (mu + z) * lik;
        den += lik;
    }
    num / den
}

struct CubicGain {
    r1: f64,
    r2: f64,
    d1: f64,
    d2: f64,
}

fn cubic_gain(mu: f64) -> Res<CubicGain> {
    let sigma = 0.5;
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<f64> = (0..n).map(|_| mu + rng.sample::<f64, _>(StandardNormal)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| x * x * x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x = EnsembleRV::from_scalars(&xs)?;
    let y = EnsembleRV::from_scalars(&ys)?;
    let fit = |p: usize| -> Res<(OptimalMap, f64)> {
        let map = galerkin_solve(&build_obs_basis(1, p)?, &y, &x)?;
        let r = mmse_residual(&map, &x, &y)?;
        Ok((map, r))
    };
    let (m1, r1) = fit(1)?;
    let (m2, r2) = fit(2)?;
    let (nodes, weights) = gauss_rule(GermFamily::Gaussian, 200)?;
    let (mut d1, mut d2) = (0.0, 0.0);
    let probes = 20_000;
    for _ in 0..probes {
        let x0 = mu + rng.sample::<f64, _>(StandardNormal);
        let y_hat = x0 * x0 * x0 + sigma * rng.sample::<f64, _>(StandardNormal);
        let truth = cubic_true_ce(&nodes, &weights, mu, sigma, y_hat);
        d1 += (m1.evaluate(&[y_hat])?[0] - truth).powi(2);
        d2 += (m2.evaluate(&[y_hat])?[0] - truth).powi(2);
    }
    Ok(CubicGain {
        r1,
        r2,
        d1: d1 / probes as f64,
        d2: d2 / probes as f64,
    })
}

fn describe_cubic(g: &CubicGain) -> (bool, String) {
    let gain = (g.r1 - g.r2) / g.r1;
    let pass = gain >= 0.05 && g.d2 < g.d1;
    (
        pass,
        format!(
            "residual p=1 {:.6}, p=2 {:.6} (relative decrease {gain:.2e}, need >= 5e-2); L2 distance to true CE p=1 {:.3e}, p=2 {:.3e}",
            g.r1, g.r2, g.d1, g.d2
        ),
    )
}

fn criterion_5() -> Res<Check> {
    let (pass, detail) = describe_cubic(&cubic_gain(0.0)?);
    Ok(Check::new(
        pass,
        format!("{detail}; x ~ N(0,1) makes E[x y^2] = 0, so the quadratic term carries no weight"),
    ))
}

fn supplementary_5() -> Res<Check> {
    let (pass, detail) = describe_cubic(&cubic_gain(0.5)?);
    Ok(Check::new(pass, format!("x ~ N(0.5,1): {detail}")))
}

fn criterion_6() -> Res<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_tv, mut worst_cov): (f64, f64) = (0.0, 0.0);
    for case in 0..20 {
        let d = rng.random_range(1..=3);
        let (x, y, grid) = if case % 2 == 0 {
            let n = 500;
            let xs = random_normal(&mut rng, n, d);
            let ys = DMatrix::from_fn(n, 1, |i, _| {
                let r = xs.row(i);
                r[0] + 0.3 * r[d - 1] * r[d - 1] + 0.5 * rng.sample::<f64, _>(StandardNormal)
            });
            (
                Rv::Ensemble(EnsembleRV::uniform(xs)?),
                Rv::Ensemble(EnsembleRV::uniform(ys)?),
                None,
            )
        } else {
            let mean = DVector::from_fn(d + 1, |_, _| rng.sample(StandardNormal));
            let factor = random_normal(&mut rng, d + 1, d + 1);
            let joint = PceRV::gaussian(&mean, &factor, 2)?;
            let grid = gauss_grid(joint.germ(), 3)?;
            let x = joint.with_coeffs(joint.coeffs().columns(0, d).into_owned())?;
            let y = joint.with_coeffs(joint.coeffs().columns(d, 1).into_owned())?;
            (Rv::Pce(x), Rv::Pce(y), Some(grid))
        };
        let y_hat = y.mean() + DVector::from_element(1, 0.5);
        let fx = fit_state_map(&x, &y, 2, grid.as_ref())?;
        let center = fx.map.evaluate(y_hat.as_slice())?;
        let fv = fit_variance_map(&x, &y, 2, &center, grid.as_ref())?;
        let target = fv.map.evaluate(y_hat.as_slice())?[0];
        if target > 0.0 {
            let (post, _) =
                variance_scaled_update(&x, &y, &fx.map, &fv.map, &y_hat, grid.as_ref(), NegativeTarget::Error)?;
            worst_tv = worst_tv.max((post.total_variance()? - target).abs() / target);
        }
        let c_a = random_spd(&mut rng, d);
        let (post, _) = covariance_match_update(&x, &y, &fx.map, &c_a, &y_hat, grid.as_ref())?;
        worst_cov = worst_cov.max(rel_diff(&post.covariance()?, &c_a));
    }
    Ok(Check::new(
        worst_tv <= 1e-8 && worst_cov <= 1e-8,
        format!("20 ensemble and PCE cases, worst total-variance error {worst_tv:.2e}, worst covariance error {worst_cov:.2e} (tol 1e-8)"),
    ))
}

fn criterion_7() -> Res<Check> {
    let joint = PceRV::gaussian(
        &DVector::zeros(2),
        &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]),
        1,
    )?;
    let x = Rv::Pce(joint.with_coeffs(joint.coeffs().columns(0, 1).into_owned())?);
    let y = Rv::Pce(joint.with_coeffs(joint.coeffs().columns(1, 1).into_owned())?);
    let y_hat = DVector::from_element(1, 1.0);
    let (post, _) = gmkf_update(&x, &y, &y_hat, None)?;
    let pce_err = (post.mean()[0] - 0.5)
        .abs()
        .max((post.covariance()?[(0, 0)] - 0.5).abs());

    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs = random_normal(&mut rng, n, 1);
    let ys = DMatrix::from_fn(n, 1, |i, _| xs[(i, 0)] + rng.sample::<f64, _>(StandardNormal));
    let (post, _) = gmkf_update(
        &Rv::Ensemble(EnsembleRV::uniform(xs)?),
        &Rv::Ensemble(EnsembleRV::uniform(ys)?),
        &y_hat,
        None,
    )?;
    let se_mean = (0.5 / n as f64).sqrt();
    let se_var = 0.5 * (2.0 / n as f64).sqrt();
    let z_mean = (post.mean()[0] - 0.5).abs() / se_mean;
    let z_var = (post.covariance()?[(0, 0)] - 0.5).abs() / se_var;
    Ok(Check::new(
        pce_err <= 1e-8 && z_mean <= 4.0 && z_var <= 4.0,
        format!("PCE error {pce_err:.2e} (tol 1e-8); ensemble N=1e5 mean off by {z_mean:.2} SE, variance by {z_var:.2} SE (tol 4)"),
    ))
}

fn lorenz(every: u32, dir: &Path) -> Res<condexp_cli::RunOutcome> {
    let config = cfg(&format!(
        r#"{{"model": {{"id": "lorenz84"}}, "filter": "enkf",
        "prior": {{"representation": {{"kind": "ensemble", "size": 500}}}},
        "schedule": {{"every": {every}, "until": 50}}, "seeds": {{"master": 8}},
        "output": {{"quantiles": []}}}}"#
    ));
    Ok(run_experiment(&config, dir)?)
}

fn total_variance(s: &StepOutput, analysis: bool) -> Res<f64> {
    Ok(if analysis {
        s.analysis.total_variance()?
    } else {
        s.forecast.total_variance()?
    })
}

fn criterion_8() -> Res<Check> {
    let tmp = tempfile::tempdir()?;
    let daily = lorenz(1, &tmp.path().join("daily"))?;
    let mut monotone = true;
    for s in &daily.steps {
        monotone &= total_variance(s, true)? <= total_variance(s, false)?;
    }
    let avg =
        |f: &dyn Fn(&condexp_cli::run::RmseRow) -> f64| daily.rmse.iter().map(f).sum::<f64>() / daily.rmse.len() as f64;
    let (filtered, free) = (avg(&|r| r.rmse_vs_truth), avg(&|r| r.free_run_rmse));

    let sparse = lorenz(10, &tmp.path().join("sparse"))?;
    let drops = sparse
        .steps
        .iter()
        .map(|s| Ok(total_variance(s, true)? < total_variance(s, false)?))
        .collect::<Res<Vec<bool>>>()?;
    let mut grows = 0;
    for w in sparse.steps.windows(2) {
        if total_variance(&w[1], false)? > total_variance(&w[0], true)? {
            grows += 1;
        }
    }
    let intervals = sparse.steps.len() - 1;
    let all_drop = drops.iter().all(|&d| d);
    let growth = grows as f64 / intervals as f64;
    Ok(Check::new(
        monotone && filtered <= 0.5 * free && all_drop && growth >= 0.8 && sparse.steps.len() == 5,
        format!(
            "(a) trace monotone at all 50 updates: {monotone}; (b) mean RMSE {filtered:.4} vs free run {free:.4} (ratio {:.3}, need <= 0.5); (c) 10-day cadence: drops at {}/{} updates, growth in {grows}/{intervals} intervals",
            filtered / free,
            drops.iter().filter(|&&d| d).count(),
            drops.len()
        ),
    ))
}

fn analysis_values(rv: &Rv) -> DMatrix<f64> {
    match rv {
        Rv::Ensemble(e) => e.samples().clone(),
        Rv::Pce(p) => p.coeffs().clone(),
    }
}

fn criterion_9() -> Res<Check> {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (_, text) in built_in_configs(10).into_iter().filter(|(n, _)| n.contains("gmkf")) {
        let linear = simulate(&cfg(&text), false)?;
        let poly = simulate(
            &cfg(&text.replace(r#""gmkf""#, r#"{"kind": "polynomial", "degree": 1}"#)),
            false,
        )?;
        for (a, b) in linear.steps.iter().zip(&poly.steps) {
            worst = worst.max(rel_diff(&analysis_values(&a.analysis), &analysis_values(&b.analysis)));
        }
        runs += 1;
    }
    Ok(Check::new(
        worst <= 1e-10,
        format!("{runs} model/representation pairs, worst sample-wise relative difference {worst:.2e} (tol 1e-10)"),
    ))
}

fn bundle_files(dir: &Path) -> Res<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().ok_or("unnamed file")?.to_string_lossy().into_owned();
        let mut bytes = fs::read(&path)?;
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_slice(&bytes)?;
            v.as_object_mut()
                .ok_or("manifest is not an object")?
                .remove("wall_time_seconds");
            bytes = v.to_string().into_bytes();
        }
        out.push((name, bytes));
    }
    out.sort();
    Ok(out)
}

fn criterion_10() -> Res<Check> {
    let tmp = tempfile::tempdir()?;
    let pdf = r#""output": {"pdf": {"min": -3, "max": 3, "points": 41, "steps": [0]}}"#;
    let configs = [
        format!(
            r#"{{"model": {{"id": "linear-gaussian"}}, "filter": "gmkf", "prior": {{"representation": {{"kind": "pce", "n": 2, "p": 1}}}}, {pdf}}}"#
        ),
        format!(
            r#"{{"model": {{"id": "linear-gaussian"}}, "filter": "enkf", "prior": {{"representation": {{"kind": "ensemble", "size": 300}}}}, {pdf}}}"#
        ),
        format!(
            r#"{{"model": {{"id": "cubic"}}, "filter": "polynomial", "prior": {{"representation": {{"kind": "pce", "n": 1, "p": 3}}}}, {pdf}}}"#
        ),
        format!(
            r#"{{"model": {{"id": "lorenz84"}}, "filter": "covariance-matched", "prior": {{"representation": {{"kind": "ensemble", "size": 100}}}}, "schedule": {{"every": 2, "until": 10}}, {pdf}}}"#
        ),
    ];
    let mut files = 0;
    let mut mismatched = BTreeSet::new();
    for (k, text) in configs.iter().enumerate() {
        let config = cfg(text);
        let a = tmp.path().join(format!("{k}a"));
        let b = tmp.path().join(format!("{k}b"));
        run_experiment(&config, &a)?;
        run_experiment(&config, &b)?;
        let (fa, fb) = (bundle_files(&a)?, bundle_files(&b)?);
        files += fa.len();
        if fa != fb {
            mismatched.insert(k);
        }
    }
    Ok(Check::new(
        mismatched.is_empty(),
        format!("4 configs run twice, {files} files compared byte for byte (wall time excluded); mismatching configs {mismatched:?}"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "exact Kalman equivalence", criterion_1),
        (2, "EnKF convergence", criterion_2),
        (3, "Galerkin orthogonality", criterion_3),
        (4, "Kalman covariance formula", criterion_4),
        (5, "nested MMSE gain on the cubic toy", criterion_5),
        (6, "moment-matching updates", criterion_6),
        (7, "conjugate Gaussian posterior", criterion_7),
        (8, "Lorenz-84 tracking", criterion_8),
        (9, "degree-1 identity", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failed = BTreeSet::new();
    for (id, name, run) in criteria {
        let check = run().unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
        let status = match (check.pass, EXPECTED_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        if !check.pass {
            failed.insert(id);
        }
        println!("criterion {id:>2} {status}: {name}: {}", check.detail);
    }
    let extra = supplementary_5().unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
    println!(
        "supplementary {}: cubic toy with a nonzero prior mean: {}",
        if extra.pass { "PASS" } else { "FAIL" },
        extra.detail
    );

    let expected: BTreeSet<u32> = EXPECTED_FAILURES.iter().copied().collect();
    if failed != expected || !extra.pass {
        println!("acceptance: failures {failed:?} differ from the expected set {expected:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass except the expected {expected:?}");
}
