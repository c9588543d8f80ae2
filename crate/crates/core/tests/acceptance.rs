//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1 to 7 are binding and fail the target; criterion 8 compares
//! against published figures for the real dataset and is informational.
//! It runs only when `FDA_REAL_CONFIG` names a pipeline config for that
//! dataset.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use fda_core::basis::fit_points;
use fda_core::ffreg::integrate_beta;
use fda_core::{
    fit_mfflr, fpca_fit, generate_synthetic, make_bspline_basis, predict_response, FunctionalDataset, MfflrConfig,
    SyntheticSpec,
};
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// 1. B-spline partition of unity and agreement with the recursive oracle.
fn bspline_correctness() -> Outcome {
    let basis = make_bspline_basis(4, 20).unwrap();
    let mut pou = 0.0_f64;
    let mut oracle = 0.0_f64;
    for t in uniform_grid(1000) {
        let v = basis.eval_basis(t).unwrap();
        pou = pou.max((v.iter().sum::<f64>() - 1.0).abs());
        for (a, b) in v.iter().zip(oracle_basis(4, 20, t)) {
            oracle = oracle.max((a - b).abs());
        }
    }
    check(
        pou < 1e-12 && oracle < 1e-12,
        format!("partition of unity {pou:.1e}, oracle {oracle:.1e}"),
    )
}

/// 2. Noise-free smoothing recovers the generating coefficients.
fn smoothing_recovery() -> Outcome {
    let basis = Arc::new(make_bspline_basis(4, 20).unwrap());
    let ts = uniform_grid(256);
    let (mut coef_err, mut mse) = (0.0_f64, 0.0_f64);
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let truth: Vec<f64> = (0..20).map(|_| r.random_range(-10.0..10.0)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| oracle_curve(4, &truth, *t)).collect();
        let fit = fit_points(&ts, &ys, &basis).unwrap();
        for (a, b) in fit.datum.coeffs.iter().zip(&truth) {
            coef_err = coef_err.max((a - b).abs());
        }
        mse = mse.max(fit.mse);
    }
    check(
        coef_err < 1e-9 && mse < 1e-18,
        format!("max coefficient error {coef_err:.1e}, max mse {mse:.1e} over 100 cases"),
    )
}

fn random_dataset(r: &mut rand_chacha::ChaCha8Rng, order: usize, n: usize, p: usize) -> FunctionalDataset {
    let basis = Arc::new(make_bspline_basis(order, p).unwrap());
    let coeffs = DMatrix::from_fn(n, p, |_, _| r.random_range(-1.0..1.0));
    let labels = (0..n).map(|i| format!("c{i}")).collect();
    FunctionalDataset::new(basis, None, labels, coeffs).unwrap()
}

/// 3. FPCA against a densely discretized PCA.
fn fpca_oracle() -> Outcome {
    let (mut eig_err, mut ortho_err, mut var_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut count_mismatch = 0;
    for seed in 0..50 {
        let mut r = rng(3000 + seed);
        let order = r.random_range(2..=4);
        let p = r.random_range(order.max(3)..=5);
        let n = r.random_range(2..=4);
        let data = random_dataset(&mut r, order, n, p);
        let model = fpca_fit(&data, n - 1).unwrap();
        let reference = discretized_pca(order, &data.coeffs, 10_000);
        let scale = reference[0];
        for (l, ev) in model.eigenvalues.iter().enumerate() {
            eig_err = eig_err.max(rel_err(*ev, reference[l]));
        }
        // Components the model dropped must be negligible in the oracle too.
        for ev in &reference[model.num_components()..] {
            if *ev > 1e-6 * scale {
                count_mismatch += 1;
            }
        }
        let gram = simpson_gram(order, p, 2000);
        let r_count = model.num_components();
        for a in 0..r_count {
            let fa: Vec<f64> = model.harmonic_coeffs.row(a).iter().copied().collect();
            for b in 0..r_count {
                let fb: Vec<f64> = model.harmonic_coeffs.row(b).iter().copied().collect();
                let target = if a == b { 1.0 } else { 0.0 };
                ortho_err = ortho_err.max((quad_form(&gram, &fa, &fb) - target).abs());
            }
            let scores: Vec<f64> = model.scores.column(a).iter().copied().collect();
            var_err = var_err.max(rel_err(sample_variance(&scores), model.eigenvalues[a]));
        }
    }
    check(
        eig_err < 1e-4 && ortho_err < 1e-8 && var_err < 1e-8 && count_mismatch == 0,
        format!(
            "eigenvalue rel {eig_err:.1e}, orthonormality {ortho_err:.1e}, score variance rel {var_err:.1e}, dropped-but-large {count_mismatch}"
        ),
    )
}

/// 4. Two curves: the single eigenvalue is half the squared L2 distance.
fn two_curve_closed_form() -> Outcome {
    let gram = simpson_gram(4, 20, 2000);
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let mut r = rng(4000 + seed);
        let data = random_dataset(&mut r, 4, 2, 20);
        let model = fpca_fit(&data, 1).unwrap();
        let d: Vec<f64> = (0..20).map(|j| data.coeffs[(0, j)] - data.coeffs[(1, j)]).collect();
        let expected = quad_form(&gram, &d, &d) / 2.0;
        worst = worst.max(rel_err(model.eigenvalues[0], expected));
    }
    check(worst < 1e-10, format!("max relative error {worst:.1e} over 20 pairs"))
}

fn l2_distance(a: &FunctionalDataset, b: &FunctionalDataset, i: usize) -> f64 {
    let d: Vec<f64> = (0..a.coeffs.ncols()).map(|j| a.coeffs[(i, j)] - b.coeffs[(i, j)]).collect();
    a.basis.inner(&d, &d).max(0.0).sqrt()
}

/// 5. Regression identifiability on generated data.
fn mfflr_identifiability() -> Outcome {
    let config = MfflrConfig::new(2, 2);
    let (mut coef_err, mut curve_err) = (0.0_f64, 0.0_f64);
    for seed in 0..5 {
        let data = generate_synthetic(&SyntheticSpec::new(100, 3, 2, 2, 0.0, 5000 + seed)).unwrap();
        let model = fit_mfflr(&data.responses, &data.predictors, &config).unwrap();
        coef_err = coef_err.max((&model.coeffs - &data.true_coeffs).amax());
        let predicted = predict_response(&model, &data.predictors).unwrap();
        for i in 0..data.responses.len() {
            curve_err = curve_err.max(l2_distance(&predicted, &data.responses, i));
        }
    }

    let (mut covered, mut total, mut all_covered_runs) = (0usize, 0usize, 0usize);
    let runs = 200;
    for seed in 0..runs {
        let data = generate_synthetic(&SyntheticSpec::new(100, 3, 2, 2, 0.1, 6000 + seed)).unwrap();
        let model = fit_mfflr(&data.responses, &data.predictors, &config).unwrap();
        let mut all = true;
        for (idx, truth) in data.true_coeffs.iter().enumerate() {
            let ok = (model.coeffs[idx] - truth).abs() <= 3.0 * model.std_errors[idx];
            covered += ok as usize;
            all &= ok;
            total += 1;
        }
        all_covered_runs += all as usize;
    }
    let rate = covered as f64 / total as f64;
    check(
        coef_err < 1e-8 && curve_err < 1e-6 && rate >= 0.95,
        format!(
            "noise-free coefficient error {coef_err:.1e}, curve L2 {curve_err:.1e}; noisy: {:.1}% of coefficients within 3 SE ({}/{runs} runs with all inside)",
            100.0 * rate,
            all_covered_runs
        ),
    )
}

/// 6. Integral form through β surfaces reproduces score-based predictions.
fn beta_consistency() -> Outcome {
    let grid = uniform_grid(401);
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let mut r = rng(7000 + seed);
        let k = r.random_range(1..=2);
        let l = r.random_range(1..=3);
        let spec = SyntheticSpec::new(40, 3, k, l, 0.2, 7000 + seed);
        let data = generate_synthetic(&spec).unwrap();
        let model = fit_mfflr(&data.responses, &data.predictors, &MfflrConfig::new(k, l)).unwrap();
        let by_scores = predict_response(&model, &data.predictors).unwrap();
        let alpha = model.intercept_function();
        let alpha_t = alpha.basis.eval_coeffs(&alpha.coeffs, &grid).unwrap();
        for i in 0..data.responses.len() {
            let mut integral = alpha_t.clone();
            for (j, x) in data.predictors.iter().enumerate() {
                let mut centred = x.curve(i);
                for (c, m) in centred.coeffs.iter_mut().zip(&model.predictor_fpcas[j].mean_coeffs) {
                    *c -= m;
                }
                let part = integrate_beta(&model, j, &centred, &grid).unwrap();
                for (a, b) in integral.iter_mut().zip(part) {
                    *a += b;
                }
            }
            let scores_t = by_scores.basis.eval_coeffs(&by_scores.curve(i).coeffs, &grid).unwrap();
            // trapezoid over a fine grid is plenty for a 1e-6 threshold
            let h = 1.0 / (grid.len() - 1) as f64;
            let sq: Vec<f64> = integral.iter().zip(&scores_t).map(|(a, b)| (a - b).powi(2)).collect();
            let l2 = (h * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sq.len() - 1]))).sqrt();
            worst = worst.max(l2);
        }
    }
    check(worst < 1e-6, format!("max L2 discrepancy {worst:.1e} over 20 models"))
}

fn fda(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fda")).args(args).output().expect("run fda")
}

fn run_pipeline(config: &Path, out: &Path) -> Result<(), String> {
    for cmd in ["smooth", "fpca", "fit-predict", "report"] {
        let o = fda(&[cmd, "--config", config.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
        if !o.status.success() {
            return Err(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr).trim()));
        }
    }
    Ok(())
}

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pipeline.toml")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// 7. Fixture pipeline: table shapes and byte-identical reruns.
fn pipeline_shape() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = run_pipeline(&fixture_config(), a.path()).and_then(|_| run_pipeline(&fixture_config(), b.path())) {
        return check(false, e);
    }
    let mse = std::fs::read_to_string(a.path().join("mse.csv")).unwrap();
    let mse_rows = mse.lines().count() - 1;
    let obs = std::fs::read_to_string(a.path().join("obs_pred.csv")).unwrap();
    let rows: Vec<Vec<&str>> = obs.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let dates: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    let regions: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1]).collect();
    let variables: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[2]).collect();
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    let identical = fa == fb;
    check(
        mse_rows == 12 && rows.len() == 4 * 256 * 2 && dates.len() == 256 && regions.len() == 4 && variables.len() == 2 && identical,
        format!(
            "{mse_rows} MSE rows, {} obs/pred rows ({} regions x {} dates x {} variables), {} files byte-identical: {identical}",
            rows.len(),
            regions.len(),
            dates.len(),
            variables.len(),
            fa.len()
        ),
    )
}

const PUBLISHED_FIRST_COMPONENT: [(&str, f64); 5] = [
    ("positive_tests", 46.93),
    ("deaths", 42.27),
    ("recovered", 38.78),
    ("hospitalized", 41.17),
    ("critical", 44.30),
];

/// 8. Published figures on the real dataset (informational).
fn published_figures() -> Option<Outcome> {
    let config = PathBuf::from(std::env::var_os("FDA_REAL_CONFIG")?);
    let out = tempfile::tempdir().unwrap();
    if let Err(e) = run_pipeline(&config, out.path()) {
        return Some(check(false, e));
    }
    let ev = std::fs::read_to_string(out.path().join("explained_variance.csv")).unwrap();
    let mut deltas = Vec::new();
    for (variable, published) in PUBLISHED_FIRST_COMPONENT {
        let share = ev
            .lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|r| r[0] == variable && r[1] == "1")
            .map(|r| 100.0 * r[3].parse::<f64>().unwrap())
            .unwrap_or(f64::NAN);
        deltas.push((variable, share, share - published));
    }
    let variance_ok = deltas.iter().all(|(_, _, d)| d.abs() <= 5.0);
    let mse = std::fs::read_to_string(out.path().join("mse.csv")).unwrap();
    let mut y1: Vec<(String, f64)> = mse
        .lines()
        .skip(1)
        .map(|l| {
            let r: Vec<&str> = l.split(',').collect();
            (r[0].to_string(), r[1].parse().unwrap())
        })
        .collect();
    y1.sort_by(|a, b| a.1.total_cmp(&b.1));
    let lowest = y1.first().map(|r| r.0.clone()).unwrap_or_default();
    let highest = y1.last().map(|r| r.0.clone()).unwrap_or_default();
    let rank_ok = lowest == "warmińsko-mazurskie" && highest == "lubuskie";
    let shares: Vec<String> = deltas.iter().map(|(v, s, d)| format!("{v} {s:.2}% ({d:+.2})")).collect();
    Some(check(
        variance_ok && rank_ok,
        format!("first components {}; MSE(Y1) lowest {lowest}, highest {highest}", shares.join(", ")),
    ))
}

fn main() {
    type Criterion = (usize, &'static str, fn() -> Outcome, Duration);
    let binding: [Criterion; 7] = [
        (1, "B-spline correctness", bspline_correctness, Duration::from_secs(1)),
        (2, "smoothing recovery", smoothing_recovery, Duration::from_secs(5)),
        (3, "FPCA oracle equivalence", fpca_oracle, Duration::from_secs(30)),
        (4, "two-curve closed form", two_curve_closed_form, Duration::from_secs(30)),
        (5, "MFFLR identifiability", mfflr_identifiability, Duration::from_secs(120)),
        (6, "beta-surface consistency", beta_consistency, Duration::from_secs(60)),
        (7, "pipeline shape on fixture", pipeline_shape, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (id, name, run, budget) in binding {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        failures += !pass as usize;
        println!(
            "criterion {id} {name}: {} ({}; {:.2} s, budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    match published_figures() {
        Some(o) => println!(
            "criterion 8 published-figure reproduction (non-blocking): {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        ),
        None => println!("criterion 8 published-figure reproduction (non-blocking): SKIP (set FDA_REAL_CONFIG to a config for the real dataset)"),
    }
    if failures > 0 {
        eprintln!("{failures} binding criteria failed");
        std::process::exit(1);
    }
}
