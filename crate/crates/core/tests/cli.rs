use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fda")).args(args).output().expect("run fda")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    fda(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Config in a scratch directory pointing at the bundled fixture data.
fn scratch_config(dir: &Path, extra: &str) -> PathBuf {
    let f = fixtures();
    let text = format!(
        "data_path = {:?}\npopulation_path = {:?}\ntest_regions = [\"małopolskie\", \"podkarpackie\", \"świętokrzyskie\", \"wielkopolskie\"]\n{extra}",
        f.join("epidemic.csv"),
        f.join("population.csv")
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn is_empty_dir(p: &Path) -> bool {
    !p.exists() || std::fs::read_dir(p).unwrap().next().is_none()
}

#[test]
fn full_pipeline_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = fixtures().join("pipeline.toml");
    for cmd in ["smooth", "fpca", "fit-predict", "report"] {
        let o = run(cmd, &config, &out, &[]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }

    let smoothed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("smoothed.json")).unwrap()).unwrap();
    assert!(smoothed["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    let variables = smoothed["variables"].as_array().unwrap();
    let curves: usize = variables.iter().map(|v| v["dataset"]["labels"].as_array().unwrap().len()).sum();
    assert_eq!(curves, 80);
    assert!(variables.iter().all(|v| v["num_basis"] == 20));

    for v in ["positive_tests", "deaths", "recovered", "hospitalized", "critical"] {
        assert!(out.join(format!("fpca_{v}.json")).exists());
        assert_eq!(csv_rows(&out.join(format!("scores_{v}_pc1_pc2.csv"))).len(), 12);
    }
    let ev = csv_rows(&out.join("explained_variance.csv"));
    for v in ["positive_tests", "hospitalized"] {
        let cum: Vec<f64> = ev.iter().filter(|r| r[0] == v).map(|r| r[4].parse().unwrap()).collect();
        assert!(cum.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        assert!(*cum.last().unwrap() <= 1.0 + 1e-12);
    }

    // Reduced model: intercept plus one coefficient per predictor.
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("model_hospitalized.json")).unwrap()).unwrap();
    let coeffs = model["coeffs"].as_array().unwrap();
    assert_eq!(coeffs.len(), 1);
    assert_eq!(coeffs[0].as_array().unwrap().len(), 4);

    let summary = std::fs::read_to_string(out.join("summary.md")).unwrap();
    let table: Vec<&str> = summary
        .split("## Training-sample MSE")
        .nth(1)
        .unwrap()
        .lines()
        .skip_while(|l| !l.starts_with("| region"))
        .skip(2)
        .take_while(|l| l.starts_with('|'))
        .collect();
    assert_eq!(table.len(), 12);
    assert!(summary.contains("warmińsko-mazurskie"));

    let before = std::fs::read(out.join("summary.md")).unwrap();
    assert!(run("report", &config, &out, &[]).status.success());
    assert_eq!(before, std::fs::read(out.join("summary.md")).unwrap());
}

#[test]
fn missing_population_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.toml");
    std::fs::write(
        &config,
        format!("data_path = {:?}\npopulation_path = \"nowhere.csv\"\n", fixtures().join("epidemic.csv")),
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = run("smooth", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
    assert!(is_empty_dir(&out));
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for extra in ["num_basis = 2\n", "preset = \"paper-reduced\"\nK = 3\n", "colour = 1\n", "preset = \"fancy\"\n"] {
        let config = scratch_config(tmp.path(), extra);
        let o = run("smooth", &config, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{extra}: {}", stderr(&o));
        assert!(is_empty_dir(&out));
    }
}

#[test]
fn unknown_test_region_is_rejected_before_fitting() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = scratch_config(tmp.path(), "");
    let o = run("smooth", &config, &out, &["--test-regions", "atlantis,małopolskie"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("atlantis"));
    assert!(is_empty_dir(&out));
}

#[test]
fn later_stages_name_the_missing_step() {
    let tmp = tempfile::tempdir().unwrap();
    let config = scratch_config(tmp.path(), "");
    let out = tmp.path().join("empty");
    std::fs::create_dir(&out).unwrap();
    let o = run("fpca", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fda smooth"), "{}", stderr(&o));
    let o = run("report", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fda fpca"), "{}", stderr(&o));
    assert!(is_empty_dir(&out));
}

#[test]
fn test_region_override_and_empty_split() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = scratch_config(tmp.path(), "");
    for cmd in ["smooth", "fit-predict"] {
        let o = run(cmd, &config, &out, &["--test-regions", "opolskie,lubuskie"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(csv_rows(&out.join("mse.csv")).len(), 14);
    assert_eq!(csv_rows(&out.join("obs_pred.csv")).len(), 2 * 256 * 2);

    let o = run("fit-predict", &config, &out, &["--test-regions", ""]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&out.join("mse.csv")).len(), 16);
    assert!(csv_rows(&out.join("obs_pred.csv")).is_empty());
}

#[test]
fn basis_candidates_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = scratch_config(tmp.path(), "basis_candidates = [12, 20, 28]\n");
    assert!(run("smooth", &config, &out, &[]).status.success());
    let rows = csv_rows(&out.join("basis_selection.csv"));
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().any(|r| r[1] == "20"));
    assert_eq!(rows.iter().filter(|r| r[4] == "true").count(), 5);
}

#[test]
fn synthetic_mode_is_exact_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = tmp.path().join("c.toml");
    std::fs::write(&config, "K = 2\nL = 2\nsynthetic_n = 60\nseed = 4\n").unwrap();
    let o = run("synthetic", &config, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("synthetic_mse.csv"));
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() < 1e-10));
    let first = std::fs::read(out.join("synthetic_model.json")).unwrap();
    assert!(run("synthetic", &config, &out, &[]).status.success());
    assert_eq!(first, std::fs::read(out.join("synthetic_model.json")).unwrap());
}

#[test]
fn usage_errors() {
    assert_eq!(fda(&[]).status.code(), Some(2));
    assert_eq!(fda(&["smooth"]).status.code(), Some(2));
    assert!(fda(&["--version"]).status.success());
}
