use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rfrboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfrboost")).args(args).output().unwrap()
}

fn run_config(dir: &Path, name: &str, toml: &str) -> Output {
    let path = dir.join(name);
    fs::write(&path, toml).unwrap();
    rfrboost(&["--config", path.to_str().unwrap()])
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Rows of (x1, x2, y) with a smooth nonlinear target.
fn toy_rows(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let a = (i as f64 * 0.37).sin() * 2.0;
            let b = ((i * 13) % 17) as f64 / 17.0 - 0.5;
            [a, b, (1.5 * a).sin() + a * b + 0.3 * b]
        })
        .collect()
}

fn write_csv(path: &Path, rows: &[[f64; 3]]) {
    let mut text = String::from("x1,x2,y\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
    }
    fs::write(path, text).unwrap();
}

fn train_toml(extra: &str) -> String {
    format!(
        "task = \"train\"\nseed = 7\nout = \"out\"\n[data]\ntrain = \"train.csv\"\ntargets = [\"y\"]\nkind = \"regression\"\n[model]\nfeature_dim = 32\n{extra}"
    )
}

fn risk_trace(report: &str) -> Vec<f64> {
    let table: toml::Table = report.parse().unwrap();
    table["risk_trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_float().unwrap())
        .collect()
}

#[test]
fn train_writes_model_and_non_increasing_risk() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(120));
    let out = run_config(dir.path(), "run.toml", &train_toml("n_layers = 4\nl2_linpred = 0.001\nl2_ghat = 0.001\n"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/model.json").exists());
    let trace = risk_trace(&fs::read_to_string(dir.path().join("out/report.toml")).unwrap());
    assert_eq!(trace.len(), 5);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-10), "{trace:?}");
    }
    assert!(trace[4] < trace[0]);
}

#[test]
fn unregularized_greedy_risk_never_rises() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(150));
    let out = run_config(
        dir.path(),
        "run.toml",
        &train_toml("algorithm = \"greedy\"\nn_layers = 6\nboost_lr = 1.0\nl2_linpred = 0.0\nl2_ghat = 0.0\n"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = risk_trace(&fs::read_to_string(dir.path().join("out/report.toml")).unwrap());
    assert_eq!(trace.len(), 7);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * (1.0 + trace[0]), "{trace:?}");
    }
}

#[test]
fn zero_layers_reproduce_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let rows = toy_rows(60);
    write_csv(&dir.path().join("train.csv"), &rows);
    let out = run_config(dir.path(), "run.toml", &train_toml("n_layers = 0\nl2_linpred = 0.0\n"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = risk_trace(&fs::read_to_string(dir.path().join("out/report.toml")).unwrap());

    // Ordinary least squares with intercept via centered 2x2 normal equations.
    let n = rows.len() as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n;
    let (m1, m2, my) = (mean(0), mean(1), mean(2));
    let cov = |a: usize, ma: f64, b: usize, mb: f64| rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>();
    let (s11, s12, s22) = (cov(0, m1, 0, m1), cov(0, m1, 1, m2), cov(1, m2, 1, m2));
    let (s1y, s2y) = (cov(0, m1, 2, my), cov(1, m2, 2, my));
    let det = s11 * s22 - s12 * s12;
    let w1 = (s22 * s1y - s12 * s2y) / det;
    let w2 = (s11 * s2y - s12 * s1y) / det;
    let sse: f64 = rows
        .iter()
        .map(|r| {
            let e = r[2] - my - w1 * (r[0] - m1) - w2 * (r[1] - m2);
            e * e
        })
        .sum();
    let expected = 0.5 * sse / n;
    assert_eq!(trace.len(), 1);
    assert!((trace[0] - expected).abs() <= 1e-9 * expected.max(1.0), "{} vs {expected}", trace[0]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(80));
    let toml = train_toml("n_layers = 2\n");
    let first = run_config(dir.path(), "run.toml", &toml);
    let model_a = fs::read(dir.path().join("out/model.json")).unwrap();
    let second = run_config(dir.path(), "run.toml", &toml);
    let model_b = fs::read(dir.path().join("out/model.json")).unwrap();
    assert!(first.status.success() && second.status.success());
    assert_eq!(model_a, model_b);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(80));
    let path = dir.path().join("run.toml");
    fs::write(&path, train_toml("n_layers = 2\n")).unwrap();
    let cfg = path.to_str().unwrap();
    let a = rfrboost(&["--config", cfg, "--seed", "7"]);
    let b = rfrboost(&["--config", cfg, "--seed", "8"]);
    let c = rfrboost(&["--config", cfg]);
    assert_eq!(stdout(&a), stdout(&c));
    assert_ne!(stdout(&a), stdout(&b));
}

#[test]
fn evaluate_scores_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    // y is exactly linear in x, so an unregularized T = 0 model fits it.
    let rows: Vec<[f64; 3]> = (0..40)
        .map(|i| {
            let (a, b) = (i as f64 / 7.0, ((i * 5) % 9) as f64);
            [a, b, 2.0 * a - 0.5 * b + 1.0]
        })
        .collect();
    write_csv(&dir.path().join("train.csv"), &rows);
    write_csv(&dir.path().join("test.csv"), &rows[..10]);
    let out = run_config(dir.path(), "run.toml", &train_toml("n_layers = 0\nl2_linpred = 0.0\n"));
    assert!(out.status.success());
    let eval = run_config(
        dir.path(),
        "eval.toml",
        "task = \"evaluate\"\nmodel_file = \"out/model.json\"\n[data]\ntest = \"test.csv\"\ntargets = [\"y\"]\nkind = \"regression\"\n",
    );
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let table: toml::Table = stdout(&eval).parse().unwrap();
    assert!(table["test_rmse"].as_float().unwrap() < 1e-9);
}

#[test]
fn evaluate_reports_column_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(40));
    fs::write(dir.path().join("test.csv"), "x1,y\n1.0,2.0\n3.0,4.0\n").unwrap();
    assert!(run_config(dir.path(), "run.toml", &train_toml("n_layers = 1\n")).status.success());
    let eval = run_config(
        dir.path(),
        "eval.toml",
        "task = \"evaluate\"\nmodel_file = \"out/model.json\"\n[data]\ntest = \"test.csv\"\ntargets = [\"y\"]\nkind = \"regression\"\n",
    );
    assert_eq!(eval.status.code(), Some(2));
    let err = String::from_utf8_lossy(&eval.stderr);
    assert!(err.contains("expects 2") && err.contains("found 1"), "{err}");
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(40));
    let unknown = run_config(dir.path(), "a.toml", &train_toml("n_layer = 2\n"));
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("n_layer"));

    // Scalar block maps need as many random features as hidden units.
    let scalar = run_config(
        dir.path(),
        "b.toml",
        &train_toml("algorithm = \"greedy\"\nstructure = \"scalar\"\nhidden_dim = 4\n"),
    );
    assert_eq!(scalar.status.code(), Some(1));

    // Without hidden_dim the width is the input dimension, known only after loading.
    let scalar_late = run_config(dir.path(), "c.toml", &train_toml("algorithm = \"greedy\"\nstructure = \"scalar\"\n"));
    assert_eq!(scalar_late.status.code(), Some(1));
    assert!(!dir.path().join("out/model.json").exists());

    assert_eq!(rfrboost(&["--config"]).status.code(), Some(1));
    assert_eq!(rfrboost(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.csv"), "x1,x2,y\n1,2,3\n4,oops,6\n").unwrap();
    let out = run_config(dir.path(), "run.toml", &train_toml(""));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("x2"), "{err}");
}

#[test]
fn cv_and_gridcv_report_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("train.csv"), &toy_rows(90));
    let data = "[data]\ntrain = \"train.csv\"\ntargets = [\"y\"]\nkind = \"regression\"\n[model]\nfeature_dim = 16\nn_layers = 1\n";
    let cv = run_config(dir.path(), "cv.toml", &format!("task = \"cv\"\n{data}[cv]\nk = 3\n"));
    assert!(cv.status.success(), "{}", String::from_utf8_lossy(&cv.stderr));
    let table: toml::Table = stdout(&cv).parse().unwrap();
    assert_eq!(table["scores"].as_array().unwrap().len(), 3);

    let grid = run_config(
        dir.path(),
        "grid.toml",
        &format!("task = \"gridcv\"\n{data}[cv]\nk = 3\ninner_k = 2\n[grid]\nl2_linpred = [0.1, 0.001]\nn_layers = [0, 1]\n"),
    );
    assert!(grid.status.success(), "{}", String::from_utf8_lossy(&grid.stderr));
    let text = stdout(&grid);
    assert_eq!(text.lines().filter(|l| l.contains("mean=")).count(), 4);
    assert_eq!(text.lines().filter(|l| l.ends_with('*')).count(), 1);
    // Rows follow the axis order of the file, last axis fastest.
    assert!(text.lines().next().unwrap().starts_with("l2_linpred=0.1 n_layers=0"));
}

#[test]
fn pointcloud_dumps_every_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        dir.path(),
        "pc.toml",
        "task = \"pointcloud\"\nout = \"pc\"\n[pointcloud]\nn = 400\nn_train = 250\nn_layers = 2\nfeature_dim = 32\n",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for t in 0..=2 {
        let text = fs::read_to_string(dir.path().join(format!("pc/layer_{t}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("phi_1,phi_2,label"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 150);
        assert!(rows.iter().all(|r| r.split(',').count() == 3));
    }
    assert!(!dir.path().join("pc/layer_3.csv").exists());
}
