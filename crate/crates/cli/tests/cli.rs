use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn wine() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/wine.csv")
}

fn dtmcmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtmcmc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn fit(out: &Path, extra: &[&str]) -> Output {
    let data = wine();
    let mut args = vec![
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--iterations",
        "400",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    dtmcmc(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fit_writes_samples_diagnostics_and_metrics() {
    let dir = TempDir::new().unwrap();
    let o = fit(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["samples.json", "diagnostics.csv", "metrics.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let diag = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().next().unwrap(), "iteration,f1,alpha,log_posterior,yield");
    assert_eq!(diag.lines().count(), 401);
}

#[test]
fn fit_is_byte_identical_across_runs() {
    for cores in ["1", "4"] {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let args = ["--cores", cores, "--set", "convergence_tol=0.2"];
        assert!(fit(a.path(), &args).status.success());
        assert!(fit(b.path(), &args).status.success());
        let read = |d: &TempDir| fs::read(d.path().join("samples.json")).unwrap();
        assert!(read(&a) == read(&b), "samples differ at {cores} cores");
    }
}

#[test]
fn unknown_label_column_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = fit(dir.path(), &["--label-col", "colour"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn empty_core_list_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = wine();
    let o = dtmcmc(&["bench", "--data", data.to_str().unwrap(), "--core-list", "", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = fit(dir.path(), &["--set", "iteratoins=5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("iteratoins"));
}

#[test]
fn bench_writes_one_row_per_core_count() {
    let dir = TempDir::new().unwrap();
    let data = wine();
    let o = dtmcmc(&[
        "bench",
        "--data",
        data.to_str().unwrap(),
        "--core-list",
        "1,2",
        "--iterations",
        "300",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("speedup.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cores,theoretical_speedup,measured_speedup,wall_clock_seconds,samples");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("2,"));
}

#[test]
fn predict_round_trips_and_checks_feature_count() {
    let dir = TempDir::new().unwrap();
    assert!(fit(dir.path(), &[]).status.success());
    let samples = dir.path().join("samples.json");
    let data = wine();
    let o = dtmcmc(&[
        "predict",
        "--data",
        data.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().next().unwrap(), "row,label,p_0,p_1,p_2");
    assert_eq!(preds.lines().count(), 179);

    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "a,b,class\n1,2,0\n3,4,1\n").unwrap();
    let o = dtmcmc(&[
        "predict",
        "--data",
        narrow.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn samples_file_with_wrong_schema_is_rejected() {
    let dir = TempDir::new().unwrap();
    assert!(fit(dir.path(), &[]).status.success());
    let samples = dir.path().join("samples.json");
    let text = fs::read_to_string(&samples).unwrap().replace("dtree-mcmc/samples/v1", "dtree-mcmc/samples/v0");
    fs::write(&samples, text).unwrap();
    let data = wine();
    let o = dtmcmc(&[
        "predict",
        "--data",
        data.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("# run\ndata = {}\niterations = 50\nseed = 9\n", wine().display())).unwrap();
    let out = dir.path().join("o");
    let o = dtmcmc(&["fit", "--config", cfg.to_str().unwrap(), "--iterations", "120", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 121);
}
