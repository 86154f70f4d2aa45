use std::fs;
use std::path::Path;

use super::*;
use crate::ensembles::read_rows;
use crate::indicators::Label;

fn run_args(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["chaos-ld", "--out-dir", dir.to_str().unwrap(), "--threads", "2"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn quick_map_dataset(dir: &Path, name: &str, ks: &str, n: &str) -> i32 {
    run_args(
        dir,
        &["generate", "--system", "standard-map", "--K", ks, "--n", n, "--iters", "300", "--t-sali", "3000", "--name", name],
    )
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"bins": 40, "column": "sali_log10"}"#).unwrap();
    let flags = ThresholdArgs {
        bins: Some(60),
        ..ThresholdArgs::default()
    };
    let p: ThresholdParams = resolve("threshold", Some(&cfg), &flags).unwrap();
    assert_eq!(p.bins, 60);
    assert_eq!(p.column, "sali_log10");
    assert_eq!(p.smoothing, ThresholdParams::default().smoothing);
}

#[test]
fn config_echo_form_is_accepted_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"command": "train", "params": {"epochs": 7}}"#).unwrap();
    let p: TrainParams = resolve("train", Some(&cfg), &TrainArgs::default()).unwrap();
    assert_eq!(p.epochs, 7);
    let wrong: Result<ThresholdParams> = resolve("threshold", Some(&cfg), &ThresholdArgs::default());
    assert!(matches!(wrong, Err(Error::InvalidParameter(_))));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"bnis": 40}"#).unwrap();
    let r: Result<ThresholdParams> = resolve("threshold", Some(&cfg), &ThresholdArgs::default());
    assert_eq!(exit_code(&r.unwrap_err()), EXIT_CONFIG);
}

#[test]
fn exit_codes_by_error_class() {
    assert_eq!(exit_code(&Error::NoThreshold), EXIT_DATA);
    assert_eq!(exit_code(&Error::Untrainable("x".into())), EXIT_DATA);
    assert_eq!(exit_code(&Error::InvalidParameter("x".into())), EXIT_CONFIG);
    assert_eq!(
        exit_code(&Error::RecipeMismatch {
            model: "a".into(),
            requested: "b".into()
        }),
        EXIT_CONFIG
    );
    let io = Error::io("x", std::io::Error::new(std::io::ErrorKind::NotFound, "gone"));
    assert_eq!(exit_code(&io), EXIT_IO);
}

#[test]
fn bad_flags_exit_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_args(dir.path(), &["generate", "--system", "pendulum"]), EXIT_CONFIG);
    assert_eq!(run_args(dir.path(), &["generate", "--system", "henon-heiles"]), EXIT_CONFIG);
    assert_eq!(run_args(dir.path(), &["generate", "--system", "standard-map", "--energy", "0.1"]), EXIT_CONFIG);
    assert_eq!(run_args(dir.path(), &["no-such-command"]), EXIT_CONFIG);
}

#[test]
fn map_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(quick_map_dataset(d, "sm", "0.5,1.5", "120"), 0);
    let rows = read_rows(&d.join("sm.csv")).unwrap();
    assert_eq!(rows.len(), 240);
    assert!(rows.iter().all(|r| r.energy.is_none() && r.param_k.is_some()));

    assert_eq!(run_args(d, &["threshold", "--dataset", d.join("sm.csv").to_str().unwrap()]), 0);
    let th: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("threshold.json")).unwrap()).unwrap();
    let t = th["result"]["threshold"].as_f64().unwrap();
    let peaks = th["result"]["peaks"].as_array().unwrap();
    assert!(peaks[0].as_f64().unwrap() < t && t < peaks[1].as_f64().unwrap());
    let hist = fs::read_to_string(d.join("threshold.histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 101);

    let data = d.join("sm.csv");
    let data = data.to_str().unwrap();
    for recipe in ["logS_only", "S_only"] {
        let name = format!("m_{recipe}");
        let code = run_args(
            d,
            &["train", "--dataset", data, "--recipe", recipe, "--epochs", "30", "--train-fraction", "0.5", "--name", &name],
        );
        assert_eq!(code, 0);
    }
    let a = crate::svm::LinearSvmModel::from_json(&fs::read_to_string(d.join("m_logS_only.json")).unwrap()).unwrap();
    let b = crate::svm::LinearSvmModel::from_json(&fs::read_to_string(d.join("m_S_only.json")).unwrap()).unwrap();
    assert_ne!(a.recipe, b.recipe);
    let loss = fs::read_to_string(d.join("m_logS_only.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 31);

    let model = d.join("m_logS_only.json");
    assert_eq!(run_args(d, &["evaluate", "--model", model.to_str().unwrap(), "--dataset", data]), 0);
    let report: crate::svm::EvalReport =
        serde_json::from_str(&fs::read_to_string(d.join("evaluation.json")).unwrap()).unwrap();
    let mis = fs::read_to_string(d.join("evaluation.misclassified.csv")).unwrap();
    assert_eq!(mis.lines().next(), Some("q1,q2,margin,true_label"));
    assert_eq!(mis.lines().count() - 1, report.confusion.fp + report.confusion.fn_);
    assert_eq!(report.per_case.len(), 2);

    let code = run_args(d, &["evaluate", "--model", model.to_str().unwrap(), "--dataset", data, "--recipe", "S_only"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn rerun_from_echo_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(quick_map_dataset(a.path(), "x", "1.5", "40"), 0);
    let echo = a.path().join("x.config.json");
    let code = main_with_args([
        "chaos-ld",
        "--out-dir",
        b.path().to_str().unwrap(),
        "--threads",
        "1",
        "--config",
        echo.to_str().unwrap(),
        "generate",
    ]);
    assert_eq!(code, 0);
    for f in ["x.csv", "x.spec.json", "x.config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failed_threshold_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // K = 0 is integrable: every orbit is regular and log S is unimodal.
    assert_eq!(quick_map_dataset(d, "flat", "0", "250"), 0);
    let rows = read_rows(&d.join("flat.csv")).unwrap();
    assert!(rows.iter().all(|r| r.label().unwrap() == Label::Regular));
    let code = run_args(
        d,
        &["threshold", "--dataset", d.join("flat.csv").to_str().unwrap(), "--column", "sali_log10", "--name", "t"],
    );
    assert_eq!(code, EXIT_DATA);
    for f in ["t.json", "t.histogram.csv", "t.config.json"] {
        assert!(!d.join(f).exists(), "{f} left behind");
    }

    let code = run_args(d, &["train", "--dataset", d.join("flat.csv").to_str().unwrap(), "--name", "m"]);
    assert_eq!(code, EXIT_DATA);
    assert!(!d.join("m.json").exists());
}

#[test]
fn missing_files_exit_with_io_status() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("missing.csv");
    assert_eq!(run_args(d, &["threshold", "--dataset", missing.to_str().unwrap()]), EXIT_IO);
    assert_eq!(run_args(d, &["train", "--dataset", missing.to_str().unwrap()]), EXIT_IO);
}

#[test]
fn empty_dataset_is_untrainable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let empty = d.join("empty.csv");
    crate::ensembles::write_rows(&empty, &[]).unwrap();
    assert_eq!(run_args(d, &["train", "--dataset", empty.to_str().unwrap()]), EXIT_DATA);
}

#[test]
fn poincare_map_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = run_args(
        d,
        &["poincare", "--system", "standard-map", "--K", "1.5", "--n", "50", "--crossings", "500", "--seed", "3"],
    );
    assert_eq!(code, 0);
    let text = fs::read_to_string(d.join("poincare.csv")).unwrap();
    assert_eq!(text.lines().count(), 25_001);
    assert_eq!(text.lines().next(), Some("orbit_id,q1,q2"));
}

#[test]
fn poincare_explicit_points_need_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_args(
        dir.path(),
        &["poincare", "--system", "standard-map", "--K", "1.5", "--ic", "0.1,0.2,0.3"],
    );
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn sali_trace_regular_map_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = run_args(
        d,
        &["sali-trace", "--system", "standard-map", "--K", "1.5", "--ic", "0.6,0.0", "--t-max", "100000"],
    );
    assert_eq!(code, 0);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("sali_trace.fit.json")).unwrap()).unwrap();
    assert_eq!(fit["fit"]["kind"], "power-law");
    let slope = fit["fit"]["value"].as_f64().unwrap();
    assert!((slope + 2.0).abs() < 0.3, "{slope}");
}

#[test]
fn sali_trace_equilibrium_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = run_args(
        d,
        &["sali-trace", "--system", "henon-heiles", "--energy", "0", "--ic", "0,0", "--t-max", "200"],
    );
    assert_eq!(code, 0);
    let text = fs::read_to_string(d.join("sali_trace.csv")).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo < 1e-9, "{lo} .. {hi}");
    assert!(lo > -1.0);
}

#[test]
fn split_is_seeded_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(quick_map_dataset(dir.path(), "s", "1.5", "30"), 0);
    let rows = read_rows(&dir.path().join("s.csv")).unwrap();
    let (a, b) = split_rows(&rows, 0.1, 4).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a.len() + b.len(), rows.len());
    assert_eq!(split_rows(&rows, 0.1, 4).unwrap().0, a);
    assert!(split_rows(&rows, 0.0, 4).is_err());
    assert!(split_rows(&rows, 1.5, 4).is_err());
}

#[test]
fn campaign_spec_covers_four_cases() {
    let p = ReproduceParams::default().double_pendulum();
    let spec = p.ensemble_spec().unwrap();
    assert_eq!(spec.cases.len(), 4 * 20);
    assert_eq!(spec.n_per_case, 500);
    assert_eq!(spec.indicators.sali_horizon, 1e4);
}
