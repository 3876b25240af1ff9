//! End-to-end tests of the `vbd` binary: file outputs, determinism, and
//! exit-code contracts.

use std::path::Path;
use std::process::{Command, Output};

fn vbd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vbd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn simulate_writes_daily_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(dir.path(), &["simulate", "--days", "1080", "--out", "sim"]);
    assert_exit(&out, 0);

    let csv = std::fs::read_to_string(dir.path().join("sim/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,S_D,I_MD,S_ND,I_M,S_V,I_V");
    assert_eq!(lines.count(), 1081);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim/report.json")).unwrap())
            .unwrap();
    let aor_min = report["summary"]["aor_min"].as_f64().unwrap();
    assert!(aor_min > 1.0, "aor_min = {aor_min}");
    assert_eq!(report["summary"]["windows"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_without_infections_stays_disease_free() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{ "init_frac_diabetic": 0.0, "init_frac_nondiabetic": 0.0, "init_frac_vector": 0.0 }"#,
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &["simulate", "--days", "30", "--config", "cfg.json", "--out", "dfe"],
    );
    assert_exit(&out, 0);
    let csv = std::fs::read_to_string(dir.path().join("dfe/trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], "0"); // I_MD
        assert_eq!(cells[4], "0"); // I_M
        assert_eq!(cells[6], "0"); // I_V
    }
}

#[test]
fn invalid_params_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("params.json"),
        r#"{ "n_d": 80000, "n_nd": 920000, "n_v": 2000000, "b_d": 1.7, "b_nd": 0.5,
             "c_d": 0.75, "c_nd": 0.5, "gamma_md": 0.00833, "gamma_nd": 0.01667,
             "mu_v": 0.0714, "a_mean": 0.1, "a_amp": 0.8 }"#,
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &["simulate", "--params", "params.json", "--out", "x"],
    );
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("b_d"));
}

#[test]
fn r0_report_matches_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(dir.path(), &["r0", "--out", "r0"]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r0/r0_report.json")).unwrap())
            .unwrap();
    let r0 = report["r0_effective"].as_f64().unwrap();
    assert!((r0 - 1.526).abs() <= 0.001, "r0 = {r0}");
    let min = report["seasonal"]["r0_effective"]["min"].as_f64().unwrap();
    let max = report["seasonal"]["r0_effective"]["max"].as_f64().unwrap();
    assert!((min - 0.305).abs() <= 0.005, "min = {min}");
    assert!((max - 2.747).abs() <= 0.005, "max = {max}");

    let csv = std::fs::read_to_string(dir.path().join("r0/r0_seasonal.csv")).unwrap();
    assert!(csv.starts_with("time,a_t,r0_effective,r0_ngm\n"));
    assert_eq!(csv.lines().count(), 367);
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out_dir in ["a", "b"] {
        let out = vbd(
            dir.path(),
            &["generate", "--days", "40", "--seed", "42", "--out", out_dir, "--quiet"],
        );
        assert_exit(&out, 0);
    }
    let a = std::fs::read(dir.path().join("a/dataset.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/dataset.csv")).unwrap();
    assert_eq!(a, b);
    let meta_a = std::fs::read(dir.path().join("a/dataset.meta.json")).unwrap();
    let meta_b = std::fs::read(dir.path().join("b/dataset.meta.json")).unwrap();
    assert_eq!(meta_a, meta_b);

    let out = vbd(
        dir.path(),
        &["generate", "--days", "40", "--seed", "43", "--out", "c", "--quiet"],
    );
    assert_exit(&out, 0);
    assert_ne!(a, std::fs::read(dir.path().join("c/dataset.csv")).unwrap());
}

#[test]
fn generate_zero_noise_duplicates_model_columns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{ "sigma_diabetic": 0.0, "sigma_nondiabetic": 0.0 }"#,
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &["generate", "--days", "20", "--config", "cfg.json", "--out", "zn"],
    );
    assert_exit(&out, 0);
    let csv = std::fs::read_to_string(dir.path().join("zn/dataset.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time,S_D,I_MD,S_ND,I_M,S_V,I_V,obs_I_MD,obs_I_M"
    );
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], cells[7], "obs_I_MD differs from I_MD");
        assert_eq!(cells[4], cells[8], "obs_I_M differs from I_M");
    }
}

#[test]
fn calibrate_recovers_parameters_from_self_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{ "sigma_diabetic": 0.0, "sigma_nondiabetic": 0.0, "free": ["a_mean", "a_amp"] }"#,
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &["generate", "--days", "760", "--config", "cfg.json", "--out", "data", "--quiet"],
    );
    assert_exit(&out, 0);
    let out = vbd(
        dir.path(),
        &[
            "calibrate",
            "--dataset",
            "data/dataset.csv",
            "--config",
            "cfg.json",
            "--starts",
            "3",
            "--seed",
            "7",
            "--out",
            "fit",
            "--quiet",
        ],
    );
    assert_exit(&out, 0);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit/fit.json")).unwrap())
            .unwrap();
    let theta = fit["best_theta"].as_array().unwrap();
    let a_mean = theta[0].as_f64().unwrap();
    let a_amp = theta[1].as_f64().unwrap();
    assert!((a_mean - 0.1).abs() / 0.1 < 0.02, "a_mean = {a_mean}");
    assert!((a_amp - 0.8).abs() / 0.8 < 0.02, "a_amp = {a_amp}");

    let curves = std::fs::read_to_string(dir.path().join("fit/fit_curves.csv")).unwrap();
    assert!(curves.starts_with("time,fit_I_MD,lo_I_MD,hi_I_MD,fit_I_M,lo_I_M,hi_I_M\n"));
}

#[test]
fn calibrate_with_missing_dataset_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(
        dir.path(),
        &["calibrate", "--dataset", "nope.csv", "--out", "fit"],
    );
    assert_exit(&out, 2);
    assert!(!dir.path().join("fit").exists(), "no partial outputs");
}

#[test]
fn analyze_reports_correlations_and_odds_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(
        dir.path(),
        &["generate", "--days", "400", "--seed", "3", "--out", "data", "--quiet"],
    );
    assert_exit(&out, 0);
    let out = vbd(
        dir.path(),
        &["analyze", "--dataset", "data/dataset.csv", "--out", "an", "--quiet"],
    );
    assert_exit(&out, 0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("an/report.json")).unwrap())
            .unwrap();
    // S_D row, I_MD column of the labeled matrix.
    let c = report["correlation"]["values"][0][1].as_f64().unwrap();
    assert!((c + 1.0).abs() <= 1e-9, "corr = {c}");
    assert!(report["summary"]["aor_min"].as_f64().unwrap() > 1.0);

    let series = std::fs::read_to_string(dir.path().join("an/series.csv")).unwrap();
    assert!(series.starts_with("time,prev_D,prev_ND,odds_ratio\n"));
    let corr_csv = std::fs::read_to_string(dir.path().join("an/correlation.csv")).unwrap();
    assert!(corr_csv.starts_with(",S_D,I_MD,S_ND,I_M,S_V,I_V,obs_I_MD,obs_I_M\n"));
}

#[test]
fn analyze_empty_dataset_exits_2_with_schema_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("empty.csv"),
        "time,S_D,I_MD,S_ND,I_M,S_V,I_V,obs_I_MD,obs_I_M\n",
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &["analyze", "--dataset", "empty.csv", "--out", "an"],
    );
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no rows"));
}

#[test]
fn simulate_report_matches_library_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(dir.path(), &["simulate", "--days", "360", "--out", "sim", "--quiet"]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim/report.json")).unwrap())
            .unwrap();

    let params = vbd_core::ModelParams::default();
    let initial = vbd_core::default_initial_state(&params);
    let traj = vbd_core::integrate(
        &params,
        &initial,
        0.0,
        360.0,
        &vbd_core::IntegratorConfig::default(),
    )
    .unwrap();
    let ds = vbd_core::Dataset::from_trajectory(&traj);
    let expected = vbd_core::summarize(&traj, &ds, &params).unwrap();

    let got = report["summary"]["peak_prevalence_diabetic"].as_f64().unwrap();
    assert_eq!(got, expected.summary.peak_prevalence_diabetic);
    let got = report["summary"]["peak_infected_non_diabetic"].as_f64().unwrap();
    assert_eq!(got, expected.summary.peak_infected_non_diabetic);
}

#[test]
fn inconsistent_fixed_params_fail_numerically_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = vbd(
        dir.path(),
        &["generate", "--days", "30", "--seed", "1", "--out", "data", "--quiet"],
    );
    assert_exit(&out, 0);
    // Halving the diabetic population contradicts the dataset's initial row,
    // so the model is unevaluable at every start.
    std::fs::write(
        dir.path().join("params.json"),
        r#"{ "n_d": 40000, "n_nd": 920000, "n_v": 2000000, "b_d": 0.65, "b_nd": 0.5,
             "c_d": 0.75, "c_nd": 0.5, "gamma_md": 0.00833, "gamma_nd": 0.01667,
             "mu_v": 0.0714, "a_mean": 0.1, "a_amp": 0.8 }"#,
    )
    .unwrap();
    let out = vbd(
        dir.path(),
        &[
            "calibrate",
            "--dataset",
            "data/dataset.csv",
            "--params",
            "params.json",
            "--starts",
            "2",
            "--out",
            "fit",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn outputs_are_not_overwritten_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--days", "5", "--out", "sim", "--quiet"];
    assert_exit(&vbd(dir.path(), &args), 0);
    let out = vbd(dir.path(), &args);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));

    let mut forced: Vec<&str> = args.to_vec();
    forced.push("--force");
    assert_exit(&vbd(dir.path(), &forced), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_exit(
        &vbd(dir.path(), &["simulate", "--days", "15", "--out", "s1", "--quiet"]),
        0,
    );
    assert_exit(
        &vbd(dir.path(), &["simulate", "--days", "15", "--out", "s2", "--quiet"]),
        0,
    );
    for name in ["trajectory.csv", "report.json"] {
        let a = std::fs::read(dir.path().join("s1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("s2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{ "dayz": 12 }"#).unwrap();
    let out = vbd(
        dir.path(),
        &["simulate", "--config", "cfg.json", "--out", "x"],
    );
    assert_exit(&out, 2);
}
