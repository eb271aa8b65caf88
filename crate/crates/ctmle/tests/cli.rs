//! End-to-end tests of the `ctmle` binary: exit-code contract, JSON output,
//! config-file layering, and reproducible simulation artifacts.

use std::io::Write;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctmle"))
}

fn write_cohort(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cohort.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "w1,w2,a,y").unwrap();
    // deterministic pseudo-data: a depends on w1, y on both
    let mut state = 88172645463325252u64;
    let mut unit = || {
        // xorshift64
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..300 {
        let w1 = unit() * 2.0 - 1.0;
        let w2 = unit() * 2.0 - 1.0;
        let g = 1.0 / (1.0 + (-w1).exp());
        let a = usize::from(unit() < g);
        let y = a as f64 + w1 + 0.5 * w2 + (unit() - 0.5);
        writeln!(f, "{w1:.6},{w2:.6},{a},{y:.6}").unwrap();
    }
    path
}

#[test]
fn estimate_succeeds_with_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_cohort(dir.path());
    let out_path = dir.path().join("report.json");
    let output = bin()
        .args(["estimate", "--data"])
        .arg(&data)
        .args(["--estimator", "ctmle", "--seed", "5", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("95% confidence interval"));

    // the written report re-parses and matches the console JSON
    let text = std::fs::read_to_string(&out_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(parsed["psi"].is_f64());
    assert!(parsed["ci"]["lo"].as_f64().unwrap() < parsed["ci"]["hi"].as_f64().unwrap());
    assert_eq!(parsed["config"]["seed"].as_u64().unwrap(), 5);
    assert!(stdout.contains(&format!("{}", parsed["psi"])));
}

#[test]
fn estimate_respects_config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_cohort(dir.path());
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        "[estimate]\nestimator = \"tmle\"\nseed = 9\nlevel = 0.9\n",
    )
    .unwrap();
    // --estimator flag beats the file; seed and level come from the file
    let output = bin()
        .args(["estimate", "--data"])
        .arg(&data)
        .arg("--config")
        .arg(&cfg_path)
        .args(["--estimator", "onestep"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let json_part = stdout.split("\nestimator").next().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(parsed["config"]["estimator"], "onestep");
    assert_eq!(parsed["config"]["seed"].as_u64().unwrap(), 9);
    assert!(stdout.contains("90% confidence interval"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_cohort(dir.path());
    // unknown estimator
    let out = bin()
        .args(["estimate", "--data"])
        .arg(&data)
        .args(["--estimator", "mystery"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // missing column
    let out = bin()
        .args(["estimate", "--data"])
        .arg(&data)
        .args(["--treatment", "nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // nonexistent file
    let out = bin()
        .args(["estimate", "--data", "/definitely/not/here.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // invalid dgp name
    let out = bin().args(["simulate", "--dgp", "sim9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimation_failure_exits_1() {
    // all-treated data: the ATE contrast has an empty control arm
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("onearm.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "w1,a,y").unwrap();
    for i in 0..40 {
        writeln!(f, "{}.0,1,{}.5", i % 5, i % 7).unwrap();
    }
    let out = bin()
        .args(["estimate", "--data"])
        .arg(&path)
        .args(["--estimator", "ctmle"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let output = bin()
            .args([
                "simulate", "--dgp", "sim1", "--gamma", "0", "--n", "80", "--reps", "10",
                "--seed", "1", "--out",
            ])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
        (
            std::fs::read(out_dir.join("sim_report.json")).unwrap(),
            std::fs::read(out_dir.join("sim_metrics.csv")).unwrap(),
            output.stdout,
        )
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first.0, second.0, "sim_report.json differs between identical runs");
    assert_eq!(first.1, second.1, "sim_metrics.csv differs between identical runs");
    assert_eq!(first.2, second.2, "console summary differs between identical runs");

    // KDE curves exist for each estimator in the lineup
    for label in ["tmle", "ctmle", "onestep", "collab_onestep"] {
        assert!(dir.path().join("a").join(format!("kde_{label}.csv")).exists());
    }
}

#[test]
fn simulate_sim2_reports_zero_truth_and_rejects_single_rep() {
    let out = bin()
        .args(["simulate", "--dgp", "sim2", "--n", "60", "--reps", "3", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("truth 0"), "stdout: {stdout}");

    let out = bin()
        .args(["simulate", "--dgp", "sim1", "--n", "60", "--reps", "1", "--seed", "2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn multiarm_estimate_reports_wald_test() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("arms.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "w1,a,y").unwrap();
    let mut state = 1234567u64;
    let mut unit = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..240 {
        let w1 = unit() * 2.0 - 1.0;
        let arm = (unit() * 3.0) as usize;
        let y = arm as f64 * 0.5 + w1 + unit();
        writeln!(f, "{w1:.5},{arm},{y:.5}").unwrap();
    }
    let out = bin()
        .args(["estimate", "--multiarm", "--data"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Wald test of equal arm means"));
    let json_part = stdout.split("\narm").next().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(parsed["arms"].as_array().unwrap().len(), 3);
    assert!(parsed["wald"]["p_value"].is_f64());
}

#[test]
fn imputation_flag_fills_missing_covariates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gaps.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "w1,a,y").unwrap();
    for i in 0..60 {
        let w = if i % 10 == 0 { String::new() } else { format!("{}.25", i % 4) };
        writeln!(f, "{w},{},{}.5", i % 2, i % 3).unwrap();
    }
    // without --impute: usage error; with it: success
    let out = bin().args(["estimate", "--data"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["estimate", "--impute", "--data"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
