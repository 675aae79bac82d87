use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stratseir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratseir"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "command failed: {stderr}");
    stderr
}

/// Ten deciles and one age group with short chains, so every command
/// (including the mixing presets) applies.
fn write_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "layout": {"num_deprivation": 10, "num_age": 1, "age_labels": ["all"]},
        "chain": {"chains": 2, "iterations": 200, "burn_in": 100, "thin": 5},
        "forecast": {"horizon": 21, "draws": 20},
        "synthetic": {
            "num_days": 21,
            "population": 5000,
            "initial_exposed": 10,
            "initial_infectious": 10,
            "params": {"psi": [0.5], "rho": [0.7], "gamma1": 0.1, "alpha0": 5.0}
        },
        "seed": 3
    });
    let path = dir.join("synth.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let synth_cfg = write_config(root);
    let data = root.join("data");
    ok(&stratseir(&["synth", "--config", s(&synth_cfg), "--out", s(&data)]));
    for f in ["cases.csv", "population.csv", "initial_state.csv", "provenance.json", "config.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let cfg = data.join("config.json");
    let fit = root.join("fit");
    ok(&stratseir(&["fit", "--config", s(&cfg), "--out", s(&fit)]));
    for f in ["posterior.csv", "terminal_states.csv", "initial_state.csv", "diagnostics.json", "fit.json"] {
        assert!(fit.join(f).exists(), "{f}");
    }
    let posterior = std::fs::read_to_string(fit.join("posterior.csv")).unwrap();
    assert_eq!(posterior.lines().count(), 1 + 2 * 20);

    let fc = root.join("forecast");
    ok(&stratseir(&["forecast", "--config", s(&cfg), "--posterior", s(&fit), "--out", s(&fc)]));
    let forecast = std::fs::read_to_string(fc.join("forecast.csv")).unwrap();
    assert!(forecast.starts_with("stratum,age_group,imd_decile,date,mean,q05,q95\n"));
    assert_eq!(forecast.lines().count(), 1 + 10 * 21);
    for f in ["forecast_by_age.csv", "forecast_by_imd.csv", "forecast_by_imd_per_100k.csv", "forecast_total.csv", "switching.csv"] {
        assert!(fc.join(f).exists(), "{f}");
    }

    let rt = root.join("rt");
    ok(&stratseir(&["rt", "--config", s(&cfg), "--posterior", s(&fit), "--out", s(&rt)]));
    let rt_csv = std::fs::read_to_string(rt.join("rt.csv")).unwrap();
    assert!(rt_csv.starts_with("stratum,age_group,imd_decile,mean,q05,q95,exceedance\n"));
    assert_eq!(rt_csv.lines().count(), 11);

    let crps = root.join("crps");
    ok(&stratseir(&["crps", "--config", s(&cfg), "--posterior", s(&fit), "--out", s(&crps)]));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(crps.join("crps_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "in-sample");
    assert!(summary["median"].as_f64().unwrap() >= 0.0);

    let sc = root.join("scenario");
    let log = ok(&stratseir(&[
        "scenario", "--config", s(&cfg), "--posterior", s(&fit), "--preset", "paper-mixing-full", "--out", s(&sc),
    ]));
    assert!(log.contains("C_D[1,1](t=45) = 1.17850"), "{log}");
    assert!(log.contains("C_D[10,10](t=45) = 5.19475"), "{log}");
    assert!(sc.join("scenario.csv").exists() && sc.join("switching.csv").exists());
    let switching = std::fs::read_to_string(sc.join("switching.csv")).unwrap();
    assert!(switching.starts_with("day,date,imd_1,"));

    let dep = root.join("depletion");
    ok(&stratseir(&[
        "scenario", "--config", s(&cfg), "--posterior", s(&fit), "--preset", "paper-depletion-5x", "--out", s(&dep),
    ]));

    let sim = root.join("sim");
    ok(&stratseir(&["simulate", "--config", s(&cfg), "--out", s(&sim)]));
    let traj = std::fs::read_to_string(sim.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("day,date,age_group,imd_decile,s,e,i,r,new_exposed,new_infectious,new_removed\n"));
}

#[test]
fn repeated_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let synth_cfg = write_config(root);
    let data = root.join("data");
    ok(&stratseir(&["synth", "--config", s(&synth_cfg), "--out", s(&data)]));
    let cfg = data.join("config.json");
    let run = |name: &str| {
        let fit = root.join(format!("fit_{name}"));
        let fc = root.join(format!("fc_{name}"));
        ok(&stratseir(&["fit", "--config", s(&cfg), "--out", s(&fit)]));
        ok(&stratseir(&["forecast", "--config", s(&cfg), "--posterior", s(&fit), "--out", s(&fc)]));
        (
            std::fs::read(fit.join("posterior.csv")).unwrap(),
            std::fs::read(fc.join("forecast.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
    let other = root.join("data_seed");
    ok(&stratseir(&["synth", "--config", s(&synth_cfg), "--seed", "4", "--out", s(&other)]));
    assert_ne!(
        std::fs::read(data.join("cases.csv")).unwrap(),
        std::fs::read(other.join("cases.csv")).unwrap()
    );
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let synth_cfg = write_config(root);
    let data = root.join("data");
    ok(&stratseir(&["synth", "--config", s(&synth_cfg), "--out", s(&data)]));
    let files = ["cases.csv", "population.csv", "initial_state.csv", "config.json"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(data.join(f)).unwrap()).collect();
    ok(&stratseir(&["fit", "--config", s(&data.join("config.json")), "--out", s(&root.join("fit"))]));
    let after: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(data.join(f)).unwrap()).collect();
    assert_eq!(before, after);
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    stderr.lines().last().unwrap_or_default().to_string()
}

#[test]
fn failures_exit_nonzero_with_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let bad_json = root.join("bad.json");
    std::fs::write(&bad_json, r#"{"sede": 1}"#).unwrap();
    let line = error_line(&stratseir(&["synth", "--config", s(&bad_json), "--out", s(&root.join("o"))]));
    assert!(line.starts_with("error[input]: "), "{line}");

    let no_cases = root.join("empty.json");
    std::fs::write(&no_cases, r#"{"data": {"population": "pop.csv"}}"#).unwrap();
    let line = error_line(&stratseir(&["forecast", "--config", s(&no_cases), "--out", s(&root.join("o"))]));
    assert!(line.starts_with("error[config]: "), "{line}");

    let cases = root.join("cases.csv");
    std::fs::write(&cases, "date,age_group,imd_decile,count\n2021-01-01,0-9,11,3\n").unwrap();
    let cfg = root.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"layout": {"num_deprivation": 10, "num_age": 1}, "synthetic": {"population": 100}, "data": {"cases": "cases.csv"}}"#,
    )
    .unwrap();
    let line = error_line(&stratseir(&["fit", "--config", s(&cfg), "--out", s(&root.join("o"))]));
    assert!(line.starts_with("error[input]: ") && line.contains("row 2"), "{line}");

    let line = error_line(&stratseir(&["scenario", "--config", s(&cfg), "--out", s(&root.join("o"))]));
    assert!(line.starts_with("error[config]: "), "{line}");
}
