use std::path::Path;
use std::process::{Command, Output};

use passive_glmb_harness::scenario_one;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passive-glmb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let mut c = scenario_one();
    c.duration = 4;
    c.mc_trials = 2;
    c.birth.particles_per_track = 50;
    c.truth.retain(|t| t.birth <= 4);
    let path = dir.join("small.json");
    std::fs::write(&path, c.to_json()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_one_row_per_step_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let o = cli(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--strategy",
        "random",
        "--dump-estimates",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let per_step = std::fs::read_to_string(out.join("per_step.csv")).unwrap();
    let mut lines = per_step.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,k,ospa,ospa_loc,ospa_card,estimated,truth,selected,rewards,evaluations,discarded_mass,status"
    );
    assert_eq!(lines.count(), 8);
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    assert_eq!(
        std::fs::read_to_string(out.join("estimates.jsonl"))
            .unwrap()
            .lines()
            .count(),
        8
    );
    assert!(out.join("timing.json").exists());
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--config", &config, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert!(cli(&args).status.success());
        std::fs::read_to_string(out.join("per_step.csv")).unwrap()
    };
    let base = run("a", &["--strategy", "random", "--trials", "1"]);
    assert_eq!(base, run("b", &["--strategy", "random", "--trials", "1"]));
    assert_ne!(
        base,
        run("c", &["--strategy", "random", "--trials", "1", "--seed", "9"])
    );
    let one_sensor = run("d", &["--strategy", "greedy", "--sensors", "1", "--trials", "1"]);
    assert!(one_sensor
        .lines()
        .skip(1)
        .all(|l| !l.split(',').nth(7).unwrap().contains(';')));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1}").unwrap();
    let o = cli(&["validate-config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(
        cli(&["validate-config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let config = small_config(dir.path());
    let o = cli(&[
        "run",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--sensors",
        "11",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_configs_validate() {
    let dir = tempfile::tempdir().unwrap();
    for s in ["1", "2"] {
        let o = cli(&["default-config", s]);
        assert!(o.status.success());
        let path = dir.path().join(format!("s{s}.json"));
        std::fs::write(&path, &o.stdout).unwrap();
        let v = cli(&["validate-config", path.to_str().unwrap()]);
        assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    }
}

#[test]
fn oracle_subcommands_agree() {
    let o = cli(&["oracle", "assignment", "4,1,3;2,0,5;3,2,2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["costs_agree"], true);
    assert_eq!(v["murty"].as_array().unwrap().len(), 6);
    assert_eq!(v["murty"][0]["cost"], 5.0);

    let o = cli(&["oracle", "inner-product", "0", "1", "1", "2"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["relative_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(
        cli(&["oracle", "inner-product", "0", "-1", "1", "2"]).status.code(),
        Some(2)
    );
}
