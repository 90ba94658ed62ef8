//! End-to-end tests that drive the compiled `weedsim` binary the way a user
//! would: write a scenario file, invoke a subcommand, and inspect exit codes,
//! console output, and exported artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use weedsim::field::{CellClass, FieldGrid};
use weedsim::sched::ActivationPlan;
use weedsim::sim::{metrics_rows_from_csv, sweep_rows_from_csv};

fn weedsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weedsim"))
        .args(args)
        .env_remove("WEEDSIM_OUT")
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

/// Perfect detector, no drift, default field: every run should be a clean
/// sweep-the-board kill.
const IDEAL_SCENARIO: &str = r#"
[field]
rows = 7
cols = 15
weed_fraction = 0.25
seed = 11

[detector]
preset = "perfect"

[mission]
seeds = [1, 2, 3]
"#;

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// A 7x15 field whose first three rows start with eleven weeds each.
fn banded_field() -> FieldGrid {
    let mut truths = vec![CellClass::Crop; 7 * 15];
    for row in 0..3 {
        for col in 0..11 {
            truths[row * 15 + col] = CellClass::Weed;
        }
    }
    FieldGrid::from_truths(7, 15, 0.102, truths).unwrap()
}

fn dwell_batch_sizes(plan_csv: &str) -> Vec<usize> {
    ActivationPlan::rows_from_csv(plan_csv)
        .unwrap()
        .iter()
        .filter(|row| row.mode == "dwell")
        .map(|row| {
            row.active_source_indices
                .split(';')
                .filter(|s| !s.is_empty())
                .count()
        })
        .collect()
}

#[test]
fn validate_prints_the_resolved_plan() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);

    let out = weedsim(&["validate", &scenario]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("28.86"), "summary should quote the dwell: {text}");
    assert!(text.contains("scenario OK"), "missing OK line: {text}");
}

#[test]
fn validate_rejects_a_cap_above_the_power_budget() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);

    let out = weedsim(&[
        "validate",
        &scenario,
        "--set",
        "layout.max_simultaneous=16",
    ]);
    assert_eq!(exit_code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("exceeds"), "should cite the budget: {text}");
}

#[test]
fn validate_missing_file_is_an_io_failure() {
    let out = weedsim(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn run_exports_metrics_plans_and_detections() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);
    let out_dir = dir.path().join("out");

    let out = weedsim(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let rows =
        metrics_rows_from_csv(&fs::read_to_string(out_dir.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), [1, 2, 3]);
    for row in &rows {
        assert_eq!(row.weed_kill_fraction, 1.0, "seed {}", row.seed);
        assert_eq!(row.crop_collateral, 0, "seed {}", row.seed);
        assert_eq!(row.killed, row.total_weeds, "seed {}", row.seed);
    }

    for seed in [1, 2, 3] {
        let plan = fs::read_to_string(out_dir.join(format!("plan-{seed}.csv"))).unwrap();
        assert!(!ActivationPlan::rows_from_csv(&plan).unwrap().is_empty());
        let detections =
            fs::read_to_string(out_dir.join(format!("detections-{seed}.csv"))).unwrap();
        assert_eq!(detections.lines().count(), 7 * 15 + 1, "header + one row per cell");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 3);
    assert_eq!(summary["runs"][0]["weed_kill_fraction"], 1.0);
}

#[test]
fn plan_batches_match_the_default_cap() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("field.map"), banded_field().save_field()).unwrap();
    let scenario = write_scenario(
        dir.path(),
        "banded.toml",
        r#"
[field]
rows = 7
cols = 15
map = "field.map"

[detector]
preset = "perfect"

[mission]
seeds = [5]
"#,
    );
    let out_dir = dir.path().join("out");

    let out = weedsim(&["run", &scenario, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let plan = fs::read_to_string(out_dir.join("plan-5.csv")).unwrap();
    assert_eq!(dwell_batch_sizes(&plan), [15, 15, 3], "33 weeds under a cap of 15");
}

#[test]
fn plan_batches_honor_the_published_cap_on_request() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("field.map"), banded_field().save_field()).unwrap();
    let scenario = write_scenario(
        dir.path(),
        "banded.toml",
        r#"
[field]
rows = 7
cols = 15
map = "field.map"

[detector]
preset = "perfect"

[mission]
seeds = [5]
"#,
    );
    let out_dir = dir.path().join("out");

    let out = weedsim(&[
        "run",
        &scenario,
        "--set",
        "layout.honor_paper_16=true",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let plan = fs::read_to_string(out_dir.join("plan-5.csv")).unwrap();
    assert_eq!(dwell_batch_sizes(&plan), [16, 16, 1], "33 weeds under a cap of 16");
}

#[test]
fn plot_writes_a_heatmap_image() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);
    let out_dir = dir.path().join("out");

    let out = weedsim(&[
        "run",
        &scenario,
        "--plot",
        "--seed",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let img = image::open(out_dir.join("heatmap-2.png")).unwrap();
    assert_eq!((img.width(), img.height()), (15 * 20 + 1, 7 * 20 + 1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);
    let first = dir.path().join("first");
    let second = dir.path().join("second");

    for out_dir in [&first, &second] {
        let out = weedsim(&[
            "run",
            &scenario,
            "--seed",
            "7",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    }

    for name in ["plan-7.csv", "detections-7.csv", "metrics.csv"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name} should replay exactly"
        );
    }
}

#[test]
fn seed_flag_overrides_the_scenario_seed_list() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);
    let out_dir = dir.path().join("out");

    let out = weedsim(&[
        "run",
        &scenario,
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let rows =
        metrics_rows_from_csv(&fs::read_to_string(out_dir.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].seed, 9);
    assert!(out_dir.join("plan-9.csv").exists());
    assert!(!out_dir.join("plan-1.csv").exists());
}

#[test]
fn env_var_sets_the_output_dir() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);
    let env_dir = dir.path().join("from-env");

    let out = Command::new(env!("CARGO_BIN_EXE_weedsim"))
        .args(["run", &scenario, "--seed", "1"])
        .env("WEEDSIM_OUT", &env_dir)
        .output()
        .expect("binary should launch");
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(env_dir.join("metrics.csv").exists());
}

#[test]
fn sweep_detector_quality_orders_misses() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "stock.toml",
        "[field]\nseed = 3\n\n[mission]\nseeds = [0]\n",
    );
    let out_dir = dir.path().join("out");

    let out = weedsim(&[
        "sweep",
        &scenario,
        "--axis",
        "detector",
        "--values",
        "perfect,paper-98,paper-95",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let rows =
        sweep_rows_from_csv(&fs::read_to_string(out_dir.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.seeds >= 30), "sweeps use a seed batch");
    assert_eq!(rows[0].mean_missed, 0.0, "a perfect detector misses nothing");
    assert!(
        rows[0].mean_missed < rows[1].mean_missed && rows[1].mean_missed < rows[2].mean_missed,
        "misses should grow as the detector degrades: {:?}",
        rows.iter().map(|r| r.mean_missed).collect::<Vec<_>>()
    );
    assert!(
        rows[1].mean_detection_accuracy > rows[2].mean_detection_accuracy,
        "accuracy should fall with the weaker detector"
    );
    assert!(rows[0].feasible_fraction.is_none(), "dwell missions have no verdict");
}

#[test]
fn sweep_speed_gates_continuous_feasibility() {
    let dir = TempDir::new().unwrap();
    let truths: Vec<CellClass> = (0..15)
        .map(|c| if c % 5 == 0 { CellClass::Weed } else { CellClass::Crop })
        .collect();
    let strip = FieldGrid::from_truths(1, 15, 0.102, truths).unwrap();
    fs::write(dir.path().join("strip.map"), strip.save_field()).unwrap();
    let scenario = write_scenario(
        dir.path(),
        "pass.toml",
        r#"
[field]
rows = 1
cols = 15
map = "strip.map"

[recipe]
preset = "phase2"

[detector]
preset = "perfect"

[mission]
mode = "continuous"
"#,
    );
    let out_dir = dir.path().join("out");

    // The source column takes 15 * 0.102 m / speed to cross a cell, and the
    // recipe needs just under 1.8 s: feasible at 0.5 m/s, not at 1 or 2.
    let out = weedsim(&[
        "sweep",
        &scenario,
        "--axis",
        "speed",
        "--values",
        "0.5,1.0,2.0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let rows =
        sweep_rows_from_csv(&fs::read_to_string(out_dir.join("sweep.csv")).unwrap()).unwrap();
    let feasible: Vec<Option<f64>> = rows.iter().map(|r| r.feasible_fraction).collect();
    assert_eq!(feasible, [Some(1.0), Some(0.0), Some(0.0)]);
    assert_eq!(rows[0].mean_weed_kill_fraction, 1.0);
    assert_eq!(rows[1].mean_weed_kill_fraction, 0.0, "underdosed, not missed");
}

#[test]
fn sweep_rejects_an_empty_value_list() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);

    let out = weedsim(&["sweep", &scenario, "--axis", "speed", "--values", ","]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("at least one value"));
}

#[test]
fn sweep_rejects_an_unknown_axis() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);

    let out = weedsim(&["sweep", &scenario, "--axis", "tilt", "--values", "1,2"]);
    assert_eq!(exit_code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("tilt") && text.contains("speed"), "should list axes: {text}");
}

#[test]
fn bad_set_syntax_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let scenario = write_scenario(dir.path(), "ideal.toml", IDEAL_SCENARIO);

    let out = weedsim(&["validate", &scenario, "--set", "no-equals-sign"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("KEY=VALUE"));
}
