//! End-to-end tests of the `medeeg` binary: each test gets a fresh temp
//! directory, writes a small config, and drives the real executable the way
//! a user would. Cohorts here are deliberately tiny (2–4 subjects, 6
//! channels, 30 s per condition) — large-cohort behaviour has its own
//! dedicated test target.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use medeeg_cli::report::parse_cell;
use medeeg_core::CvReport;

/// Run the built binary with `args`, rooted at `dir` so that relative
/// default paths stay inside the sandbox.
fn medeeg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medeeg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should spawn")
}

fn assert_code(out: &Output, expected: i32) {
    let code = out.status.code().expect("no signal");
    assert_eq!(
        code,
        expected,
        "exit {code}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Write the shared test config: 2 subjects, 6 channels, 30 s per
/// condition, everything seeded. `extra` is spliced in as additional
/// top-level JSON fields.
fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    let body = format!(
        r#"{{
  "band": "alpha",
  "seeds": {{ "cohort": 42, "plan": 7, "train": 9 }},
  "paths": {{ "data": "data", "out": "out" }},
  "synth": {{ "n_subjects": 2, "n_channels": 6, "minutes_per_condition": 0.5 }}{}{extra}
}}"#,
        if extra.is_empty() { "" } else { "," }
    );
    fs::write(&path, body).unwrap();
    path
}

fn read_report(dir: &Path) -> CvReport {
    let text = fs::read_to_string(dir.join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn synth_writes_one_file_per_subject_condition_plus_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("config.json"),
        r#"{
  "seeds": { "cohort": 1, "plan": 2, "train": 3 },
  "paths": { "data": "cohort", "out": "out" },
  "synth": { "n_subjects": 4, "n_channels": 6, "minutes_per_condition": 0.25 }
}"#,
    )
    .unwrap();
    let out = medeeg(dir, &["synth", "--config", "config.json"]);
    assert_code(&out, 0);

    let data = dir.join("cohort");
    let mut eegb: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".eegb"))
        .collect();
    eegb.sort();
    assert_eq!(eegb.len(), 8, "4 subjects × 2 conditions");
    assert_eq!(eegb[0], "s00_meditation.eegb");
    assert_eq!(eegb[1], "s00_rest.eegb");
    assert!(data.join("manifest.json").exists());
}

#[test]
fn synth_is_idempotent_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let snapshot: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir.join("data"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    assert!(!snapshot.is_empty());

    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    for (path, before) in snapshot {
        assert_eq!(fs::read(&path).unwrap(), before, "{path:?} changed on rerun");
    }
}

#[test]
fn run_writes_reports_that_match_the_shipped_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(dir, &["run", "--config", "config.json", "--pairs", "2"]);
    assert_code(&out, 0);

    // report.json parses back into the library type…
    let report = read_report(dir);
    assert_eq!(report.fold_ids.len(), 20, "2 subjects × 10 folds");
    assert!(report.leakage_audit_passed);

    // …and validates against the schema we ship.
    let schema: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../schemas/report.schema.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let instance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap();
    if let Err(errors) = compiled.validate(&instance) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("report.json violates the schema: {msgs:?}");
    }

    // The schema has teeth: a report claiming a failed audit is invalid.
    let mut tampered = instance.clone();
    tampered["leakage_audit_passed"] = serde_json::Value::Bool(false);
    assert!(!compiled.is_valid(&tampered));
    let mut extended = instance;
    extended["surprise"] = serde_json::Value::Null;
    assert!(!compiled.is_valid(&extended));

    // report.csv rows mirror the report exactly.
    let csv = fs::read_to_string(dir.join("out/report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fold_id,accuracy_pct"));
    let rows: Vec<(&str, f64)> = lines
        .map(|l| {
            let (id, acc) = l.split_once(',').unwrap();
            (id, acc.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), report.fold_ids.len());
    for (i, (id, acc)) in rows.iter().enumerate() {
        assert_eq!(*id, report.fold_ids[i]);
        assert_eq!(*acc, report.per_fold_accuracy_pct[i], "row {i} must round-trip");
    }
}

#[test]
fn identical_configs_produce_byte_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let args = ["run", "--config", "config.json", "--pairs", "2"];
    assert_code(&medeeg(dir, &args), 0);
    let first = fs::read(dir.join("out/report.json")).unwrap();
    let first_csv = fs::read(dir.join("out/report.csv")).unwrap();
    assert_code(&medeeg(dir, &args), 0);
    assert_eq!(fs::read(dir.join("out/report.json")).unwrap(), first);
    assert_eq!(fs::read(dir.join("out/report.csv")).unwrap(), first_csv);
}

#[test]
fn malformed_manifest_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    fs::write(dir.join("data/manifest.json"), "{definitely not json").unwrap();
    let out = medeeg(dir, &["run", "--config", "config.json", "--pairs", "2"]);
    assert_code(&out, 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("malformed manifest"),
        "stderr should name the problem"
    );
    assert!(!dir.join("out").exists(), "no partial outputs on validation failure");
}

#[test]
fn tampered_recording_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let victim = dir.join("data/s01_rest.eegb");
    let mut bytes = fs::read(&victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    fs::write(&victim, bytes).unwrap();
    let out = medeeg(dir, &["run", "--config", "config.json", "--pairs", "2"]);
    assert_code(&out, 2);
    assert!(!dir.join("out").exists());
}

#[test]
fn inter_mode_holds_out_each_subject() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(
        dir,
        &["run", "--config", "config.json", "--pairs", "2", "--mode", "inter"],
    );
    assert_code(&out, 0);
    let report = read_report(dir);
    assert_eq!(report.fold_ids, vec!["s00", "s01"]);
}

#[test]
fn svdnn_run_reports_frozen_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(
        dir,
        &[
            "run",
            "--config",
            "config.json",
            "--pipeline",
            "svd-nn",
            "--k-grid",
            "2,4",
        ],
    );
    assert_code(&out, 0);
    let report = read_report(dir);
    let selections = report.selected_k.expect("svd-nn reports its selection");
    assert_eq!(selections.len(), 2, "one frozen k per subject in intra mode");
    assert!(selections.iter().all(|s| s.selected_k >= 1));
    assert!(report.leakage_audit_passed);
}

#[test]
fn lstm_run_honours_tuning_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // Shrink the network so this stays a smoke test, not a training run.
    write_config(
        dir,
        r#"
  "tuning": { "lstm": { "hidden": 8, "epochs": 5 } }"#,
    );
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(
        dir,
        &[
            "run",
            "--config",
            "config.json",
            "--pipeline",
            "csp-lda-lstm",
            "--pairs",
            "2",
        ],
    );
    assert_code(&out, 0);
    assert_eq!(read_report(dir).fold_ids.len(), 20);
}

#[test]
fn sweep_collapses_to_one_cell_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(dir, "");
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(
        dir,
        &["sweep", "--config", "config.json", "--alpha", "0.01", "--pairs", "2"],
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "header plus a single row");
    assert_eq!(lines[0], "n_pairs,1e-2");
    let (pairs, cell) = lines[1].split_once(',').unwrap();
    assert_eq!(pairs, "2");
    let (mean, sd) = parse_cell(cell).expect("cell is mean±sd");
    assert!((0.0..=100.0).contains(&mean));
    assert!(sd >= 0.0);
}

#[test]
fn sweep_grid_comes_from_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_config(
        dir,
        r#"
  "sweep": { "pair_counts": [2, 3], "alphas": [0.1, 0.0] }"#,
    );
    assert_code(&medeeg(dir, &["synth", "--config", "config.json"]), 0);
    let out = medeeg(dir, &["sweep", "--config", "config.json"]);
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n_pairs,1e-1,classical");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3);
        assert!(parse_cell(cells[1]).is_some());
        assert!(parse_cell(cells[2]).is_some());
    }
}

#[test]
fn missing_seeds_and_bad_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // No config, no seed flags.
    let out = medeeg(dir, &["synth"]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds are required"));

    // Unknown pipeline name is a clap-level parse error, also exit 2.
    let out = medeeg(
        dir,
        &[
            "run", "--pipeline", "csp-svm", "--seed-cohort", "1", "--seed-plan", "2",
            "--seed-train", "3",
        ],
    );
    assert_code(&out, 2);

    // Unreadable config path.
    let out = medeeg(dir, &["run", "--config", "nope.json"]);
    assert_code(&out, 2);
}
