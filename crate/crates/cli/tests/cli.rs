use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dualris_cli::{EXIT_CHECKS, EXIT_IO, EXIT_PARSE, EXIT_USAGE, EXIT_VALIDATION};

const SMALL: &str = "devices = 3\nantennas = 8\nelements_y = 4\nelements_z = 4\ntrials = 3\n";

fn dualris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualris")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn power_sweep_writes_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = dualris(&[
        "sweep-power",
        "--config",
        &cfg,
        "--grid",
        "0,5,10,15,20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep_power.csv"));
    assert_eq!(rows.len(), 20);
    assert!(rows[0].starts_with("0,jbpda,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_power.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn single_scheme_single_point_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let o = dualris(&[
        "sweep-antennas",
        "--config",
        &cfg,
        "--grid",
        "8",
        "--schemes",
        "rs",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("sweep_antennas.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with(",3,\n"), "gap column stays empty without jbpda: {text}");
}

#[test]
fn same_seed_gives_identical_csv_and_other_seed_differs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = dualris(&[
            "sweep-power",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--grid",
            "0,23",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        fs::read(out.join("sweep_power.csv")).unwrap()
    };
    assert_eq!(run("a", "7"), run("b", "7"));
    assert_ne!(run("a", "7"), run("c", "8"));
}

#[test]
fn converge_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("c");
    let o = dualris(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("converge.csv")).unwrap();
    assert!(text.starts_with("iteration,mean_sum_rate_bps_hz\n1,"));
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn device_sweep_excludes_exhaustive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("d");
    let o = dualris(&[
        "sweep-devices",
        "--config",
        &cfg,
        "--grid",
        "2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&out.join("sweep_devices.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| !r.contains(",es,")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exhaustive"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_syntax = write_config(dir.path(), "devices 3\n");
    assert_eq!(
        dualris(&["sweep-power", "--config", &bad_syntax]).status.code(),
        Some(EXIT_PARSE)
    );
    let err = String::from_utf8_lossy(&dualris(&["sweep-power", "--config", &bad_syntax]).stderr).to_string();
    assert!(err.contains("line 1"), "{err}");

    let zero = write_config(dir.path(), "devices = 0\n");
    assert_eq!(
        dualris(&["sweep-power", "--config", &zero]).status.code(),
        Some(EXIT_VALIDATION)
    );

    let big_es = write_config(dir.path(), "devices = 12\nschemes = es\n");
    let o = dualris(&["sweep-power", "--config", &big_es]);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schemes"));

    let missing = dir.path().join("nope.cfg");
    assert_eq!(
        dualris(&["sweep-power", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(EXIT_IO)
    );

    assert_eq!(dualris(&["sweep-power", "--bogus"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(
        dualris(&["sweep-devices", "--devices", "4"]).status.code(),
        Some(EXIT_USAGE)
    );
    assert_eq!(
        dualris(&["sweep-power", "--schemes", "xyz"]).status.code(),
        Some(EXIT_USAGE)
    );
    assert_ne!(EXIT_CHECKS, 0);
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = dualris(&[
        "sweep-power",
        "--config",
        &cfg,
        "--grid",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_IO));
}

#[test]
fn validate_passes() {
    let o = dualris(&["validate"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    assert!(text.lines().count() >= 6 && !text.contains("FAIL"));
}
