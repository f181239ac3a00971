use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fdi_core::pipeline::{Manifest, RunConfig};
use fdi_core::signals::SystemKind;

fn fdi(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdi"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = fdi(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn fast_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--fast", "--baseline"], dir.path());
    for name in [
        "series.csv",
        "models.json",
        "dist.csv",
        "dist.json",
        "events.jsonl",
        "library.json",
        "report_detect.json",
        "report_isolate.json",
        "comparison.csv",
        "mds.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let manifest = Manifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.config_hash, manifest.config.hash().unwrap());
    let mut expected = RunConfig::for_system(SystemKind::Narma, 0).fast();
    expected.baseline.enabled = true;
    assert_eq!(manifest.config, expected);
    let comparison = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 3);
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(
        &["run", "--fast", "--system", "threetank", "--seed", "2"],
        &a,
    );
    let manifest = a.join("manifest.json");
    ok(&["run", "--config", manifest.to_str().unwrap()], &b);
    for name in ["events.jsonl", "dist.csv", "library.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn evaluate_without_detect_reports_the_missing_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdi(&["evaluate", "--fast"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("events.jsonl"));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"window\": \"wide\"}").unwrap();
    let o = fdi(
        &["generate", "--config", path.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    fs::write(&path, "{\"window\": 0}").unwrap();
    let o = fdi(
        &["generate", "--config", path.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn staged_commands_chain_through_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["generate", "--fast"], out);
    let stdout = ok(&["fit"], out);
    // 7000 steps, window 100, stride 5
    assert!(
        stdout.starts_with(&format!("{} model points", (7000 - 100) / 5 + 1)),
        "{stdout}"
    );
    ok(&["distances", "--method", "closed"], out);
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("dist.json")).unwrap()).unwrap();
    assert!(meta.to_string().contains("closed"));
    ok(&["mds", "--dims", "2"], out);
    let mds = fs::read_to_string(out.join("mds.csv")).unwrap();
    assert_eq!(mds.lines().next().unwrap(), "window_start,x1,x2");
    assert!(mds.lines().skip(1).all(|l| l.split(',').count() == 3));
    ok(&["detect"], out);
    let stdout = ok(&["evaluate"], out);
    assert!(stdout.starts_with("FDR "), "{stdout}");
}

#[test]
fn output_path_must_be_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    assert_eq!(fdi(&["generate"], &file).status.code(), Some(1));
}
