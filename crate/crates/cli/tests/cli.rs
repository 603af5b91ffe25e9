//! Drives the `madelab` binary.

use std::path::Path;
use std::process::{Command, Output};

use madelung_cli::presets::PRESETS;
use madelung_cli::run::{read_manifest, MANIFEST_FILE, TIMINGS_FILE};
use sha2::{Digest, Sha256};

fn madelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_madelab")).args(args).output().expect("spawn madelab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[grid]
extents = 20.0
points = 128

[initial]
kind = "gaussian"
width = 1.0
momentum = 1.0

[solver]
dt = 0.01
total_time = 0.5
snapshot_stride = 10

[trajectories]
count = 50
seed = 3

[output]
directory = "unused"
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn presets_are_listed_and_printable() {
    let o = madelab(&["presets"]);
    assert!(o.status.success());
    let listing = stdout(&o);
    for p in PRESETS {
        assert!(listing.contains(p.name), "{} missing from listing", p.name);
        let shown = madelab(&["presets", p.name]);
        assert!(shown.status.success());
        assert_eq!(stdout(&shown), p.text);
    }
    assert_eq!(madelab(&["presets", "no_such_thing"]).status.code(), Some(1));
}

#[test]
fn validate_reports_section_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(madelab(&["validate", "double_slit"]).status.success());
    let bad = write_config(tmp.path(), &SMALL.replace("points = 128", "pointz = 128"));
    let o = madelab(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[grid]"), "{}", stderr(&o));
    let stride = write_config(tmp.path(), &SMALL.replace("snapshot_stride = 10", "snapshot_stride = 7"));
    let o = madelab(&["validate", &stride]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[solver] snapshot_stride"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    assert_eq!(madelab(&["validate", "/nonexistent/scenario.toml"]).status.code(), Some(3));
}

#[test]
fn invalid_config_creates_no_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), &SMALL.replace("width = 1.0", "width = -1.0"));
    let out = tmp.path().join("out");
    let o = madelab(&["run", &bad, "--output-dir", out.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn run_writes_digested_artifacts_and_inspectable_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = madelab(&["run", &cfg, "--output-dir", out.to_str().unwrap(), "--seed", "11", "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let manifest = read_manifest(&out).unwrap();
    assert!(manifest.failure.is_none());
    assert_eq!(manifest.seeds["trajectories"], 11);
    // The override directory is a run option, not part of the scenario.
    assert!(manifest.config.contains("directory = \"unused\""));
    assert!(out.join(TIMINGS_FILE).is_file());
    assert!(!manifest.outputs.contains_key(MANIFEST_FILE));
    for (name, digest) in &manifest.outputs {
        let bytes = std::fs::read(out.join(name)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(&bytes)), digest, "{name}");
    }
    assert!(manifest.outputs.contains_key("trajectories.tsv"));

    let o = madelab(&["inspect", out.join("psi_0005.madfield").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("complex128"), "{text}");
    assert!(text.contains("[128]"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("time") && l.trim_end().ends_with("0.5")), "{text}");

    let junk = tmp.path().join("junk.madfield");
    std::fs::write(&junk, b"not a field").unwrap();
    assert_eq!(madelab(&["inspect", junk.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(madelab(&["inspect", tmp.path().join("absent").to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let manifests: Vec<_> = ["1", "3"]
        .iter()
        .map(|n| {
            let out = tmp.path().join(format!("t{n}"));
            let o = madelab(&["run", &cfg, "--output-dir", out.to_str().unwrap(), "--threads", n, "-q"]);
            assert!(o.status.success(), "{}", stderr(&o));
            std::fs::read(out.join(MANIFEST_FILE)).unwrap()
        })
        .collect();
    assert_eq!(manifests[0], manifests[1]);
}
