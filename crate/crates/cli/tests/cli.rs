use std::process::Command;

use hctree_experiments::presets::{preset, PRESETS};
use hctree_experiments::runner::TRAILER;
use hctree_experiments::{run, ExperimentSpec};

const GAP_SPEC: &str = "\
# three heights of the binary tree
experiment = gap-scaling
b = 2
h = 1..3
lambda = 1
boundary = free
seeds = 7
";

fn hctree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hctree"))
}

#[test]
fn gap_scaling_example_has_one_row_per_height() {
    let spec = ExperimentSpec::parse(GAP_SPEC).unwrap();
    let out = run(&spec).unwrap();
    assert_eq!(out.rows.len(), 3);
    assert_eq!(out.summary.ok, 3);
    let n = out.header.len();
    assert_eq!(&out.header[n - TRAILER.len()..], &TRAILER);
    let hash = spec.hash();
    for row in &out.rows {
        assert_eq!(row[n - 5], "ok");
        assert_eq!(row[n - 1], hash);
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let mut spec = preset("sensitivity").unwrap();
    spec.set("samples", "512").unwrap();
    let a = run(&spec).unwrap().to_csv_string().unwrap();
    let b = run(&spec).unwrap().to_csv_string().unwrap();
    assert_eq!(a, b);
}

#[test]
fn spec_hash_ignores_order_and_output_path() {
    let a = ExperimentSpec::parse(GAP_SPEC).unwrap();
    let reordered = "boundary = free\nseeds = 7\nlambda = 1\nh = 1..3\nb = 2\nexperiment = gap-scaling\nout = x.csv\n";
    let b = ExperimentSpec::parse(reordered).unwrap();
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.set("lambda", "2").unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn malformed_specs_are_rejected() {
    assert!(ExperimentSpec::parse("experiment = gap-scaling\nb = 2\nb = 3\n").is_err());
    assert!(ExperimentSpec::parse("experiment = gap-scaling\ncolour = red\n").is_err());
    assert!(ExperimentSpec::parse("b = 2\n").is_err());
    assert!(ExperimentSpec::parse("experiment = nonsense\n").is_err());
    // No heights: the grid is empty.
    let empty = ExperimentSpec::parse("experiment = gap-scaling\nb = 2\nlambda = 1\n").unwrap();
    assert!(run(&empty).is_err());
}

#[test]
fn every_preset_validates() {
    for name in PRESETS {
        preset(name).unwrap().validate().unwrap();
    }
    assert!(preset("no-such-preset").is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("gap.spec");
    std::fs::write(&spec_path, GAP_SPEC).unwrap();
    let csv_path = dir.path().join("gap.csv");
    let summary_path = dir.path().join("summary.json");
    let status = hctree()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&csv_path)
        .arg("--summary")
        .arg(&summary_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert_eq!(summary["rows"], 3);

    // A leaf pattern of the wrong length fails inside its cell.
    let bad_cell = hctree()
        .args(["gap-scaling", "--b", "2", "--h", "2", "--lambda", "1", "--boundary", "hex:ff"])
        .output()
        .unwrap();
    assert_eq!(bad_cell.status.code(), Some(1), "{}", String::from_utf8_lossy(&bad_cell.stderr));
    let stdout = String::from_utf8(bad_cell.stdout).unwrap();
    assert!(stdout.lines().nth(1).unwrap().contains(",error,"));

    let bad_spec = hctree().args(["run", "--spec"]).arg(dir.path().join("missing.spec")).output().unwrap();
    assert_eq!(bad_spec.status.code(), Some(2));
    let bad_key = hctree().args(["thresholds", "--set", "colour=red"]).output().unwrap();
    assert_eq!(bad_key.status.code(), Some(2));
}

#[test]
fn subcommand_matches_library_run() {
    let out = hctree()
        .args(["asympunn", "--h", "1..4", "--set", "p=0.4", "--set", "a=1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut spec = hctree_experiments::presets::default_for(hctree_experiments::spec::ExperimentKind::Asympunn);
    spec.set("h", "1..4").unwrap();
    spec.set("p", "0.4").unwrap();
    spec.set("a", "1.5").unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), run(&spec).unwrap().to_csv_string().unwrap());
}
