use std::path::Path;
use std::process::{Command, Output};

use pairrec::harness::ResultTable;

fn pairrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairrec")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn rhs_sweep_to_stdout_parses() {
    let out = pairrec(&["rhs-sweep", "--t-grid", "1,2,3", "--sigma2-grid", "0,0.1"]);
    assert_eq!(code(&out), 0);
    let table = ResultTable::from_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.meta("experiment"), Some("rhs-sweep"));
    assert_eq!(table.meta("seed"), Some("0"));
    assert!(table.meta("config").unwrap().contains("\"horizon_grid\":[1,2,3]"));
}

#[test]
fn json_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.json");
    let out = pairrec(&[
        "game",
        "--days",
        "10",
        "--ground-truth-games",
        "2000",
        "--sigma2-grid",
        "1e-3,1e-1",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = ResultTable::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(table.columns, ["sigma2_assumed", "rel_error", "sign_accuracy"]);
    assert_eq!(table.rows.len(), 2);
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &["synthetic-error", "--n", "0"][..],
        &["synthetic-error", "--weights", "bogus"],
        &["synthetic-ratio", "--aggregation", "median"],
        &["rhs-sweep", "--format", "xml"],
        &["game", "--sigma1", "-1"],
        &["synthetic-error", "--no-such-flag"],
    ] {
        let out = pairrec(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("counts.csv");
    std::fs::write(&bad, "count\n10\nten\n").unwrap();
    let missing = dir.path().join("missing.csv");
    for args in [
        vec!["cells", "--counts", bad.to_str().unwrap()],
        vec!["cells", "--counts", missing.to_str().unwrap()],
        vec!["housing", "--prices", missing.to_str().unwrap()],
    ] {
        let out = pairrec(&args);
        assert_eq!(code(&out), 3, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_is_data_error() {
    let out = pairrec(&["rhs-sweep", "--out", Path::new("/nonexistent/dir/out.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}
