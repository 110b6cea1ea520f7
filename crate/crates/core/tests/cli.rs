use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lipcap(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipcap"))
        .args(args)
        .env("LIPCAP_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .unwrap()
}

fn scenario(root: &Path, name: &str, body: &str) -> String {
    let path = root.join(format!("{name}.scn"));
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "cap", "kind = capacity\nentry = ball\nresolution = 32\n");
    let o = lipcap(dir.path(), &["run", &s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exponent p required for kind=capacity"));
    assert!(!dir.path().join("cap").exists());
}

#[test]
fn unknown_entry_and_bad_arguments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "x", "kind = hausdorff\nentry = nothing\nresolution = 32\n");
    assert_eq!(lipcap(dir.path(), &["run", &s]).status.code(), Some(2));
    assert_eq!(lipcap(dir.path(), &["run"]).status.code(), Some(2));
    assert_eq!(lipcap(dir.path(), &["corpus", "describe", "nothing"]).status.code(), Some(2));
}

#[test]
fn passing_scenario_writes_reports_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "pt", "kind = hausdorff\nentry = point\nresolutions = 64 128 256\n");
    let o = lipcap(dir.path(), &["run", &s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("pt");
    for f in ["summary.txt", "checks.csv", "checks.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(csv.starts_with("check_id,lhs,rhs,ratio,tolerance,pass,provenance,oracle,seed\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("checks.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 0);
    assert!(!fs::read_dir(&out).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "tmp")));
}

#[test]
fn failing_check_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "tight", "kind = capacity\nentry = ball\np = 2\nresolution = 32\ntolerance = 1e-6\n");
    let o = lipcap(dir.path(), &["run", &s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n32_radial_oracle"));
    assert!(dir.path().join("tight/capacity_32/certificate.txt").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let body = "kind = truncation\nentry = smooth_trig\nresolution = 32\nseed = 7\n";
    let a = scenario(dir.path(), "a", body);
    let b = scenario(dir.path(), "b", body);
    assert_eq!(lipcap(dir.path(), &["run", &a]).status.code(), Some(0));
    assert_eq!(lipcap(dir.path(), &["run", &b]).status.code(), Some(0));
    for f in ["checks.csv", "checks.json"] {
        let x = fs::read_to_string(dir.path().join("a").join(f)).unwrap();
        let y = fs::read_to_string(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x.replace("\"a\"", "\"b\""), y, "{f}");
    }
}

#[test]
fn corpus_listing_and_description() {
    let dir = tempfile::tempdir().unwrap();
    let o = lipcap(dir.path(), &["corpus", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let list = String::from_utf8(o.stdout).unwrap();
    assert_eq!(list.lines().count(), 13);
    let o = lipcap(dir.path(), &["corpus", "describe", "ball"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("DERIVED"), "{text}");
}

#[test]
fn merge_combines_reports() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario(dir.path(), "p", "kind = hausdorff\nentry = point\nresolutions = 64 128 256\n");
    let s = scenario(dir.path(), "s", "kind = hausdorff\nentry = segment\nresolutions = 64 128\n");
    lipcap(dir.path(), &["run", &p]);
    lipcap(dir.path(), &["run", &s]);
    let o = lipcap(dir.path(), &["report", "merge", "p", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("merged.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("p,")));
    assert!(csv.lines().any(|l| l.starts_with("s,")));
    assert_eq!(lipcap(dir.path(), &["report", "merge", "missing"]).status.code(), Some(2));
}

#[test]
fn merge_reports_failures_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // two resolutions are too few for the point estimate to fall by 4x
    let p = scenario(dir.path(), "short", "kind = hausdorff\nentry = point\nresolutions = 64 128\n");
    assert_eq!(lipcap(dir.path(), &["run", &p]).status.code(), Some(1));
    let o = lipcap(dir.path(), &["report", "merge", "short"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("short:decay"));
}
