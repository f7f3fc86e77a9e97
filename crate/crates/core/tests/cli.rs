mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn neurop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurop"))
        .args(args)
        .env_remove("NEUROP_KB")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_exam(dir: &Path, text: &str) -> String {
    let path = dir.join("exam.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn chain_exam(dir: &Path, bits: &[u8]) -> String {
    let e = exam(vec![motor_nerve("peroneal", LEFT, bits)]);
    write_exam(dir, &neurop::exam_file::to_json(&e))
}

#[test]
fn sample_report_ends_with_patient_diagnosis() {
    let o = neurop(&["diagnose", sample_exam_path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(
        out.lines().last().unwrap(),
        "Patient diagnosis: focal_mono_neuropathy (rule 2 focal_mono_neuropathy)"
    );
}

#[test]
fn explicit_kb_flag_and_environment_agree() {
    let exam = sample_exam_path();
    let kb = kb_dir();
    let a = neurop(&[
        "diagnose",
        exam.to_str().unwrap(),
        "--kb",
        kb.to_str().unwrap(),
    ]);
    let b = Command::new(env!("CARGO_BIN_EXE_neurop"))
        .args(["diagnose", exam.to_str().unwrap()])
        .env("NEUROP_KB", &kb)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_report_contains_trace_and_matches_text() {
    let exam = sample_exam_path();
    let o = neurop(&["diagnose", exam.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!v["trace"].as_array().unwrap().is_empty());
    let report: neurop::pipeline::DiagnosisReport = serde_json::from_slice(&o.stdout).unwrap();
    let text = stdout(&neurop(&["diagnose", exam.to_str().unwrap()]));
    assert_eq!(text, neurop::report::render_text(&report));
}

#[test]
fn malformed_exam_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_exam(
        dir.path(),
        r#"{"patient_id":"p","nerves":[{"name":"median","side":"left","fibre":"motor",
            "segments":[{"index":1,"amplitude":"high","distal_latency":3}]}]}"#,
    );
    let o = neurop(&["diagnose", &path]);
    assert_eq!(o.status.code(), Some(4));
    assert!(
        stderr(&o).contains("nerves[0].segments[0].amplitude"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn invalid_exam_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_exam(
        dir.path(),
        r#"{"patient_id":"p","nerves":[{"name":"median","side":"left","fibre":"sensory",
            "segments":[{"index":1,"amplitude":20,"velocity":50},{"index":3,"amplitude":20,"velocity":50}]}]}"#,
    );
    let o = neurop(&["diagnose", &path]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn uncatalogued_nerve_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let e = exam(vec![motor_nerve("vagus", LEFT, &[0])]);
    let path = write_exam(dir.path(), &neurop::exam_file::to_json(&e));
    let o = neurop(&["diagnose", &path]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn missing_exam_and_missing_kb_are_io_failures() {
    let o = neurop(&["diagnose", "/nonexistent/exam.json"]);
    assert_eq!(o.status.code(), Some(3));
    let exam = sample_exam_path();
    let o = neurop(&[
        "diagnose",
        exam.to_str().unwrap(),
        "--kb",
        "/nonexistent/kb",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(neurop(&[]).status.code(), Some(2));
    assert_eq!(neurop(&["diagnose"]).status.code(), Some(2));
    assert_eq!(
        neurop(&["enumerate", "--format", "xml"]).status.code(),
        Some(2)
    );
}

#[test]
fn help_documents_exit_codes() {
    let o = neurop(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for code in 0..=6 {
        assert!(out.contains(&format!("  {code}  ")), "{out}");
    }
}

#[test]
fn validate_kb_passes_shipped_kb() {
    let o = neurop(&["validate-kb", "--kb", kb_dir().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("PASS").count(), 7);
}

#[test]
fn validate_kb_reports_duplicated_transition() {
    let dir = kb_copy();
    edit(dir.path(), "automaton.tr", |t| t + "n 0 n\n");
    let o = neurop(&["validate-kb", "--kb", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL  automaton.tr"), "{out}");
    assert!(out.contains("δ not functional at (n,0)"), "{out}");
    assert_eq!(out.matches("PASS").count(), 6);
}

#[test]
fn validate_kb_reports_missing_file() {
    let dir = kb_copy();
    std::fs::remove_file(dir.path().join("level3.rules")).unwrap();
    let o = neurop(&[
        "validate-kb",
        "--kb",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let level3 = v["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["file"] == "level3.rules")
        .unwrap();
    assert_eq!(level3["status"], "missing");
}

#[test]
fn broken_kb_blocks_diagnosis_with_parse_code() {
    let dir = kb_copy();
    edit(dir.path(), "automaton.tr", |t| t.replace("d     1 d\n", ""));
    let exam = sample_exam_path();
    let o = neurop(&[
        "diagnose",
        exam.to_str().unwrap(),
        "--kb",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("δ not total at (d,1)"));
}

#[test]
fn enumerate_table() {
    let o = neurop(&["enumerate"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with('['))
        .collect();
    assert_eq!(rows.len(), 62);
    assert!(rows.iter().all(|r| r.ends_with("yes")));
    let row = |chain: &str| {
        rows.iter()
            .find(|r| r.split_whitespace().next() == Some(chain))
            .unwrap()
            .split_whitespace()
            .collect::<Vec<_>>()
    };
    assert_eq!(
        row("[0,1,0,0,0]"),
        ["[0,1,0,0,0]", "f_b", "focal", "focal", "yes"]
    );
    assert_eq!(
        row("[1,0,1,1,0]"),
        ["[1,0,1,1,0]", "d", "diffuse", "diffuse", "yes"]
    );
}

#[test]
fn enumerate_json_has_62_agreeing_rows() {
    let o = neurop(&["enumerate", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 62);
    assert!(rows.iter().all(|r| r["agree"] == true));
}

#[test]
fn trace_walks_five_steps_to_multiple_focal() {
    let dir = tempfile::tempdir().unwrap();
    let path = chain_exam(dir.path(), &[0, 1, 0, 1, 0]);
    let o = neurop(&["trace", &path, "--nerve", "peroneal:left:motor"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let steps: Vec<&str> = out.lines().filter(|l| l.contains("--> ")).collect();
    assert_eq!(steps.len(), 5);
    assert!(steps[4].ends_with("m_f_a --0--> m_f_b"), "{out}");
    assert!(
        out.contains("chain [0,1,0,1,0] ends in m_f_b -> multiple_focal"),
        "{out}"
    );
}

#[test]
fn trace_of_single_normal_segment() {
    let dir = tempfile::tempdir().unwrap();
    let path = chain_exam(dir.path(), &[0]);
    let o = neurop(&["trace", &path, "--nerve", "peroneal:left:motor"]);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("--> ")).count(), 1);
    assert!(out.contains("start --0--> n"));
    assert!(out.contains("ends in n -> normal"));
}

#[test]
fn trace_of_absent_nerve_lists_selectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = chain_exam(dir.path(), &[0, 1]);
    let o = neurop(&["trace", &path, "--nerve", "median:left:motor"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(
        stderr(&o).contains("available: peroneal:left:motor"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn trace_json_is_an_event_list() {
    let o = neurop(&[
        "trace",
        sample_exam_path().to_str().unwrap(),
        "--nerve",
        "median:left:motor",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let events = v.as_array().unwrap();
    assert!(events.iter().any(|e| e["event"] == "nerve_diagnosed"));
    assert!(events.iter().all(|e| e["nerve"]["name"] == "median"));
}
