use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ctxmatch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxmatch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_dirs(out: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn print_defaults_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctxmatch(&["--print-defaults"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("phi_deg = 5, 15, 45"));
    fs::write(dir.path().join("d.ini"), &text).unwrap();
    let o = ctxmatch(&["--config", "d.ini", "--validate-only"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "configuration ok: 18 runs");
}

#[test]
fn validate_only_rejects_bad_configs_with_key_names() {
    let dir = tempfile::tempdir().unwrap();
    for (text, needle) in [
        ("omega_d = 0.7\nomega_i = 0.2\nomega_e = 0.2\n", "omega_d + omega_i + omega_e"),
        ("speed_limit = 3\n", "unknown key `speed_limit`"),
        ("deadline_s = 0.002\n", "deadline_ms"),
        ("phi_deg = 15 rad\n", "unit mismatch"),
    ] {
        fs::write(dir.path().join("bad.ini"), text).unwrap();
        let o = ctxmatch(&["--config", "bad.ini", "--validate-only"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    let o = ctxmatch(&["--validate-only", "--policy", "RANDOM"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn validate_only_does_not_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctxmatch(&["--validate-only", "--out", "never"], dir.path());
    assert!(o.status.success());
    assert!(!dir.path().join("never").exists());
}

#[test]
fn one_policy_one_seed_gives_four_csvs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.ini"), "duration_s = 1\n").unwrap();
    let o = ctxmatch(
        &["--config", "c.ini", "--policy", "CONTEXTaware", "--phi-deg", "15", "--quota-rx", "1", "--seeds", "7", "--out", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("o");
    assert_eq!(run_dirs(&out), ["CONTEXTaware_phi15_q1_seed7"]);
    let mut files: Vec<String> = fs::read_dir(out.join("CONTEXTaware_phi15_q1_seed7"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["delay.csv", "drops.csv", "esi.csv", "matching.csv"]);
    let esi = fs::read_to_string(out.join("CONTEXTaware_phi15_q1_seed7/esi.csv")).unwrap();
    assert_eq!(esi.lines().next(), Some("epoch,slot,vrx_id,esi_bits"));
    let m = fs::read_to_string(out.join("CONTEXTaware_phi15_q1_seed7/matching.csv")).unwrap();
    assert!(m.lines().skip(1).all(|l| l.ends_with(",CONTEXTaware")));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    assert!(summary["groups"][0]["esi_nonzero"]["quantiles"]["p80"].is_number());
}

#[test]
fn three_policies_two_seeds_give_six_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.ini"), "duration_s = 0.5\nphi_deg = 45\nquota_rx = 3\n").unwrap();
    let o = ctxmatch(&["--config", "c.ini", "--seeds", "1,2", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        run_dirs(&dir.path().join("o")),
        [
            "CONTEXTaware_phi45_q3_seed1",
            "CONTEXTaware_phi45_q3_seed2",
            "DELAYfair_phi45_q3_seed1",
            "DELAYfair_phi45_q3_seed2",
            "MINDist_phi45_q3_seed1",
            "MINDist_phi45_q3_seed2",
        ]
    );
}

#[test]
fn missing_trace_file_exits_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.ini"), "scenario = traces\ntrace_file = nowhere.csv\n").unwrap();
    let o = ctxmatch(&["--config", "c.ini", "--validate-only"], dir.path());
    assert!(o.status.success(), "file existence is checked when running");
    let o = ctxmatch(&["--config", "c.ini", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.csv") || stderr(&o).contains("I/O"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("file"), "").unwrap();
    let o = ctxmatch(&["--policy", "MINDist", "--phi-deg", "45", "--quota-rx", "1", "--out", "file/sub"], dir.path());
    assert!(!o.status.success());
}
