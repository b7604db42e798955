use std::path::Path;
use std::process::{Command, Output};

fn needlet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_needlet")).args(args).current_dir(dir).output().unwrap()
}

fn rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn header(text: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.headers().unwrap().iter().map(String::from).collect()
}

fn col(rec: &csv::StringRecord, i: usize) -> f64 {
    rec[i].parse().unwrap()
}

#[test]
fn kernel_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = needlet(&["kernel", "--t", "0.2", "--out", "k.csv"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(header(&text), ["t", "theta", "value"]);
    let recs = rows(&text);
    assert_eq!(recs.len(), 256);
    assert_eq!(col(&recs[0], 1), 1e-3);
    assert!(col(&recs[0], 2) > 0.0);
}

#[test]
fn correlation_at_coincidence_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = needlet(&["correlation", "--t", "0.3,0.1", "--cos-gamma", "1,-0.2"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(header(&text)[..4], ["t", "cos_gamma", "covariance", "correlation"]);
    let recs = rows(&text);
    assert_eq!(recs.len(), 4);
    for r in &recs {
        if col(r, 1) == 1.0 {
            assert_eq!(col(r, 3), 1.0);
        } else {
            assert!(col(r, 3).abs() <= 1.0);
        }
    }
}

#[test]
fn fit_outside_hypothesis_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        needlet(&["correlation", "--alpha", "7", "--t", "0.4,0.2,0.1,0.05", "--distance", "1.5", "--fit"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4r + 2 > alpha"));
}

#[test]
fn bad_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(needlet(&["verify", "--lemma-mu", "-2"], dir.path()).status.code(), Some(2));
    assert_eq!(needlet(&["kernel", "--t", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(needlet(&["simulate", "--replicas", "10", "--distance", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(needlet(&["run", "missing.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn same_point_simulation_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = needlet(&["simulate", "--pair", "1.0:2.0:1.0:2.0", "--replicas", "200"], dir.path());
    assert!(out.status.success());
    let recs = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(recs.len(), 1);
    assert_eq!(col(&recs[0], 8), 1.0);
    assert_eq!(col(&recs[0], 9), 0.0);
}

#[test]
fn verify_defaults_pass_and_broken_spectrum_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = needlet(&["verify", "--out", "v.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "PASS");
    assert!(report["checks"].as_array().unwrap().len() >= 5);

    std::fs::write(
        dir.path().join("broken.json"),
        r#"{"family":"rational_log","alpha":3.0,"beta":4.0,"P":[1.0],"Q":[1.0],"F":"two_plus_sin"}"#,
    )
    .unwrap();
    let out = needlet(&["verify", "--spectrum", "broken.json"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn frame_ratios_and_grid_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = needlet(
        &[
            "frame",
            "--band-limit",
            "8",
            "--oversample",
            "1,2",
            "--j-min",
            "-4",
            "--export-grid",
            "g.csv",
            "--out",
            "f.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = rows(&std::fs::read_to_string(dir.path().join("f.csv")).unwrap());
    let ratios: Vec<f64> = recs.iter().map(|r| col(r, 7)).collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|&r| r >= 1.0));
    assert!(ratios[1] < ratios[0]);

    let grid = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(header(&grid), ["j", "k", "theta", "phi", "weight"]);
    // n_j = ceil(4 a^{-2j}) at j = -4, a = 2
    assert_eq!(rows(&grid).len(), 4 * 256);
}

#[test]
fn saved_report_replays() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--r", "2", "--alpha", "4", "--lemma-t", "0.2,0.1,0.05,0.025", "--out", "v.json"];
    let first = needlet(&args, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stdout));
    let saved = std::fs::read(dir.path().join("v.json")).unwrap();
    // the echoed config carries `out`, so the replay rewrites the same file
    let replay = needlet(&["run", "v.json"], dir.path());
    assert!(replay.status.success());
    assert_eq!(std::fs::read(dir.path().join("v.json")).unwrap(), saved);
}
