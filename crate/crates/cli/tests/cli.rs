use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wmst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wmst"))
        .args(args)
        .env_remove("WMST_THREADS")
        .output()
        .expect("run wmst")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

#[test]
fn bcos_reports_the_reference_battery() {
    let o = wmst(&["bcos"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "test,tau0,tau1,statistic,p_value,estimate,std_error,ci_low,ci_high");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(names, ["rmst", "wmst:12.5", "wmst:15", "wmst:17.5", "logrank", "fh:0:1"]);
    let w15 = &rows[2];
    assert_eq!(w15[2], "42.0");
    let est: f64 = w15[5].parse().unwrap();
    assert!((est - 7.53).abs() < 0.005, "{est}");
    assert_eq!(stdout(&wmst(&["bcos"])), text);
}

#[test]
fn bare_wmst_expands_over_tau0() {
    let o = wmst(&["bcos", "--tests", "wmst,logrank", "--tau0", "10,20", "--tau1", "40"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["wmst:10", "wmst:20", "logrank"]);
    let o = wmst(&["bcos", "--tests", "wmst"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn test_and_estimate_on_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bcos.csv");
    let data = data.to_str().unwrap();
    assert!(wmst(&["bcos", "--dump-data", data]).status.success());

    let from_file = wmst(&["test", data, "--tests", "wmst:15", "--tau1-rule", "last-event"]);
    let bundled = wmst(&["bcos", "--tests", "wmst:15"]);
    assert_eq!(stdout(&from_file), stdout(&bundled));

    let out = dir.path().join("est");
    let o = wmst(&["estimate", data, "--method", "turnbull", "--tau0", "0,15", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let est = fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 5);
    assert!(est.starts_with("arm,method,tau0,tau1,wmst,std_error,n\n"));
    for arm in ["curve-arm0.csv", "curve-arm1.csv"] {
        let curve = fs::read_to_string(out.join(arm)).unwrap();
        let s: Vec<f64> = curve.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn simulate_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("power-late-diff-xii.json");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = wmst(&["simulate", &cfg, "--replications", "120", "--seed", "5", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"replications\": 120"));
        outputs.push(fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = wmst(&["simulate", &cfg, "--replications", "120", "--seed", "6"]);
    assert_ne!(other.stdout, outputs[0]);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = wmst(&["test", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let bad_row = dir.path().join("bad.csv");
    fs::write(&bad_row, "arm,left,right\n0,1,2\n1,5,3\n").unwrap();
    let o = wmst(&["test", bad_row.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    // every subject censored: nothing to test
    let no_events = dir.path().join("censored.csv");
    fs::write(&no_events, "arm,left,right\n0,1,\n0,2,\n1,1.5,\n1,3,\n").unwrap();
    let o = wmst(&["test", no_events.to_str().unwrap(), "--tests", "logrank"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"schema": "wmst-simulation/1", "kind": "test", "scenario": "weibull-i", "tests": ["rmst"], "n_per_arm": -3}"#).unwrap();
    let o = wmst(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_per_arm"));

    assert_eq!(wmst(&["estimate"]).status.code(), Some(1));
    assert_eq!(wmst(&["bcos", "--tau1", "-1"]).status.code(), Some(1));
    assert_eq!(wmst(&["--help"]).status.code(), Some(0));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let file = wmst::io::read_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        file.study_config().unwrap();
        n += 1;
    }
    assert!(n >= 20);
}
