use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tfe10_cli::output::config_hash;

fn tfe10(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfe10"))
        .args(args)
        .current_dir(dir)
        .env_remove("TFE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

fn find(dir: &Path, prefix: &str) -> PathBuf {
    files(dir)
        .into_iter()
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .unwrap_or_else(|| panic!("no {prefix}* in {}", dir.display()))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(find(dir, "manifest-")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn negative_n_is_a_usage_error_with_no_output() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["eigen-solve", "--n", "-1", "--out", "res"], d.path());
    assert_eq!(code(&o), 2);
    assert!(files(d.path()).is_empty());
}

#[test]
fn linear_profile_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["eigen-solve", "--n", "0", "--k", "2", "--out", "res", "--svg"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let res = d.path().join("res");
    let m = manifest(&res);
    assert_eq!(m["results"]["solves"][0]["alpha"].as_f64(), Some(0.3));
    assert_eq!(m["outcome"], "ok");

    let csv = fs::read_to_string(find(&res, "profile-")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("y,f"));
    assert_eq!(lines.next(), Some("0,1"));
    assert!(lines.all(|l| l.split(',').count() == 2 && !l.contains("NaN")));

    // every output carries the manifest id and the hash is recomputable
    let id = m["id"].as_str().unwrap();
    for f in files(&res) {
        assert!(f.file_name().unwrap().to_string_lossy().contains(id));
    }
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    let h = config_hash(m["command"].as_str().unwrap(), &m["params"], &m["tolerances"]);
    assert_eq!(m["config_hash"].as_str(), Some(h.as_str()));
    assert!(m["tolerances"]["newton"]["tol"].is_f64());
}

#[test]
fn output_directory_resolution() {
    let d = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_tfe10"));
        c.args(["asymptotics", "lambda"]).args(extra).current_dir(d.path());
        match env {
            Some(v) => c.env("TFE_OUT_DIR", v),
            None => c.env_remove("TFE_OUT_DIR"),
        };
        assert!(c.status().unwrap().success());
    };
    run(&["--out", "flag"], Some("env"));
    assert_eq!(files(&d.path().join("flag")).len(), 2);
    assert!(!d.path().join("env").exists());
    run(&[], Some("env"));
    assert_eq!(files(&d.path().join("env")).len(), 2);
    run(&[], None);
    assert!(files(d.path()).iter().any(|p| p.extension().is_some_and(|e| e == "json")));
}

#[test]
fn branch_range_errors_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["eigen-branch", "--k", "0", "--n-range", "0.2:0.1:0.05"], d.path());
    assert_eq!(code(&o), 2);
    assert!(files(d.path()).is_empty());

    let args = ["eigen-branch", "--k", "1", "--n-range", "0:0:0.1"];
    let a = tfe10(&[&args[..], &["--out", "a"]].concat(), d.path());
    let b = tfe10(&[&args[..], &["--out", "b"]].concat(), d.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    let ca = fs::read(find(&d.path().join("a"), "branch-k1")).unwrap();
    let cb = fs::read(find(&d.path().join("b"), "branch-k1")).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(String::from_utf8(ca).unwrap(), "n,alpha,y0\n0,0.2,160\n");
}

#[test]
fn heteroclinic_tolerance_floor() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["heteroclinic", "--lambda0", "1", "--tol", "1e-6"], d.path());
    assert_eq!(code(&o), 2);
    assert!(files(d.path()).is_empty());
}

#[test]
fn heteroclinic_bisection_log() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["heteroclinic", "--lambda0", "1", "--tol", "5e-3"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(d.path());
    let n_h = m["results"]["n_h"].as_f64().unwrap();
    assert!((1.152..=1.162).contains(&n_h), "{n_h}");
    let csv = fs::read_to_string(find(d.path(), "classification-")).unwrap();
    assert!(csv.starts_with("n,outcome\n"));
    assert!(csv.contains(",converges_to_cycle") && csv.contains(",heteroclinic_to_opposite"));
}

#[test]
fn cycle_at_n_one() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["cycle", "--n", "1.0", "--lambda0", "1", "--svg"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(d.path());
    assert_eq!(m["outcome"], "converged");
    assert!(m["results"]["period"].as_f64().unwrap() > 0.0);
    assert_eq!(m["results"]["sign_changing"], true);
    let csv = fs::read_to_string(find(d.path(), "cycle-phi")).unwrap();
    assert!(csv.starts_with("eta,phi\n"));
    assert!(find(d.path(), "cycle-phi").with_extension("svg").exists());
}

#[test]
fn cycle_beyond_the_heteroclinic_point() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["cycle", "--n", "1.3"], d.path());
    assert_eq!(code(&o), 1);
    let m = manifest(d.path());
    assert_eq!(m["outcome"], "beyond n_h");
    assert!(files(d.path()).iter().all(|p| p.extension().is_some_and(|e| e == "json")));
}

#[test]
fn asymptotics_tables() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["asymptotics", "spectrum", "--N", "1", "--K", "3", "--n", "0"], d.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(find(d.path(), "spectrum-")).unwrap();
    let alpha: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(alpha, ["0.1", "0.2", "0.3", "0.4"]);

    let o = tfe10(&["asymptotics", "interface", "--n", "0.2", "--t", "1"], d.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(find(d.path(), "interface-")).unwrap();
    let x0: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((x0 - 206.0).abs() < 1.0, "{x0}");

    let o = tfe10(&["asymptotics", "lambda"], d.path());
    let out = String::from_utf8_lossy(&o.stdout);
    for key in ["sextic residual", "decic residual"] {
        let line = out.lines().find(|l| l.starts_with(key)).unwrap();
        let r: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(r < 1e-8);
    }

    assert_eq!(code(&tfe10(&["asymptotics", "bogus"], d.path())), 2);
}

#[test]
fn config_file_overrides_and_unknown_keys() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("ok.toml"), "newton_tol = 1e-9\nsegments = 30\n").unwrap();
    fs::write(d.path().join("bad.toml"), "newton_tol = 1e-9\nwarp_factor = 9\n").unwrap();
    let o = tfe10(&["eigen-solve", "--n", "0", "--config", "bad.toml", "--out", "bad"], d.path());
    assert_eq!(code(&o), 2);
    assert!(!d.path().join("bad").exists());
    let o = tfe10(&["eigen-solve", "--n", "0", "--config", "ok.toml", "--out", "ok"], d.path());
    assert_eq!(code(&o), 0);
    let m = manifest(&d.path().join("ok"));
    assert_eq!(m["tolerances"]["newton"]["tol"].as_f64(), Some(1e-9));
    assert_eq!(m["tolerances"]["segments"].as_u64(), Some(30));
}

#[test]
fn check_suite_and_failure_injection() {
    let d = tempfile::tempdir().unwrap();
    let o = tfe10(&["check", "--suite", "fast"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(files(d.path()).is_empty());

    let o = tfe10(&["check", "--suite", "fast", "--inject-failure", "kato-bound"], d.path());
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("FAIL") && l.contains("kato-bound")));
    assert_eq!(out.lines().filter(|l| l.starts_with("FAIL")).count(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kato-bound"));

    assert_eq!(code(&tfe10(&["check", "--inject-failure", "nope"], d.path())), 2);
}

#[test]
fn help_and_bad_flags() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&tfe10(&["--help"], d.path())), 0);
    assert_eq!(code(&tfe10(&["eigen-solve"], d.path())), 2);
    assert_eq!(code(&tfe10(&["eigen-solve", "--n", "abc"], d.path())), 2);
    assert_eq!(code(&tfe10(&["cycle", "--n", "-0.5"], d.path())), 2);
    assert!(files(d.path()).is_empty());
}
