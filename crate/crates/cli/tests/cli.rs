use std::path::PathBuf;
use std::process::{Command, Output};

fn rmflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmflab")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("rmflab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn moments_to_stdout() {
    let o = rmflab(&["moments", "--x", "100,1000", "--q", "1", "--trials", "200"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("experiment,model,x,q,trials,estimate,stderr,seed,wallclock_s\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_errors_exit_2() {
    let d = scratch("cfg");
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "x = [1000]\nq = [1.0]\ntrails = 10\n").unwrap();
    let o = rmflab(&["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trails"));

    let wrong = d.join("wrong.toml");
    std::fs::write(&wrong, "experiment = \"tails\"\nx = [1000]\n").unwrap();
    assert_eq!(rmflab(&["moments", "--config", wrong.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(rmflab(&["moments", "--x", "1000"]).status.code(), Some(2));
    assert_eq!(rmflab(&["moments", "--x", "1000", "--q", "1", "--format", "xml"]).status.code(), Some(2));
    std::fs::remove_dir_all(&d).unwrap();
}

#[test]
fn missing_config_file_exits_4() {
    assert_eq!(rmflab(&["walks", "--config", "/nonexistent/rmf.toml"]).status.code(), Some(4));
}

#[test]
fn unstable_estimate_exits_3() {
    // x = 10^4 has log log x < 2.3, so lambda = 8 leaves too few hits in 200 trials
    let o = rmflab(&["tails", "--x", "10000", "--lambda", "8", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config_and_files_are_deterministic() {
    let d = scratch("det");
    let cfg = d.join("walks.toml");
    std::fs::write(&cfg, "n = [16, 64]\na = [1.0, 2.0]\ntrials = 1000\nseed = 9\n").unwrap();
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out = d.join(format!("walks-{threads}.csv"));
        let o = rmflab(&["walks", "--config", cfg.to_str().unwrap(), "--trials", "3000", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(&out).unwrap());
        let manifest = std::fs::read_to_string(d.join(format!("walks-{threads}.csv.manifest.json"))).unwrap();
        assert!(manifest.contains("\"seed\": 9"));
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0]).contains(",3000,"));
    std::fs::remove_dir_all(&d).unwrap();
}

#[test]
fn json_output_is_array_with_manifest() {
    let o = rmflab(&["characters", "--p", "11", "--x", "10", "--q", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["value"], 10.0);
    assert_eq!(v[0]["manifest"]["experiment"], "characters");
}
