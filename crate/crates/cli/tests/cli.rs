use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wfl(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wfl"));
    cmd.args(args).arg("--out").arg(out);
    for var in ["WFL_CONFIG", "WFL_SEED", "WFL_PATHS", "WFL_THREADS", "WFL_OUT"] {
        cmd.env_remove(var);
    }
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("wfl runs")
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

fn write(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(2).map(String::from).collect()
}

const ZERO_HORIZON: &str = r#"
scenario = "simulate"
seed = 1
paths = 3

[sim]
T = 0.0
dt = 0.01
n = 8
decay = { alpha = 2.0, k_max = 5.0, dk = 0.25 }
phi = { variant = "constant" }

[initial]
kind = "linear"
lo = 0.0
hi = 1.0
"#;

#[test]
fn zero_horizon_emits_only_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), ZERO_HORIZON);
    let out = tmp.path().join("out");
    let r = wfl(&["simulate"], Some(&cfg), &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = data_rows(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 3 * 8);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0")));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("# wfl "));
    assert!(text.contains("seed=1"));
    assert_eq!(text.lines().nth(1), Some("path,t,i,u,y"));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), &ZERO_HORIZON.replace("\"simulate\"", "\"teleport\""));
    let r = wfl(&["simulate"], Some(&cfg), &tmp.path().join("out"));
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("teleport") && err.contains("simulate"), "{err}");
}

#[test]
fn scenario_must_match_the_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), ZERO_HORIZON);
    let r = wfl(&["peano"], Some(&cfg), &tmp.path().join("out"));
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(wfl(&["simulate"], None, tmp.path()).status.code(), Some(2));
    assert_eq!(wfl(&["simulate", "--seed", "x"], None, tmp.path()).status.code(), Some(2));
}

#[test]
fn flags_override_seed_and_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), ZERO_HORIZON);
    let out = tmp.path().join("out");
    let r = wfl(&["simulate", "--seed", "42", "--paths", "2"], Some(&cfg), &out);
    assert!(r.status.success());
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("seed=42"));
    assert_eq!(data_rows(&out.join("summary.csv")).len(), 2 * 8);
}

#[test]
fn unconverged_picard_exits_3_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("picard")).unwrap()
        .replace("copies = 2000", "copies = 200")
        .replace("max_iterations = 12", "max_iterations = 2")
        .replace("tol = 0.05", "tol = 1e-9");
    let cfg = write(tmp.path(), &text);
    let out = tmp.path().join("out");
    let r = wfl(&["picard"], Some(&cfg), &out);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    let diag = data_rows(&out.join("diagnostic.csv"));
    assert!(diag[0].starts_with("Divergence,"), "{diag:?}");
    assert_eq!(data_rows(&out.join("picard.csv")).len(), 2);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn every_subcommand_is_byte_identical_under_replay() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["simulate", "covariance", "invert", "regularize", "picard", "peano", "arratia"] {
        let cfg = example(name);
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        for (dir, threads) in [(&a, "1"), (&b, "2")] {
            let r = wfl(&[name, "--paths", "20", "--threads", threads], Some(&cfg), dir);
            assert!(r.status.success(), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        }
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert!(!sa.is_empty());
        assert_eq!(sa, sb, "{name} output differs between runs");
    }
}

#[test]
fn check_mode_runs_the_matching_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let r = wfl(&["regularize", "--check"], None, tmp.path());
    let text = String::from_utf8_lossy(&r.stdout);
    assert_eq!(r.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("PASS"), "{text}");
}
