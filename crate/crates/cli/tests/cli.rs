use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const OU: &str = r#"
seed = 3
horizon = 1.0

[model]
name = "ou_modulated_cox"
params = { lambda0 = 0.5, lambda_bump = 1.5, lambda_bar = 2.0, kappa = 1.0, theta = 0.0, sigma = 0.5, payoff = "level_plus_cos", discount = 0.1 }

[simulation]
dt_max = 0.01
n_paths = 4000
trajectories = 2

[grid]
time_steps = 200
axes = [{ lo = -4.0, hi = 4.0, nodes = 81 }]
l_lo = 0.0
l_hi = 3.0
dl = 1.0
jump_cap = 10

[solver]
mode = "fixed_point"
tol = 1e-9
theta = 0.5

[[probes]]
t = 0.0
z = [0.0]
l = 0.0

[[probes]]
t = 0.5
z = [0.4]
l = 1.0
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_markov-pide"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn setup(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metadata(csv: &str, key: &str) -> Option<String> {
    csv.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(&format!("# {key}: ")).map(str::to_string))
}

#[test]
fn solve_is_deterministic_and_tagged() {
    let dir = setup(OU);
    let a = run(&["solve", "--config", "run.toml"], dir.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let first = fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    assert_eq!(metadata(&first, "seed").as_deref(), Some("3"));
    assert_eq!(metadata(&first, "config_sha256").unwrap().len(), 64);
    assert!(first.lines().any(|l| l == "t,z_1,l,value"));

    let b = bin()
        .args(["solve", "--config", "run.toml"])
        .env("MARKOV_PIDE_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&b), 0, "{}", stderr(&b));
    assert_eq!(first, fs::read_to_string(dir.path().join("out/solution.csv")).unwrap());
}

#[test]
fn seed_override_changes_hash_and_output() {
    let dir = setup(OU);
    run(&["estimate", "--config", "run.toml", "--out", "x"], dir.path());
    let o = run(
        &["estimate", "--config", "run.toml", "--out", "x2", "--seed", "9"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e1 = fs::read_to_string(dir.path().join("x/estimates.csv")).unwrap();
    let e2 = fs::read_to_string(dir.path().join("x2/estimates.csv")).unwrap();
    assert_eq!(metadata(&e2, "seed").as_deref(), Some("9"));
    assert_ne!(metadata(&e1, "config_sha256"), metadata(&e2, "config_sha256"));
    let rows = e1.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 2 * 3);
}

#[test]
fn intensity_above_bound_is_config_error() {
    let dir = setup(&OU.replace("lambda_bar = 2.0", "lambda_bar = 1.5"));
    for cmd in ["validate", "solve", "simulate"] {
        let o = run(&[cmd, "--config", "run.toml"], dir.path());
        assert_eq!(code(&o), 2);
        assert!(stderr(&o).contains("A2"), "{}", stderr(&o));
    }
}

#[test]
fn unknown_key_and_missing_file() {
    let dir = setup(&OU.replace("trajectories = 2", "trajectoires = 2"));
    let o = run(&["simulate", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    assert!(msg.contains("trajectoires") && msg.contains("line"), "{msg}");
    assert_eq!(code(&run(&["solve", "--config", "nope.toml"], dir.path())), 2);
    let bad_threads = bin()
        .args(["solve", "--config", "run.toml"])
        .env("MARKOV_PIDE_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 2);
}

#[test]
fn imex_stability_violation_prints_step() {
    // dt = 1 against dt * lambda_tilde * max nu <= 1 with lambda_tilde = 2, max nu = 1
    let cfg = OU
        .replace("mode = \"fixed_point\"", "mode = \"imex\"")
        .replace("horizon = 1.0", "horizon = 2.0")
        .replace("time_steps = 200", "time_steps = 2");
    let dir = setup(&cfg);
    let o = run(&["solve", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(
        msg.contains("use dt <= 5.000000e-1") && msg.contains("at least 4 time steps"),
        "{msg}"
    );
}

#[test]
fn simulate_and_validate_write_csv() {
    let dir = setup(OU);
    let o = run(&["simulate", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["reference_0.csv", "physical_0.csv", "reference_1.csv", "physical_1.csv"] {
        let s = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        assert!(
            s.lines().any(|l| l == "time,z_1,l,xi,event_flag,mark_index,accepted"),
            "{name}"
        );
        assert!(metadata(&s, "config_sha256").is_some());
    }
    let o = run(&["validate", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = fs::read_to_string(dir.path().join("out/validation.csv")).unwrap();
    assert!(v.lines().any(|l| l.starts_with("A2,pass")), "{v}");
}

#[test]
fn compare_passes_and_fails_by_budget() {
    let dir = setup(OU);
    let o = run(&["compare", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    for name in ["comparison.csv", "comparison.txt", "regularity.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    // coarse grid plus a budget far below its discretisation error
    let coarse = OU
        .replace("nodes = 81", "nodes = 41")
        .replace("time_steps = 200", "time_steps = 10")
        .replace("[solver]", "[compare]\nbudget = 1e-6\nregularity = false\n\n[solver]")
        .replace("n_paths = 4000", "n_paths = 100000");
    let dir = setup(&coarse);
    let o = run(&["compare", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 3, "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
}

#[test]
fn demo_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["demo", "--seed", "42"], dir.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    let out = String::from_utf8_lossy(&a.stdout);
    assert!(out.contains("10/10 passed"), "{out}");
    let b = run(&["demo", "--seed", "42"], dir.path());
    assert_eq!(a.stdout, b.stdout);
}
