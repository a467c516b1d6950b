use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn suolson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suolson"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 12] = [
    "--set", "n_cells=48",
    "--set", "n_moments=8",
    "--set", "initial_rank=4",
    "--set", "t_end=0.5",
    "--set", "sigma_ic=0.5",
    "--set", "snapshot_times=0.25",
];

fn run_small(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = config(cfg);
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    suolson(&args)
}

#[test]
fn run_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("desk");
    let o = run_small("desk.cfg", &out, &[]);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("mass drift"), "{stdout}");
    for f in ["diagnostics.csv", "snapshot_t0.csv", "snapshot_t0.25.csv", "snapshot_t0.5.csv", "fxmu_t0.5.csv", "rank.png"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.lines().count() >= 3);
}

#[test]
fn every_solver_and_problem_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (cfg, solver) in [
        ("plane_source.cfg", "full"),
        ("plane_source.cfg", "advection"),
        ("external_source.cfg", "dlra"),
        ("external_source.cfg", "full"),
    ] {
        let out = dir.path().join(format!("{cfg}-{solver}"));
        let o = run_small(cfg, &out, &["--solver", solver, "--set", "plots=false"]);
        assert!(o.status.success(), "{cfg} {solver}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("diagnostics.csv").is_file());
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let noise = ["--set", "ic_noise=0.01", "--set", "rng_seed=3", "--set", "plots=false"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_small("desk.cfg", &a, &noise).status.success());
    assert!(run_small("desk.cfg", &b, &noise).status.success());
    for f in ["diagnostics.csv", "snapshot_t0.5.csv", "fxmu_t0.5.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_small("desk.cfg", &dir.path().join("x"), &["--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));

    let o = run_small("desk.cfg", &dir.path().join("x"), &["--set", "cfl=1.5"]);
    assert_eq!(o.status.code(), Some(1));

    let o = suolson(&["run", "--config", "/nonexistent/file.cfg"]);
    assert_eq!(o.status.code(), Some(1));

    let o = suolson(&["verify", "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = run_small("desk.cfg", &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_reports_per_criterion() {
    let o = suolson(&["verify", "--suite", "1"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion  1 PASS"), "{stdout}");

    let o = suolson(&["verify", "--suite", "4"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion  4 FAIL"));
}
