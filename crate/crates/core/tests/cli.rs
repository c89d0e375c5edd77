use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

use plapsys_core::snapshot::read_snapshot;

const SMALL: &str = "\
p = 3
n = 1
k = 2
cells = 200
L = 6
t_end = 1
snapshots = log:0.25:1:3
weights = 1, 2
width = 0.8
";

fn plapsys(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_plapsys"))
        .args(args)
        .env("PLAPSYS_THREADS", "2")
        .output()
        .expect("spawn plapsys")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = plapsys(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("name,verdict,worst_value,tolerance\n"));
    assert!(stdout.contains("mass_conservation,PASS"));
    let log = fs::read_to_string(out.join("run_log.csv")).unwrap();
    assert!(log.starts_with("step,t,dt,M_1,M_2,sup_grad,clipped_mass\n"));
    assert!(!log.contains('\r'));
    let snap = read_snapshot(BufReader::new(fs::File::open(out.join("snapshots/snapshot_0003.txt")).unwrap())).unwrap();
    assert_eq!(snap.time(), 1.0);
    assert_eq!(snap.k(), 2);
    assert_eq!(fs::read_to_string(out.join("verdicts.csv")).unwrap(), stdout);
    assert!(String::from_utf8_lossy(&res.stderr).contains("n = 1"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = plapsys(&["entropy", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(res.status.code().is_some());
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn verify_barenblatt_prints_csv() {
    let res = plapsys(&["verify-barenblatt", "--p", "3,4", "--n", "1", "--mass", "0.5,1"]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("p,n,M,C_M,mass_error,residual_h,residual_h2,ratio"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("3,1,") || l.starts_with("4,1,")).count(), 4);
    assert!(stdout.contains("verify_barenblatt,PASS"));
}

#[test]
fn failing_verdict_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("L = 6", "L = 15"));
    let out = dir.path().join("out");
    // a strongly regularised run lies far from the unregularised one
    let res = plapsys(&["epsilon-ladder", "--config", &cfg, "--out", out.to_str().unwrap(), "--ladder", "1,0"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8(res.stdout).unwrap().contains("epsilon_ladder,FAIL"));
}

#[test]
fn harnack_skips_radii_inside_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = plapsys(&["harnack", "--config", &cfg, "--out", out.to_str().unwrap(), "--radii", "0.5,2,2.5,3", "--T", "1"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stderr).contains("R = 0.5 skipped"));
    let csv = fs::read_to_string(out.join("harnack.csv")).unwrap();
    assert!(csv.starts_with("component,R,lhs,center_value,bracket,mu,C_hat\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("1,") || l.starts_with("2,")).count(), 6);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}weights = 0, 0\n").replace("weights = 1, 2\n", ""));
    let res = plapsys(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("config line 9"));

    let cfg = write_config(dir.path(), &SMALL.replace("p = 3", "p = 1.5"));
    let res = plapsys(&["simulate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("p must exceed 2"));
}

#[test]
fn convergence_study_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p = 3\nn = 1\nk = 1\ncells = 100\nL = 4\nt_end = 1.5\npreset = barenblatt-weighted\nweights = 1\nt0 = 1\n",
    );
    let out = dir.path().join("out");
    let res = plapsys(&["convergence-study", "--config", &cfg, "--out", out.to_str().unwrap(), "--levels", "3"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("level,cells,h,error,ratio,order,mass_drift\n"));
    assert!(csv.contains("\n2,400,"));
}
