use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mgb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgb")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_outputs_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "p = 2.0\nalpha = 1\nlevels = 2\n");
    let trace = dir.path().join("trace.csv");
    let mesh = dir.path().join("mesh.txt");
    let sol = dir.path().join("sol.txt");
    let out = mgb(&[
        "solve",
        "--config",
        &cfg,
        "--trace",
        trace.to_str().unwrap(),
        "--dump-mesh",
        mesh.to_str().unwrap(),
        "--dump-solution",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("k,t,rho,level,newton_iters,direct_step,objective,decrement,cum_newton,wall_ms\n"));
    // fine mesh of a 2x2 start refined once: 25 vertices, 32 triangles
    assert!(fs::read_to_string(&mesh).unwrap().starts_with("2 25 32\n"));
    assert!(fs::read_to_string(&sol).unwrap().lines().count() > 25);
    assert!(String::from_utf8_lossy(&out.stdout).contains("status=Converged"));
}

#[test]
fn traces_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "p = 1.5\nalpha = 2\nlevels = 2\n");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for t in [&a, &b] {
        assert_eq!(mgb(&["solve", "--config", &cfg, "--trace", t.to_str().unwrap()]).status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn exit_codes_for_failures() {
    let dir = tempfile::tempdir().unwrap();
    let budget = write_config(dir.path(), "budget.toml", "levels = 2\nbudget_s = 0.0\n");
    assert_eq!(mgb(&["solve", "--config", &budget]).status.code(), Some(3));
    let capped = write_config(dir.path(), "capped.toml", "levels = 2\nmax_newton = 0\n");
    assert_eq!(mgb(&["solve", "--config", &capped]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.toml", "p = -1.0\n");
    let out = mgb(&["solve", "--config", &bad]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p = -1"));
}

#[test]
fn bench_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bench.toml",
        "p = 2.0\nalpha = 1\n[bench]\nalgorithm = [\"mgb\", \"naive-theta\"]\nlevels = [1, 2]\n",
    );
    let out_csv = dir.path().join("bench.csv");
    let out = mgb(&["bench", "--config", &cfg, "--out", out_csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("algorithm,p,alpha,cells0,levels,theta,h,status"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn check_suite_passes() {
    let out = mgb(&["check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
