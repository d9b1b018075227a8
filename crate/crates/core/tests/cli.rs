use std::path::Path;
use std::process::{Command, Output};

use spinflow::snapshot::read_state;

fn spinflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinflow")).args(args).env_remove("SPINFLOW_THREADS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flat_stationary_simulation_stays_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flat.conf",
        "scenario: t2\nsizes: 12\ngenerator: flat_stationary\ngauge: deturck\ndt: 1e-2\nt_end: 0.1\nsnapshot_cadence: 5\n",
    );
    let out = dir.path().join("out");
    let o = spinflow(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cols: Vec<usize> = ["res_nabla_h", "res_dh", "res_flux", "res_phi"]
        .iter()
        .map(|name| header.iter().position(|h| h == name).unwrap())
        .collect();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        for &c in &cols {
            assert!(row[c] <= 1e-11);
        }
    }
    for step in [0, 5, 10] {
        assert!(out.join(format!("step{step:08}.snap")).exists());
    }
    let last = read_state(&out.join("final.snap")).unwrap();
    assert!((last.t - 0.1).abs() < 1e-15);
}

#[test]
fn seed_flag_changes_generated_data_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.conf", "scenario: t2\nsizes: 8\ngenerator: random_smooth\namplitude: 0.1\ndt: 1e-3\nt_end: 2e-3\n");
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = spinflow(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", seed, "--threads", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(out.join("diagnostics.csv")).unwrap()
    };
    let a = run("5", "a");
    assert_eq!(a, run("5", "b"));
    assert_ne!(a, run("6", "c"));
}

#[test]
fn dimension_rule_violation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "scenario: t3\nc: 1\n");
    let o = spinflow(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("3k = n + 1"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "sizes: 8\nwobble: 3\n");
    let o = spinflow(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn oversized_step_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stiff.conf", "scenario: t2\nsizes: 16\ngenerator: random_smooth\namplitude: 0.2\ndt: 0.5\nt_end: 5\n");
    let o = spinflow(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn verify_algebra_passes_and_unknown_suite_fails() {
    let o = spinflow(&["verify", "algebra"]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with("PASS")));
    let o = spinflow(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown suite"));
}

#[test]
fn verify_identities_reports_orders() {
    let o = spinflow(&["verify", "identities", "--grids", "16,32,64"]);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(o.status.success(), "{table}");
    let q = table.lines().find(|l| l.contains("q_ricci")).unwrap();
    let order: f64 = q.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((1.8..=2.2).contains(&order), "{q}");
}

#[test]
fn snapshot_inspect_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.conf", "scenario: t2\nsizes: 8\ngenerator: flat_stationary\nt_end: 0\n");
    let out = dir.path().join("out");
    assert!(spinflow(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]).status.success());
    let snap = out.join("final.snap");
    let o = spinflow(&["snapshot", "inspect", snap.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("spinor-flow-snapshot v1\n"));
    let residual: f64 = text.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(residual <= 1e-14);

    let bytes = std::fs::read(&snap).unwrap();
    let cut = dir.path().join("cut.snap");
    std::fs::write(&cut, &bytes[..bytes.len() - 17]).unwrap();
    let o = spinflow(&["snapshot", "inspect", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("byte {}", bytes.len() - 17)), "{}", stderr(&o));
}

#[test]
fn parallel_run_matches_single_thread() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.conf", "scenario: t2\nsizes: 16\ngenerator: random_smooth\namplitude: 0.1\ndt: 1e-3\nt_end: 5e-3\n");
    let run = |threads: &str| -> Vec<f64> {
        let out = dir.path().join(threads);
        let o = spinflow(&["--threads", threads, "simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
        csv.lines().skip(1).flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0), "{x} vs {y}");
    }
}
