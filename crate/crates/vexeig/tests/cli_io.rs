//! End-to-end behavior of the command-line binary: output files, exit
//! codes, and the binary-exact eigenpair round trip.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use vexeig::cli::load_eigenpair;
use vexeig::grid::{Domain, Grid};

const CONSTANT_FIELD: &str = "exponents.p.kind = constant\nexponents.p.value = 6\n\
     exponents.q.kind = constant\nexponents.q.value = 6\n\
     exponents.alpha.kind = constant\nexponents.alpha.value = 2\n\
     exponents.beta.kind = constant\nexponents.beta.value = 2\n\
     exponents.c.kind = constant\nexponents.c.value = 1\n";

struct Workdir(PathBuf);

impl Workdir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("vexeig_cli_{tag}_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let path = self.0.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn run_cli(config: &Path, out: &Path) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_vexeig"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
}

#[test]
fn solve_writes_outputs_and_roundtrips() {
    let ws = Workdir::new("solve");
    let cfg = ws.write(
        "run.cfg",
        &format!("command = solve\ngrid.n = 9\nsolve.r = 1\nsolve.multistart = 2\n{CONSTANT_FIELD}"),
    );
    let out = ws.path("out");
    let status = run_cli(&cfg, &out);
    assert_eq!(status.code(), Some(0));
    for file in ["eigenpair.csv", "trace.csv", "diagnostics.csv"] {
        assert!(out.join(file).exists(), "{file} missing");
    }

    // The written state reloads bit-exactly.
    let grid = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[9]).unwrap();
    let state = load_eigenpair(&out.join("eigenpair.csv"), &grid).unwrap();
    let text = std::fs::read_to_string(out.join("eigenpair.csv")).unwrap();
    let mut rewritten = String::from("x,u,v\n");
    for i in 0..grid.node_count() {
        rewritten.push_str(&format!(
            "{},{},{}\n",
            grid.node_coord(i)[0],
            state.z.values()[i],
            state.w.values()[i]
        ));
    }
    assert_eq!(text, rewritten, "round trip must be bit-exact");
    let _ = Arc::strong_count(&grid);
}

#[test]
fn sweep_writes_flat_lambda_column() {
    let ws = Workdir::new("sweep");
    let cfg = ws.write(
        "run.cfg",
        &format!(
            "command = sweep\ngrid.n = 7\nsolve.multistart = 2\n\
             sweep.r_min = 1e-2\nsweep.r_max = 1e2\nsweep.count = 9\n{CONSTANT_FIELD}"
        ),
    );
    let out = ws.path("out");
    let status = run_cli(&cfg, &out);
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("R,lambda,converged"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    // Constant exponents: the eigenvalue family is flat in R.
    for &l in &lambdas {
        assert!((l - lambdas[0]).abs() <= 1e-6 * lambdas[0], "{lambdas:?}");
    }
    assert!(rows.iter().all(|r| r[2] == "true"));
}

#[test]
fn verify_reports_and_exits_zero() {
    let ws = Workdir::new("verify");
    let solve_cfg = ws.write(
        "solve.cfg",
        &format!("command = solve\ngrid.n = 9\nsolve.r = 1\nsolve.multistart = 2\n{CONSTANT_FIELD}"),
    );
    let out = ws.path("out");
    assert_eq!(run_cli(&solve_cfg, &out).code(), Some(0));

    let verify_cfg = ws.write(
        "verify.cfg",
        &format!(
            "command = verify\ngrid.n = 9\nsolve.r = 1\n\
             verify.eigenpair = {}\n{CONSTANT_FIELD}",
            out.join("eigenpair.csv").display()
        ),
    );
    let vout = ws.path("vout");
    let status = run_cli(&verify_cfg, &vout);
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(vout.join("diagnostics.csv")).unwrap();
    assert!(text.starts_with("check,passed,lhs,rhs,margin"));
    assert!(!text.contains(",false,"), "all checks must pass:\n{text}");
}

#[test]
fn malformed_config_exits_one() {
    let ws = Workdir::new("badcfg");
    let cfg = ws.write("run.cfg", "command = solve\nexpnents.p.kind = constant\n");
    let status = run_cli(&cfg, &ws.path("out"));
    assert_eq!(status.code(), Some(1));
}

#[test]
fn nonconvergence_exits_two() {
    let ws = Workdir::new("noconv");
    // One iteration with an unreachable tolerance cannot converge.
    let cfg = ws.write(
        "run.cfg",
        &format!(
            "command = solve\ngrid.n = 9\nsolve.r = 1\nsolve.max_iters = 1\n\
             solve.grad_tol = 1e-15\nsolve.multistart = 1\n{CONSTANT_FIELD}"
        ),
    );
    let status = run_cli(&cfg, &ws.path("out"));
    assert_eq!(status.code(), Some(2));
}

#[test]
fn demo_zero_infimum_prints_decreasing_quotients() {
    let ws = Workdir::new("demo");
    // Reduced size keeps the smoke test quick; the full-size run is part of
    // the acceptance suite.
    let cfg = ws.write("run.cfg", "command = demo-zero-infimum\ngrid.n = 63\nscalar.max_iters = 2000\n");
    let out = ws.path("out");
    let output = Command::new(env!("CARGO_BIN_EXE_vexeig"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mus: Vec<f64> = stdout
        .lines()
        .filter_map(|l| l.strip_prefix("amplitude="))
        .map(|l| l.split("mu=").nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(mus.len(), 5);
    assert!(mus.windows(2).all(|w| w[1] < w[0]), "{mus:?}");
    let text = std::fs::read_to_string(out.join("scalar.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
}
