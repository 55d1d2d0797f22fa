//! Run configuration, command execution and CSV output.
//!
//! The configuration format is line-oriented `key = value` text with `#`
//! comments and dot-namespaced keys; unknown and duplicate keys are fatal,
//! since a silent typo in an exponent spec corrupts an experiment. Exactly
//! one `command` must be set: `solve`, `sweep`, `scalar`, `verify` or
//! `demo-zero-infimum`.
//!
//! Outputs are CSV files in the output directory: `eigenpair.csv`
//! (coordinates and state values, written with round-trip precision),
//! `sweep.csv` (R, lambda, converged), `trace.csv` (iteration, energy,
//! residual), `diagnostics.csv` (check, passed, lhs, rhs, margin) and
//! `scalar.csv` (amplitude, mu). Exit codes: 0 on success, 2 on
//! non-convergence or failed verification, 1 on input errors. The sweep
//! may run its entries on several threads (capped by `VEXEIG_THREADS`);
//! all files are written by the main thread after the joins.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::diagnostics::{full_report, DiagnosticsOptions, DiagnosticsReport};
use crate::energy::{coupling_energy, dirichlet_energy, StatePair};
use crate::grid::{Domain, Grid, GridFunction};
use crate::problem::{build_exponent_field, validate_hypotheses, ExponentField, ExponentSpec, FieldSpec};
use crate::solver::{
    log_spaced_levels, merge_sweep, minimize_constrained, minimize_scalar, InitKind,
    ScalarMinimizeResult, ScalarOptions, SolveOptions, SolveResult, SweepEntry,
};
use crate::{Error, Result};

/// The command a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Scalar,
    Verify,
    DemoZeroInfimum,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub domain: Domain,
    pub n: Vec<usize>,
    pub exponents: Option<FieldSpec>,
    pub balance_tol: f64,
    pub r: f64,
    pub sweep_levels: Vec<f64>,
    pub solve: SolveOptions,
    pub init_file: Option<PathBuf>,
    pub scalar_exponent: String,
    pub scalar: ScalarOptions,
    pub verify_eigenpair: Option<PathBuf>,
    pub verify_r: Option<f64>,
    pub k_max: usize,
    pub interior_floor: f64,
    pub multiplier_tol: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Default)]
struct SymbolSpec {
    kind: Option<String>,
    value: Option<f64>,
    intercept: Option<f64>,
    slope: Option<Vec<f64>>,
    center: Option<Vec<f64>>,
    knots: Option<Vec<(f64, f64)>>,
}

impl SymbolSpec {
    fn build(&self, name: &str) -> Result<Option<ExponentSpec>> {
        let Some(kind) = &self.kind else {
            return Ok(None);
        };
        let missing = |what: &str| Error::ConfigRange {
            key: format!("exponents.{name}.{what}"),
            message: format!("required by kind `{kind}`"),
        };
        let spec = match kind.as_str() {
            "constant" => ExponentSpec::Constant { value: self.value.ok_or_else(|| missing("value"))? },
            "affine" => ExponentSpec::Affine {
                intercept: self.intercept.ok_or_else(|| missing("intercept"))?,
                slope: self.slope.clone().ok_or_else(|| missing("slope"))?,
            },
            "radial" => ExponentSpec::Radial {
                center: self.center.clone().ok_or_else(|| missing("center"))?,
                knots: self.knots.clone().ok_or_else(|| missing("knots"))?,
            },
            "piecewise" => ExponentSpec::Piecewise {
                knots: self.knots.clone().ok_or_else(|| missing("knots"))?,
            },
            other => {
                return Err(Error::ConfigRange {
                    key: format!("exponents.{name}.kind"),
                    message: format!("unknown kind `{other}` (expected constant|affine|radial|piecewise)"),
                })
            }
        };
        Ok(Some(spec))
    }
}

fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::ConfigRange {
                key: key.to_string(),
                message: format!("`{tok}` is not a number"),
            })
        })
        .collect()
}

fn parse_float(key: &str, value: &str) -> Result<f64> {
    let v = parse_floats(key, value)?;
    if v.len() != 1 {
        return Err(Error::ConfigRange { key: key.into(), message: "expected one number".into() });
    }
    Ok(v[0])
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.trim().parse::<usize>().map_err(|_| Error::ConfigRange {
        key: key.into(),
        message: format!("`{value}` is not a nonnegative integer"),
    })
}

fn parse_knots(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split_whitespace()
        .map(|pair| {
            let (t, v) = pair.split_once(':').ok_or_else(|| Error::ConfigRange {
                key: key.to_string(),
                message: format!("knot `{pair}` must be `abscissa:value`"),
            })?;
            let t = t.parse::<f64>().map_err(|_| Error::ConfigRange {
                key: key.to_string(),
                message: format!("knot abscissa `{t}` is not a number"),
            })?;
            let v = v.parse::<f64>().map_err(|_| Error::ConfigRange {
                key: key.to_string(),
                message: format!("knot value `{v}` is not a number"),
            })?;
            Ok((t, v))
        })
        .collect()
}

/// Parses run configuration text; unknown or duplicate keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut command = None;
    let mut dim = 1usize;
    let mut dim_set = false;
    let mut bounds_x = (0.0, 1.0);
    let mut bounds_y: Option<(f64, f64)> = None;
    let mut grid_n: Option<usize> = None;
    let mut grid_ny: Option<usize> = None;
    let mut symbols: [SymbolSpec; 5] = Default::default();
    let sym_names = ["p", "q", "alpha", "beta", "c"];
    let mut balance_tol = 1e-10;
    let mut r = 1.0;
    let mut sweep_r_min = 1e-2;
    let mut sweep_r_max = 1e2;
    let mut sweep_count = 9usize;
    let mut sweep_list: Option<Vec<f64>> = None;
    let mut solve = SolveOptions::default();
    let mut init_file = None;
    let mut scalar_exponent = "p".to_string();
    let mut scalar = ScalarOptions::default();
    let mut scalar_amps_set = false;
    let mut verify_eigenpair = None;
    let mut verify_r = None;
    let mut k_max = 6usize;
    let mut interior_floor = 1e-8;
    let mut multiplier_tol = 0.02;
    let mut out_dir = PathBuf::from(".");
    let mut seen: std::collections::BTreeSet<String> = Default::default();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        let unknown = || Error::ConfigParse { line: line_no, message: format!("unknown key `{key}`") };

        if let Some(rest) = key.strip_prefix("exponents.") {
            let (sym, attr) = rest.split_once('.').ok_or_else(unknown)?;
            let slot = sym_names
                .iter()
                .position(|&s| s == sym)
                .ok_or_else(unknown)
                .map(|i| &mut symbols[i])?;
            match attr {
                "kind" => slot.kind = Some(value.to_string()),
                "value" => slot.value = Some(parse_float(key, value)?),
                "intercept" => slot.intercept = Some(parse_float(key, value)?),
                "slope" => slot.slope = Some(parse_floats(key, value)?),
                "center" => slot.center = Some(parse_floats(key, value)?),
                "knots" => slot.knots = Some(parse_knots(key, value)?),
                _ => return Err(unknown()),
            }
            continue;
        }

        match key {
            "command" => {
                command = Some(match value {
                    "solve" => Command::Solve,
                    "sweep" => Command::Sweep,
                    "scalar" => Command::Scalar,
                    "verify" => Command::Verify,
                    "demo-zero-infimum" => Command::DemoZeroInfimum,
                    other => {
                        return Err(Error::ConfigParse {
                            line: line_no,
                            message: format!("unknown command `{other}`"),
                        })
                    }
                })
            }
            "domain.dim" => {
                dim = parse_usize(key, value)?;
                dim_set = true;
                if dim != 1 && dim != 2 {
                    return Err(Error::ConfigRange { key: key.into(), message: "dim must be 1 or 2".into() });
                }
            }
            "domain.x" => {
                let v = parse_floats(key, value)?;
                if v.len() != 2 {
                    return Err(Error::ConfigRange { key: key.into(), message: "expected `a b`".into() });
                }
                bounds_x = (v[0], v[1]);
            }
            "domain.y" => {
                let v = parse_floats(key, value)?;
                if v.len() != 2 {
                    return Err(Error::ConfigRange { key: key.into(), message: "expected `a b`".into() });
                }
                bounds_y = Some((v[0], v[1]));
            }
            "grid.n" => grid_n = Some(parse_usize(key, value)?),
            "grid.ny" => grid_ny = Some(parse_usize(key, value)?),
            "balance_tol" => balance_tol = parse_float(key, value)?,
            "solve.r" => r = parse_float(key, value)?,
            "solve.max_iters" => solve.max_iters = parse_usize(key, value)?,
            "solve.grad_tol" => solve.grad_tol = parse_float(key, value)?,
            "solve.step_shrink" => solve.step_shrink = parse_float(key, value)?,
            "solve.armijo_c" => solve.armijo_c = parse_float(key, value)?,
            "solve.eps" => solve.eps_regularization = parse_float(key, value)?,
            "solve.seed" => solve.seed = parse_usize(key, value)? as u64,
            "solve.multistart" => solve.multistart = parse_usize(key, value)?,
            "solve.init" => {
                solve.init = match value {
                    "sine_bump" => InitKind::SineBump,
                    "random_positive" => InitKind::RandomPositive,
                    "user" => InitKind::User,
                    other => {
                        return Err(Error::ConfigRange {
                            key: key.into(),
                            message: format!("unknown init `{other}`"),
                        })
                    }
                }
            }
            "solve.init_file" => init_file = Some(PathBuf::from(value)),
            "sweep.r_min" => sweep_r_min = parse_float(key, value)?,
            "sweep.r_max" => sweep_r_max = parse_float(key, value)?,
            "sweep.count" => sweep_count = parse_usize(key, value)?,
            "sweep.r_list" => sweep_list = Some(parse_floats(key, value)?),
            "scalar.exponent" => {
                if value != "p" && value != "q" {
                    return Err(Error::ConfigRange { key: key.into(), message: "expected p or q".into() });
                }
                scalar_exponent = value.to_string();
            }
            "scalar.amplitudes" => {
                scalar.amplitudes = parse_floats(key, value)?;
                scalar_amps_set = true;
            }
            "scalar.max_iters" => scalar.max_iters = parse_usize(key, value)?,
            "verify.eigenpair" => verify_eigenpair = Some(PathBuf::from(value)),
            "verify.r" => verify_r = Some(parse_float(key, value)?),
            "diagnostics.k_max" => k_max = parse_usize(key, value)?,
            "diagnostics.interior_floor" => interior_floor = parse_float(key, value)?,
            "diagnostics.multiplier_tol" => multiplier_tol = parse_float(key, value)?,
            "out" => out_dir = PathBuf::from(value),
            _ => return Err(unknown()),
        }
    }

    let command = command.ok_or_else(|| Error::ConfigParse {
        line: 0,
        message: "missing `command = solve|sweep|scalar|verify|demo-zero-infimum`".into(),
    })?;

    // Command-specific defaults: the zero-infimum demonstration runs the
    // non-monotone profile on (-2, 2) at n = 255 with amplitude caps
    // spanning four decades.
    let demo = command == Command::DemoZeroInfimum;
    if demo {
        if !seen.contains("domain.x") {
            bounds_x = (-2.0, 2.0);
        }
        if grid_n.is_none() {
            grid_n = Some(255);
        }
        if !scalar_amps_set {
            scalar.amplitudes = vec![1.0, 10.0, 100.0, 1e3, 1e4];
        }
        if symbols[0].kind.is_none() {
            symbols[0].kind = Some("radial".into());
            symbols[0].center = Some(vec![0.0]);
            symbols[0].knots = Some(vec![(0.0, 3.0), (1.0, 3.0), (2.0, 2.0)]);
        }
    }
    let n_x = grid_n.unwrap_or(15);

    if bounds_y.is_some() && (!dim_set || dim == 1) {
        return Err(Error::ConfigRange {
            key: "domain.y".into(),
            message: "requires domain.dim = 2".into(),
        });
    }
    if dim == 2 && bounds_y.is_none() {
        bounds_y = Some((0.0, 1.0));
    }
    let domain = match dim {
        1 => Domain::interval(bounds_x.0, bounds_x.1)?,
        _ => Domain::rectangle(bounds_x, bounds_y.unwrap())?,
    };
    let n = match dim {
        1 => vec![n_x],
        _ => vec![n_x, grid_ny.unwrap_or(n_x)],
    };

    // Range checks on numeric knobs.
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::ConfigRange { key: "solve.r".into(), message: "must be positive".into() });
    }
    if balance_tol <= 0.0 {
        return Err(Error::ConfigRange { key: "balance_tol".into(), message: "must be positive".into() });
    }
    if solve.grad_tol <= 0.0 {
        return Err(Error::ConfigRange { key: "solve.grad_tol".into(), message: "must be positive".into() });
    }
    if !(solve.step_shrink > 0.0 && solve.step_shrink < 1.0) {
        return Err(Error::ConfigRange {
            key: "solve.step_shrink".into(),
            message: "must lie in (0, 1)".into(),
        });
    }
    if !(solve.armijo_c > 0.0 && solve.armijo_c < 1.0) {
        return Err(Error::ConfigRange {
            key: "solve.armijo_c".into(),
            message: "must lie in (0, 1)".into(),
        });
    }
    if scalar.amplitudes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::ConfigRange {
            key: "scalar.amplitudes".into(),
            message: "amplitude caps must be positive".into(),
        });
    }
    let sweep_levels = match sweep_list {
        Some(list) => {
            if list.is_empty() || list.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::ConfigRange {
                    key: "sweep.r_list".into(),
                    message: "levels must be positive".into(),
                });
            }
            list
        }
        None => log_spaced_levels(sweep_r_min, sweep_r_max, sweep_count).map_err(|_| {
            Error::ConfigRange {
                key: "sweep.r_min".into(),
                message: "need 0 < r_min < r_max and count >= 2".into(),
            }
        })?,
    };

    let exponents = {
        let built: Vec<Option<ExponentSpec>> = sym_names
            .iter()
            .zip(&symbols)
            .map(|(name, slot)| slot.build(name))
            .collect::<Result<_>>()?;
        match built.iter().filter(|s| s.is_some()).count() {
            0 => None,
            5 => {
                let mut it = built.into_iter().map(Option::unwrap);
                Some(FieldSpec {
                    p: it.next().unwrap(),
                    q: it.next().unwrap(),
                    alpha: it.next().unwrap(),
                    beta: it.next().unwrap(),
                    c: it.next().unwrap(),
                })
            }
            _ => {
                // Scalar and demo runs only need p (or q); keep the
                // incomplete set but remember which symbols exist.
                let mut it = built.into_iter();
                let p = it.next().unwrap();
                let q = it.next().unwrap();
                let filler = ExponentSpec::constant(6.0);
                let zero_order = ExponentSpec::constant(2.0);
                Some(FieldSpec {
                    p: p.unwrap_or_else(|| filler.clone()),
                    q: q.unwrap_or(filler),
                    alpha: it.next().unwrap().unwrap_or_else(|| zero_order.clone()),
                    beta: it.next().unwrap().unwrap_or(zero_order),
                    c: it.next().unwrap().unwrap_or_else(|| ExponentSpec::constant(1.0)),
                })
            }
        }
    };

    Ok(RunConfig {
        command,
        domain,
        n,
        exponents,
        balance_tol,
        r,
        sweep_levels,
        solve,
        init_file,
        scalar_exponent,
        scalar,
        verify_eigenpair,
        verify_r,
        k_max,
        interior_floor,
        multiplier_tol,
        out_dir,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn eigenpair_csv(state: &StatePair) -> String {
    let grid = state.z.grid();
    let dim = grid.dimension();
    let mut out = String::new();
    out.push_str(if dim == 1 { "x,u,v\n" } else { "x,y,u,v\n" });
    for i in 0..grid.node_count() {
        let x = grid.node_coord(i);
        for ax in 0..dim {
            let _ = write!(out, "{},", x[ax]);
        }
        let _ = writeln!(out, "{},{}", state.z.values()[i], state.w.values()[i]);
    }
    out
}

fn scalar_csv(u: &GridFunction) -> String {
    let grid = u.grid();
    let dim = grid.dimension();
    let mut out = String::new();
    out.push_str(if dim == 1 { "x,u\n" } else { "x,y,u\n" });
    for i in 0..grid.node_count() {
        let x = grid.node_coord(i);
        for ax in 0..dim {
            let _ = write!(out, "{},", x[ax]);
        }
        let _ = writeln!(out, "{}", u.values()[i]);
    }
    out
}

fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::from("iteration,energy,residual\n");
    for e in &result.trace {
        let _ = writeln!(out, "{},{},{}", e.iteration, e.energy, e.residual);
    }
    out
}

fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("R,lambda,converged\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{}", e.r, e.result.lambda, e.result.converged);
    }
    out
}

fn diagnostics_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("check,passed,lhs,rhs,margin\n");
    for c in &report.checks {
        let _ = writeln!(out, "{},{},{},{},{}", c.name, c.passed, c.lhs, c.rhs, c.margin);
    }
    out
}

fn amplitudes_csv(result: &ScalarMinimizeResult) -> String {
    let mut out = String::from("amplitude,mu\n");
    for (amp, mu) in &result.per_amplitude {
        let _ = writeln!(out, "{amp},{mu}");
    }
    out
}

/// Loads a state pair from `eigenpair.csv` written by a previous run.
pub fn load_eigenpair(path: &Path, grid: &Arc<Grid>) -> Result<StatePair> {
    let text = std::fs::read_to_string(path)?;
    let dim = grid.dimension();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Input("empty eigenpair file".into()))?;
    let expected = if dim == 1 { "x,u,v" } else { "x,y,u,v" };
    if header.trim() != expected {
        return Err(Error::Input(format!(
            "eigenpair header `{header}` does not match grid (expected `{expected}`)"
        )));
    }
    let mut z = Vec::new();
    let mut w = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != dim + 2 {
            return Err(Error::Input(format!("row {} has {} columns", i + 2, cols.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("row {}: `{s}` is not a number", i + 2)))
        };
        z.push(parse(cols[dim])?);
        w.push(parse(cols[dim + 1])?);
    }
    StatePair::new(
        GridFunction::from_values(grid, z)?,
        GridFunction::from_values(grid, w)?,
    )
}

fn thread_budget() -> usize {
    std::env::var("VEXEIG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

/// Sweep entries solved on up to `threads` worker threads; results are
/// merged in level order, so the output is independent of scheduling.
fn parallel_sweep(
    field: &ExponentField,
    levels: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepEntry>> {
    let threads = thread_budget().min(levels.len()).max(1);
    if threads == 1 {
        return levels
            .iter()
            .map(|&r| minimize_constrained(field, r, opts).map(|result| SweepEntry { r, result }))
            .collect();
    }
    let mut slots: Vec<Option<Result<SweepEntry>>> = Vec::new();
    slots.resize_with(levels.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= levels.len() {
                    break;
                }
                let out = minimize_constrained(field, levels[i], opts)
                    .map(|result| SweepEntry { r: levels[i], result });
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .iter_mut()
        .map(|slot| slot.take().expect("every level solved"))
        .collect()
}

fn field_for(config: &RunConfig, grid: &Arc<Grid>) -> Result<ExponentField> {
    let spec = config.exponents.as_ref().ok_or_else(|| {
        Error::ConfigRange {
            key: "exponents".into(),
            message: "solve and sweep need exponents.p/.q/.alpha/.beta/.c".into(),
        }
    })?;
    let field = build_exponent_field(grid, spec)?;
    let report = validate_hypotheses(&field, config.balance_tol);
    if !report.passed {
        let mut msg = String::from("hypothesis validation failed:");
        for v in &report.violations {
            let _ = write!(msg, " [{} worst {:.3e} at {:?}]", v.hypothesis, v.value, v.point);
        }
        return Err(Error::Input(msg));
    }
    Ok(field)
}

fn diagnostics_options(config: &RunConfig, r: f64) -> DiagnosticsOptions {
    DiagnosticsOptions {
        r,
        grad_tol: config.solve.grad_tol,
        eps_regularization: config.solve.eps_regularization,
        k_max: config.k_max,
        interior_floor: config.interior_floor,
        seed: config.solve.seed,
        multiplier_tol: config.multiplier_tol,
    }
}

fn scalar_exponent_samples(config: &RunConfig, field: &ExponentField) -> Vec<f64> {
    if config.scalar_exponent == "q" {
        field.q().to_vec()
    } else {
        field.p().to_vec()
    }
}

/// Executes the configured command and returns the process exit code.
pub fn run(config: &RunConfig) -> Result<i32> {
    let grid = Grid::new(config.domain.clone(), &config.n)?;
    let out = &config.out_dir;
    match config.command {
        Command::Solve => {
            let field = field_for(config, &grid)?;
            let mut opts = config.solve.clone();
            if opts.init == InitKind::User {
                let path = config.init_file.as_ref().ok_or_else(|| Error::ConfigRange {
                    key: "solve.init_file".into(),
                    message: "required when solve.init = user".into(),
                })?;
                opts.init_state = Some(load_eigenpair(path, &grid)?);
            }
            let result = minimize_constrained(&field, config.r, &opts)?;
            let report = full_report(&result, &field, &diagnostics_options(config, config.r))?;
            write_file(&out.join("eigenpair.csv"), &eigenpair_csv(&result.state))?;
            write_file(&out.join("trace.csv"), &trace_csv(&result))?;
            write_file(&out.join("diagnostics.csv"), &diagnostics_csv(&report))?;
            println!(
                "lambda={} residual={:.3e} iterations={}",
                result.lambda, result.lagrange_residual, result.iterations
            );
            Ok(if result.converged { 0 } else { 2 })
        }
        Command::Sweep => {
            let field = field_for(config, &grid)?;
            let entries = parallel_sweep(&field, &config.sweep_levels, &config.solve)?;
            for e in &entries {
                println!(
                    "R={} lambda={} residual={:.3e} iterations={}",
                    e.r, e.result.lambda, e.result.lagrange_residual, e.result.iterations
                );
            }
            write_file(&out.join("sweep.csv"), &sweep_csv(&entries))?;
            match merge_sweep(entries) {
                Ok(sweep_result) => {
                    let best = sweep_result
                        .entries
                        .iter()
                        .filter(|e| e.result.converged)
                        .min_by(|a, b| a.result.lambda.partial_cmp(&b.result.lambda).unwrap())
                        .expect("a converged entry exists");
                    let report = full_report(
                        &best.result,
                        &field,
                        &diagnostics_options(config, best.r),
                    )?;
                    write_file(&out.join("eigenpair.csv"), &eigenpair_csv(&best.result.state))?;
                    write_file(&out.join("trace.csv"), &trace_csv(&best.result))?;
                    write_file(&out.join("diagnostics.csv"), &diagnostics_csv(&report))?;
                    println!("lambda_inf={}", sweep_result.lambda_inf);
                    Ok(0)
                }
                Err(_) => {
                    eprintln!("no sweep entry converged");
                    Ok(2)
                }
            }
        }
        Command::Scalar | Command::DemoZeroInfimum => {
            let spec = config.exponents.as_ref().ok_or_else(|| Error::ConfigRange {
                key: "exponents.p".into(),
                message: "scalar runs need at least the minimized exponent".into(),
            })?;
            let field = build_exponent_field(&grid, spec)?;
            let p = scalar_exponent_samples(config, &field);
            let mut scalar_opts = config.scalar.clone();
            scalar_opts.seed = config.solve.seed;
            scalar_opts.eps_regularization = config.solve.eps_regularization;
            let result = minimize_scalar(&grid, &p, &scalar_opts)?;
            for (amp, mu) in &result.per_amplitude {
                println!("amplitude={amp:e} mu={mu}");
            }
            println!("mu={} iterations={}", result.mu, result.iterations);
            write_file(&out.join("eigenpair.csv"), &scalar_csv(&result.u))?;
            write_file(&out.join("scalar.csv"), &amplitudes_csv(&result))?;
            Ok(0)
        }
        Command::Verify => {
            let field = field_for(config, &grid)?;
            let default_path = out.join("eigenpair.csv");
            let path = config.verify_eigenpair.as_deref().unwrap_or(&default_path);
            let state = load_eigenpair(path, &grid)?;
            let r = match config.verify_r {
                Some(r) => r,
                None => coupling_energy(&state, &field),
            };
            if !(r > 0.0) {
                return Err(Error::Input("loaded state has zero coupling energy".into()));
            }
            let energy = dirichlet_energy(&state, &field);
            let shell = SolveResult {
                lambda: energy / r,
                energy,
                constraint_value: coupling_energy(&state, &field),
                lagrange_residual: f64::NAN,
                state,
                iterations: 0,
                converged: true,
                trace: Vec::new(),
                multistart_lambda_range: None,
            };
            let report = full_report(&shell, &field, &diagnostics_options(config, r))?;
            write_file(&out.join("diagnostics.csv"), &diagnostics_csv(&report))?;
            let failed = report.failures().count();
            println!("diagnostics: {} checks, {} failed", report.checks.len(), failed);
            Ok(if failed == 0 { 0 } else { 2 })
        }
    }
}
