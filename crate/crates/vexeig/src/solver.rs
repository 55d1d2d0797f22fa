//! Constrained minimization of the Dirichlet energy on the set where the
//! coupling energy equals `R`, plus the scalar quotient minimizer.
//!
//! One solve runs projected gradient descent with retraction: the Lagrange
//! multiplier is estimated by least-squares projection of the energy
//! gradient onto the constraint gradient, the tangential residual is the
//! search direction, trial steps are pulled back onto the constraint set by
//! scalar rescaling (the coupling energy is strictly increasing along rays,
//! so the retraction factor is unique), and an Armijo backtracking rule
//! accepts steps. After every accepted step the state is replaced by its
//! absolute value, which never increases the energy and leaves the
//! constraint untouched; converged eigenfunctions are therefore nonnegative.
//!
//! The eigenvalue of a converged solve is `lambda = A / R`, and sweeping `R`
//! over a grid estimates the infimum eigenvalue of the family.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    coupling_energy, coupling_gradient, d_gradient_modular, d_modular, dirichlet_energy,
    dirichlet_gradient, EnergyGradient, StatePair,
};
use crate::grid::{gradient, Grid, GridFunction};
use crate::modular;
use crate::problem::ExponentField;
use crate::{Error, Result};

/// How the starting state of a solve is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Uniform positive noise on every node.
    RandomPositive,
    /// Product of first sine modes plus small positive noise.
    SineBump,
    /// Caller-supplied state (`SolveOptions::init_state`).
    User,
}

/// Options of one constrained solve.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative Lagrange-residual threshold for convergence.
    pub grad_tol: f64,
    /// Backtracking factor in (0, 1).
    pub step_shrink: f64,
    /// Armijo sufficient-decrease constant in (0, 1).
    pub armijo_c: f64,
    /// Regularization of the degenerate flux where p(cell) < 2.
    pub eps_regularization: f64,
    pub seed: u64,
    pub init: InitKind,
    /// Starting state for `InitKind::User`.
    pub init_state: Option<StatePair>,
    /// Number of independent starts; the best converged result wins.
    pub multistart: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: 1e-7,
            step_shrink: 0.5,
            armijo_c: 1e-4,
            eps_regularization: 1e-10,
            seed: 0,
            init: InitKind::SineBump,
            init_state: None,
            multistart: 5,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.grad_tol <= 0.0 {
            return Err(Error::Domain("grad_tol must be positive".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::Domain("step_shrink must lie in (0, 1)".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Domain("armijo_c must lie in (0, 1)".into()));
        }
        if self.eps_regularization < 0.0 {
            return Err(Error::Domain("eps_regularization must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
}

/// Outcome of one constrained solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Minimizer candidate; nonnegative after sign normalization.
    pub state: StatePair,
    /// Eigenvalue `energy / R`, exactly as computed.
    pub lambda: f64,
    /// Dirichlet energy at the final state.
    pub energy: f64,
    /// Coupling energy at the final state (should equal `R`).
    pub constraint_value: f64,
    /// Relative Lagrange residual at the final state.
    pub lagrange_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    /// Spread of eigenvalues over converged multistarts `(min, max)`.
    pub multistart_lambda_range: Option<(f64, f64)>,
}

/// One sweep entry: the level `R` and its solve.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub r: f64,
    pub result: SolveResult,
}

/// Eigenvalue family over a set of constraint levels.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Minimum eigenvalue over converged entries.
    pub lambda_inf: f64,
}

/// Log of the retraction factor: the unique `lt` with coupling energy `R`
/// at the scaled state `e^{lt} (z, w)`. Bisection bracket plus a Newton
/// polish; the polished root is accurate in the absolute sense, which keeps
/// energies of scaled states comparable to round-off even when `t` is
/// within one ulp of 1.
pub(crate) fn retraction_log_factor(
    state: &StatePair,
    field: &ExponentField,
    r: f64,
) -> Result<f64> {
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("constraint level R must be positive, got {r}")));
    }
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    // Per-cell coupling terms: B(t s) = sum T_c t^{E_c} with E_c = a+b > 4.
    let mut terms: Vec<(f64, f64)> = Vec::new(); // (ln T_c, E_c)
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        let mut zc = 0.0;
        let mut wc = 0.0;
        for k in 0..corners.count {
            zc += state.z.corner_value(corners.nodes[k]).abs();
            wc += state.w.corner_value(corners.nodes[k]).abs();
        }
        zc *= iw;
        wc *= iw;
        let a = field.alpha()[cell] + 1.0;
        let b = field.beta()[cell] + 1.0;
        let t = vol * field.weight()[cell] * zc.powf(a) * wc.powf(b);
        if t > 0.0 {
            terms.push((t.ln(), a + b));
        }
    }
    if terms.is_empty() {
        return Err(Error::CannotRetract);
    }
    // h(s) = ln B(e^s . state) - ln R, increasing and convex in s, and its
    // derivative (the coupling-weighted mean exponent, between 4 and E_max).
    let h_and_slope = |s: f64| -> (f64, f64) {
        let m = terms.iter().map(|&(lt, e)| lt + s * e).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for &(lt, e) in &terms {
            let w = (lt + s * e - m).exp();
            sum += w;
            weighted += e * w;
        }
        (m + sum.ln() - r.ln(), weighted / sum)
    };
    let f = |s: f64| h_and_slope(s).0;
    let e_mean = terms.iter().map(|&(_, e)| e).sum::<f64>() / terms.len() as f64;
    let mut lo = -f(0.0) / e_mean;
    let mut hi = lo;
    let mut span = 0.5;
    let mut guard = 0;
    while f(lo) > 0.0 {
        lo -= span;
        span *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NoConvergence { max_iters: 200, lo: lo.exp(), hi: hi.exp() });
        }
    }
    span = 0.5;
    while f(hi) < 0.0 {
        hi += span;
        span *= 2.0;
        guard += 1;
        if guard > 400 {
            return Err(Error::NoConvergence { max_iters: 400, lo: lo.exp(), hi: hi.exp() });
        }
    }
    let mut iters = 0u32;
    while hi - lo > 1e-12 && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let mut lt = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (h, slope) = h_and_slope(lt);
        if h == 0.0 {
            break;
        }
        lt -= h / slope;
    }
    if !lt.is_finite() || f(lt).abs() > 1e-10 {
        return Err(Error::NoConvergence { max_iters: iters, lo: lo.exp(), hi: hi.exp() });
    }
    Ok(lt)
}

/// Scales a state onto the constraint set: returns `(t z, t w)` with
/// coupling energy exactly `R`. The map `t -> B(t z, t w)` is continuous,
/// strictly increasing and onto `(0, inf)`, so `t` is unique.
pub fn retract_to_constraint(
    state: &StatePair,
    field: &ExponentField,
    r: f64,
) -> Result<StatePair> {
    let lt = retraction_log_factor(state, field, r)?;
    let grid = state.z.grid();
    let t = lt.exp();
    let scaled = StatePair {
        z: GridFunction::from_values_unchecked(
            grid,
            state.z.values().iter().map(|v| t * v).collect(),
        ),
        w: GridFunction::from_values_unchecked(
            grid,
            state.w.values().iter().map(|v| t * v).collect(),
        ),
    };
    let achieved = coupling_energy(&scaled, field);
    if (achieved - r).abs() > 1e-10 * r {
        return Err(Error::NoConvergence { max_iters: 200, lo: t, hi: t });
    }
    Ok(scaled)
}

/// Dirichlet energy of the scaled state `e^{lt} (z, w)` evaluated from the
/// unscaled state, so line-search comparisons avoid the rounding of a
/// materialized rescaling.
fn dirichlet_energy_at_scale(state: &StatePair, field: &ExponentField, lt: f64) -> f64 {
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let gz = gradient(&state.z);
    let gw = gradient(&state.w);
    let mut total = crate::energy::CompensatedSum::default();
    for cell in 0..grid.cell_count() {
        let p = field.p()[cell];
        let q = field.q()[cell];
        total.add(vol * (gz.magnitude(cell).powf(p) * (p * lt).exp() / p
            + gw.magnitude(cell).powf(q) * (q * lt).exp() / q));
    }
    total.value()
}

fn mix_seed(seed: u64, start: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64).wrapping_mul(start as u64 + 1)
}

fn initial_state(field: &ExponentField, opts: &SolveOptions, seed: u64) -> Result<StatePair> {
    let grid = field.grid();
    match opts.init {
        InitKind::User => opts
            .init_state
            .clone()
            .ok_or_else(|| Error::Solver("init = user but no initial state supplied".into())),
        InitKind::RandomPositive => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..grid.node_count()).map(|_| rng.gen_range(0.1..1.0)).collect()
            };
            let z = draw(&mut rng);
            let w = draw(&mut rng);
            Ok(StatePair {
                z: GridFunction::from_values_unchecked(grid, z),
                w: GridFunction::from_values_unchecked(grid, w),
            })
        }
        InitKind::SineBump => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = grid.dimension();
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..grid.node_count())
                    .map(|i| {
                        let x = grid.node_coord(i);
                        let mut bump = 1.0;
                        for ax in 0..dim {
                            let (a, _) = grid.domain().bounds(ax);
                            let t = (x[ax] - a) / grid.domain().length(ax);
                            bump *= (std::f64::consts::PI * t).sin();
                        }
                        (bump + 0.05 * rng.gen_range(0.0..1.0)).abs()
                    })
                    .collect()
            };
            let z = draw(&mut rng);
            let w = draw(&mut rng);
            Ok(StatePair {
                z: GridFunction::from_values_unchecked(grid, z),
                w: GridFunction::from_values_unchecked(grid, w),
            })
        }
    }
}

fn axpy(base: &[f64], step: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + step * d).collect()
}

fn solve_single(
    field: &ExponentField,
    r: f64,
    opts: &SolveOptions,
    seed: u64,
) -> Result<SolveResult> {
    let grid = field.grid();
    let mut state = retract_to_constraint(&initial_state(field, opts, seed)?.abs(), field, r)?;
    let mut energy = dirichlet_energy(&state, field);
    let mut trace = Vec::new();
    let mut sigma = 1.0f64;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut noise_steps = 0usize;
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None; // (z, w, gz, gw)

    for it in 0..=opts.max_iters {
        iterations = it;
        let ga = dirichlet_gradient(&state, field, opts.eps_regularization);
        let gb = coupling_gradient(&state, field);
        let gb2 = gb.dot(&gb);
        if gb2 == 0.0 {
            return Err(Error::Solver("coupling gradient vanished on the constraint set".into()));
        }
        let lambda_ls = ga.dot(&gb) / gb2;
        let dir = EnergyGradient {
            dz: ga.dz.iter().zip(&gb.dz).map(|(a, b)| -(a - lambda_ls * b)).collect(),
            dw: ga.dw.iter().zip(&gb.dw).map(|(a, b)| -(a - lambda_ls * b)).collect(),
        };
        let d2 = dir.dot(&dir);
        let ga_norm = ga.norm();

        // Spectral (Barzilai-Borwein) trial step from the last move and the
        // change of the projected gradient; Armijo still guards acceptance.
        if let Some((pz, pw, pgz, pgw)) = &prev {
            let mut sy = 0.0;
            let mut yy = 0.0;
            for i in 0..pz.len() {
                let s = state.z.values()[i] - pz[i];
                let y = -dir.dz[i] - pgz[i];
                sy += s * y;
                yy += y * y;
            }
            for i in 0..pw.len() {
                let s = state.w.values()[i] - pw[i];
                let y = -dir.dw[i] - pgw[i];
                sy += s * y;
                yy += y * y;
            }
            if sy > 0.0 && yy > 0.0 {
                sigma = (sy / yy).clamp(1e-15, 1e6);
            }
        }
        prev = Some((
            state.z.values().to_vec(),
            state.w.values().to_vec(),
            dir.dz.iter().map(|v| -v).collect(),
            dir.dw.iter().map(|v| -v).collect(),
        ));
        // Relative Lagrange residual with the least-squares multiplier. The
        // reported eigenvalue A/R coincides with it exactly at constant
        // exponents; for variable exponents the two multiplier estimates
        // differ by an O(h grad p) consistency gap.
        residual = d2.sqrt() / (1.0 + ga_norm);
        trace.push(TraceEntry { iteration: it, energy, residual });
        if residual <= opts.grad_tol {
            converged = true;
            break;
        }
        if it == opts.max_iters {
            break;
        }

        let mut accepted = false;
        let mut noise_step = false;
        while sigma >= 1e-18 {
            let trial = StatePair {
                z: GridFunction::from_values_unchecked(
                    grid,
                    axpy(state.z.values(), sigma, &dir.dz),
                ),
                w: GridFunction::from_values_unchecked(
                    grid,
                    axpy(state.w.values(), sigma, &dir.dw),
                ),
            };
            if let Ok(lt) = retraction_log_factor(&trial, field, r) {
                // Energy of the retracted trial, evaluated at the log scale
                // factor to keep its noise floor at summation level.
                let trial_energy = dirichlet_energy_at_scale(&trial, field, lt);
                let needed = opts.armijo_c * sigma * d2;
                // Once the Armijo decrement falls below the floating-point
                // resolution of the energy, any strict decrease counts.
                let below_fp = needed < 1e-15 * (1.0 + energy.abs());
                if trial_energy.is_finite()
                    && (trial_energy <= energy - needed
                        || (below_fp && trial_energy < energy))
                {
                    noise_step = below_fp;
                    let t = lt.exp();
                    let scale = |v: &[f64]| -> Vec<f64> {
                        v.iter().map(|x| (t * x).abs()).collect()
                    };
                    // Sign normalization: |.| never increases the energy and
                    // keeps the constraint exact. When the trial is already
                    // nonnegative the scale-consistent energy carries over.
                    let flipped = trial.z.values().iter().chain(trial.w.values()).any(|&v| v < 0.0);
                    state = StatePair {
                        z: GridFunction::from_values_unchecked(grid, scale(trial.z.values())),
                        w: GridFunction::from_values_unchecked(grid, scale(trial.w.values())),
                    };
                    energy = if flipped { dirichlet_energy(&state, field) } else { trial_energy };
                    accepted = true;
                    break;
                }
            }
            sigma *= opts.step_shrink;
        }
        if noise_step {
            noise_steps += 1;
        } else {
            noise_steps = 0;
        }
        if !accepted || noise_steps > 200 {
            // Stationary to machine precision; convergence is judged by the
            // residual recorded above.
            break;
        }
    }

    let constraint_value = coupling_energy(&state, field);
    Ok(SolveResult {
        lambda: energy / r,
        energy,
        constraint_value,
        lagrange_residual: residual,
        state,
        iterations,
        converged,
        trace,
        multistart_lambda_range: None,
    })
}

/// Minimizes the Dirichlet energy over the constraint set `{B = R}` with
/// multistart; returns the best converged result (best residual if none
/// converged). Non-convergence is reported in the result, not as an error.
pub fn minimize_constrained(
    field: &ExponentField,
    r: f64,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("constraint level R must be positive, got {r}")));
    }
    let starts = if opts.init == InitKind::User { 1 } else { opts.multistart.max(1) };
    let mut best: Option<SolveResult> = None;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..starts {
        let result = solve_single(field, r, opts, mix_seed(opts.seed, k))?;
        if result.converged {
            lo = lo.min(result.lambda);
            hi = hi.max(result.lambda);
        }
        let better = match &best {
            None => true,
            Some(b) => match (result.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => result.lambda < b.lambda,
                (false, false) => result.lagrange_residual < b.lagrange_residual,
            },
        };
        if better {
            best = Some(result);
        }
    }
    let mut best = best.expect("at least one start");
    if lo.is_finite() {
        best.multistart_lambda_range = Some((lo, hi));
    }
    Ok(best)
}

/// Log-spaced constraint levels, inclusive of both ends.
pub fn log_spaced_levels(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min) || count < 2 {
        return Err(Error::Domain("log spacing needs 0 < min < max and count >= 2".into()));
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Independent solves for every level in `r_values`.
pub fn sweep(field: &ExponentField, r_values: &[f64], opts: &SolveOptions) -> Result<SweepResult> {
    if r_values.is_empty() {
        return Err(Error::Domain("sweep needs at least one constraint level".into()));
    }
    let entries: Vec<SweepEntry> = r_values
        .iter()
        .map(|&r| minimize_constrained(field, r, opts).map(|result| SweepEntry { r, result }))
        .collect::<Result<_>>()?;
    merge_sweep(entries)
}

/// Assembles a sweep from already-computed entries (used by parallel
/// drivers; the minimum is order-independent).
pub fn merge_sweep(entries: Vec<SweepEntry>) -> Result<SweepResult> {
    let lambda_inf = entries
        .iter()
        .filter(|e| e.result.converged)
        .map(|e| e.result.lambda)
        .fold(f64::INFINITY, f64::min);
    if !lambda_inf.is_finite() {
        return Err(Error::Solver("no sweep entry converged".into()));
    }
    Ok(SweepResult { entries, lambda_inf })
}

/// Options of the scalar quotient minimization.
#[derive(Debug, Clone)]
pub struct ScalarOptions {
    /// Amplitude caps for the multistart; one descent per cap, constrained
    /// to `max |u| <= cap`.
    pub amplitudes: Vec<f64>,
    /// Iteration budget per amplitude.
    pub max_iters: usize,
    pub seed: u64,
    pub eps_regularization: f64,
    pub step_shrink: f64,
    pub armijo_c: f64,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        Self {
            amplitudes: vec![1.0],
            max_iters: 20_000,
            seed: 0,
            eps_regularization: 1e-10,
            step_shrink: 0.5,
            armijo_c: 1e-4,
        }
    }
}

/// Best state and quotient of a scalar minimization.
#[derive(Debug, Clone)]
pub struct ScalarMinimizeResult {
    pub u: GridFunction,
    /// Best quotient found.
    pub mu: f64,
    /// Best quotient per amplitude cap, in input order.
    pub per_amplitude: Vec<(f64, f64)>,
    pub iterations: usize,
}

/// Minimizes the scalar modular quotient `rho_p(∇u) / rho_p(u)` over
/// nonzero `u` by gradient descent on the log quotient, with one start per
/// amplitude cap. The quotient is scale-dependent for variable `p`, so the
/// amplitude multistart is part of the search space.
pub fn minimize_scalar(
    grid: &Arc<Grid>,
    p: &[f64],
    opts: &ScalarOptions,
) -> Result<ScalarMinimizeResult> {
    if p.len() != grid.cell_count() {
        return Err(Error::Domain("exponent samples must match the grid's cells".into()));
    }
    if opts.amplitudes.is_empty() || opts.amplitudes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("amplitude caps must be positive".into()));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut per_amplitude = Vec::new();
    let mut iterations = 0;
    for (k, &amp) in opts.amplitudes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, k));
        let dim = grid.dimension();
        let u0: Vec<f64> = (0..grid.node_count())
            .map(|i| {
                let x = grid.node_coord(i);
                let mut bump = 1.0;
                for ax in 0..dim {
                    let (a, _) = grid.domain().bounds(ax);
                    let t = (x[ax] - a) / grid.domain().length(ax);
                    bump *= (std::f64::consts::PI * t).sin();
                }
                0.75 * amp * (bump.abs() + 0.05 * rng.gen_range(0.0..1.0))
            })
            .collect();
        let (u, mu, iters) = scalar_descent(grid, p, u0, amp, opts)?;
        per_amplitude.push((amp, mu));
        iterations += iters;
        if best.as_ref().map_or(true, |(_, b)| mu < *b) {
            best = Some((u, mu));
        }
    }
    let (u, mu) = best.expect("at least one amplitude");
    Ok(ScalarMinimizeResult { u: GridFunction::from_values(grid, u)?, mu, per_amplitude, iterations })
}

fn scalar_descent(
    grid: &Arc<Grid>,
    p: &[f64],
    u0: Vec<f64>,
    cap: f64,
    opts: &ScalarOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let quotient = |vals: &[f64]| -> Option<(f64, f64, f64)> {
        let u = GridFunction::from_values_unchecked(grid, vals.to_vec());
        let den = modular::modular(&u, p).ok()?;
        if !(den > 0.0) || !den.is_finite() {
            return None;
        }
        let num = modular::modular_of_magnitude(&gradient(&u), p).ok()?;
        if !num.is_finite() {
            return None;
        }
        Some((num, den, num / den))
    };
    let mut u = u0;
    let (mut num, mut den, mut mu) = quotient(&u).ok_or(Error::QuotientUndefined)?;
    let mut log_q = mu.ln();
    let mut sigma = 1.0f64;
    let mut stall = 0usize;
    let mut iters = 0usize;
    for _ in 0..opts.max_iters {
        iters += 1;
        let uf = GridFunction::from_values_unchecked(grid, u.clone());
        let dnum = d_gradient_modular(&uf, p, opts.eps_regularization);
        let dden = d_modular(&uf, p);
        let grad: Vec<f64> =
            dnum.iter().zip(&dden).map(|(n, d)| n / num - d / den).collect();
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            break;
        }
        sigma = (sigma * 2.0).min(1e8);
        let mut accepted = false;
        while sigma >= 1e-18 {
            let trial: Vec<f64> = u.iter().zip(&grad).map(|(v, g)| v - sigma * g).collect();
            if trial.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= cap {
                if let Some((n, d, q)) = quotient(&trial) {
                    if q.ln() <= log_q - opts.armijo_c * sigma * g2 {
                        u = trial;
                        num = n;
                        den = d;
                        mu = q;
                        let new_log = q.ln();
                        if log_q - new_log < 1e-15 * (1.0 + log_q.abs()) {
                            stall += 1;
                        } else {
                            stall = 0;
                        }
                        log_q = new_log;
                        accepted = true;
                        break;
                    }
                }
            }
            sigma *= opts.step_shrink;
        }
        if !accepted || stall > 25 {
            break;
        }
    }
    Ok((u, mu, iters))
}

/// Both sides of the scalar lower-bound chain for the infimum eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundChain {
    /// `min(lambda_p / (p+ ||c||), lambda_q / (q+ ||c||))`.
    pub lhs: f64,
    /// The sweep's infimum eigenvalue.
    pub lambda_inf: f64,
    pub holds: bool,
    pub margin: f64,
}

/// Checks the chain `min{lambda_p/(p+ ||c||), lambda_q/(q+ ||c||)} <=
/// lambda_inf` with the scalar eigenvalues computed on the same grid, where
/// both sides are infima over the identical discrete function set.
pub fn scalar_lower_bound_chain(
    field: &ExponentField,
    sweep: &SweepResult,
    lambda_p: f64,
    lambda_q: f64,
) -> LowerBoundChain {
    let ex = field.extremes();
    let lhs = (lambda_p / (ex.p_max * ex.c_sup)).min(lambda_q / (ex.q_max * ex.c_sup));
    let margin = sweep.lambda_inf - lhs;
    LowerBoundChain {
        lhs,
        lambda_inf: sweep.lambda_inf,
        holds: margin >= -1e-12 * (1.0 + sweep.lambda_inf.abs()),
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use crate::problem::{build_exponent_field, ExponentSpec, FieldSpec};

    fn grid_1d(n: usize, a: f64, b: f64) -> Arc<Grid> {
        Grid::new(Domain::interval(a, b).unwrap(), &[n]).unwrap()
    }

    fn constant_field(n: usize) -> ExponentField {
        let g = grid_1d(n, 0.0, 1.0);
        build_exponent_field(&g, &FieldSpec::constant_balanced()).unwrap()
    }

    #[test]
    fn retraction_closed_form_constant_exponents() {
        // alpha = beta = 2: B(t s) = t^6 B(s), so t = (R / b0)^{1/6}.
        let field = constant_field(9);
        let g = field.grid().clone();
        let z = GridFunction::from_fn(&g, |x| 0.5 + x[0]).unwrap();
        let w = GridFunction::from_fn(&g, |x| 1.0 - 0.3 * x[0]).unwrap();
        let s = StatePair::new(z, w).unwrap();
        let b0 = coupling_energy(&s, &field);
        let r = 3.7;
        let t_expected = (r / b0).powf(1.0 / 6.0);
        let retracted = retract_to_constraint(&s, &field, r).unwrap();
        let t_actual = retracted.z.values()[0] / s.z.values()[0];
        assert!((t_actual - t_expected).abs() < 1e-12 * t_expected);
        assert!((coupling_energy(&retracted, &field) - r).abs() <= 1e-10 * r);
    }

    #[test]
    fn retraction_fixed_point_and_zero_state() {
        let field = constant_field(7);
        let g = field.grid().clone();
        let z = GridFunction::from_fn(&g, |x| (std::f64::consts::PI * x[0]).sin()).unwrap();
        let s = StatePair::new(z.clone(), z).unwrap();
        let r = coupling_energy(&s, &field);
        let retracted = retract_to_constraint(&s, &field, r).unwrap();
        let t = retracted.z.values()[3] / s.z.values()[3];
        assert!((t - 1.0).abs() < 1e-12);

        let zero = StatePair::new(GridFunction::zeros(&g), GridFunction::zeros(&g)).unwrap();
        assert!(matches!(retract_to_constraint(&zero, &field, 1.0), Err(Error::CannotRetract)));
    }

    #[test]
    fn retraction_variable_exponents_residual() {
        let g = grid_1d(15, 0.0, 1.0);
        let spec = FieldSpec {
            p: ExponentSpec::Affine { intercept: 5.0, slope: vec![1.0] },
            q: ExponentSpec::Affine { intercept: 5.0, slope: vec![1.0] },
            alpha: ExponentSpec::Affine { intercept: 1.5, slope: vec![0.5] },
            beta: ExponentSpec::Affine { intercept: 1.5, slope: vec![0.5] },
            c: ExponentSpec::constant(1.0),
        };
        let field = build_exponent_field(&g, &spec).unwrap();
        let z = GridFunction::from_fn(&g, |x| 0.2 + x[0] * (1.0 - x[0])).unwrap();
        let s = StatePair::new(z.clone(), z).unwrap();
        for r in [1e-3, 1.0, 50.0] {
            let retracted = retract_to_constraint(&s, &field, r).unwrap();
            let b = coupling_energy(&retracted, &field);
            assert!((b - r).abs() <= 1e-10 * r, "R = {r}: B = {b}");
        }
    }

    #[test]
    fn solve_constant_field_identities() {
        let field = constant_field(7);
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let r = 1.0;
        let result = minimize_constrained(&field, r, &opts).unwrap();
        assert!(result.converged, "residual {}", result.lagrange_residual);
        // Energy identity R lambda = A holds by construction of lambda.
        assert!((r * result.lambda - result.energy).abs() <= 1e-10 * (1.0 + result.energy));
        assert!(result.lagrange_residual <= opts.grad_tol);
        assert!((result.constraint_value - r).abs() <= 1e-8 * r);
        // Sign normalization leaves a nonnegative eigenfunction.
        assert!(result.state.z.values().iter().all(|&v| v >= 0.0));
        assert!(result.state.w.values().iter().all(|&v| v >= 0.0));
        // Monotone descent across accepted steps.
        for w in result.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-14 * (1.0 + w[0].energy.abs()));
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let field = constant_field(5);
        let opts = SolveOptions { multistart: 2, max_iters: 500, ..Default::default() };
        let a = minimize_constrained(&field, 1.0, &opts).unwrap();
        let b = minimize_constrained(&field, 1.0, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.state.z.values(), b.state.z.values());
        assert_eq!(a.state.w.values(), b.state.w.values());
    }

    #[test]
    fn weak_form_residual_in_random_directions() {
        use rand::{Rng, SeedableRng};
        let field = constant_field(7);
        let opts = SolveOptions::default();
        let result = minimize_constrained(&field, 1.0, &opts).unwrap();
        assert!(result.converged);
        let ga = dirichlet_gradient(&result.state, &field, opts.eps_regularization);
        let gb = coupling_gradient(&result.state, &field);
        let ga_norm = ga.norm();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = field.grid().node_count();
            let dz: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut pair = 0.0;
            let mut d2 = 0.0;
            for i in 0..n {
                let rz = ga.dz[i] - result.lambda * gb.dz[i];
                let rw = ga.dw[i] - result.lambda * gb.dw[i];
                pair += rz * dz[i] + rw * dw[i];
                d2 += dz[i] * dz[i] + dw[i] * dw[i];
            }
            assert!(pair.abs() <= opts.grad_tol * (1.0 + ga_norm) * d2.sqrt());
        }
    }

    #[test]
    fn sweep_is_flat_at_constant_exponents() {
        // Balance makes the quotient scale-invariant, so lambda_R is
        // independent of R.
        let field = constant_field(7);
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let sw = sweep(&field, &[0.1, 1.0, 10.0], &opts).unwrap();
        let lambdas: Vec<f64> = sw.entries.iter().map(|e| e.result.lambda).collect();
        for &l in &lambdas {
            assert!((l - lambdas[0]).abs() <= 1e-6 * lambdas[0], "{lambdas:?}");
        }
        assert!(sw.entries.iter().all(|e| sw.lambda_inf <= e.result.lambda + 1e-15));
    }

    #[test]
    fn log_spacing_covers_range() {
        let levels = log_spaced_levels(1e-2, 1e2, 9).unwrap();
        assert_eq!(levels.len(), 9);
        assert!((levels[0] - 1e-2).abs() < 1e-14);
        assert!((levels[8] - 1e2).abs() < 1e-12);
        assert!(log_spaced_levels(0.0, 1.0, 5).is_err());
    }

    #[test]
    fn scalar_minimizer_hits_tridiagonal_eigenvalue() {
        // p = 2 on (0,1), n = 31: the discrete minimum is the smallest
        // eigenvalue of the three-point Laplacian.
        let g = grid_1d(31, 0.0, 1.0);
        let p = vec![2.0; g.cell_count()];
        let opts = ScalarOptions { max_iters: 60_000, ..Default::default() };
        let res = minimize_scalar(&g, &p, &opts).unwrap();
        let h = g.spacing(0);
        let oracle = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
        assert!(
            (res.mu - oracle).abs() <= 1e-8 * oracle,
            "mu {} oracle {} rel {}",
            res.mu,
            oracle,
            (res.mu - oracle).abs() / oracle
        );
    }

    #[test]
    fn scalar_minimizer_p3_against_brute_force() {
        // n = 3 with p = 3: brute-force search over directions of the
        // 3-dimensional node space (the quotient is 0-homogeneous at
        // constant exponent), refined by coordinate descent.
        let g = grid_1d(3, 0.0, 1.0);
        let p = vec![3.0; g.cell_count()];
        let quotient = |v: &[f64; 3]| -> f64 {
            let u = GridFunction::from_values(&g, v.to_vec()).unwrap();
            crate::energy::scalar_rayleigh_quotient(&u, &p).unwrap_or(f64::INFINITY)
        };
        let mut best = f64::INFINITY;
        let mut best_v = [0.0; 3];
        let m = 60;
        for i in 0..m {
            for j in 0..m {
                let theta = std::f64::consts::PI * i as f64 / m as f64;
                let phi = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                let v = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                let q = quotient(&v);
                if q < best {
                    best = q;
                    best_v = v;
                }
            }
        }
        // Local polish.
        let mut step = 0.1;
        while step > 1e-9 {
            let mut improved = false;
            for k in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut v = best_v;
                    v[k] += sgn * step;
                    let q = quotient(&v);
                    if q < best {
                        best = q;
                        best_v = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let res = minimize_scalar(&g, &p, &ScalarOptions::default()).unwrap();
        assert!((res.mu - best).abs() <= 1e-3 * best, "solver {} brute force {}", res.mu, best);
    }

    #[test]
    fn scalar_minimizer_zero_infimum_witness() {
        // Reduced-size version of the zero-infimum demonstration.
        let g = grid_1d(127, -2.0, 2.0);
        let p: Vec<f64> = (0..g.cell_count())
            .map(|c| {
                let x: f64 = g.cell_center(c)[0];
                if x.abs() <= 1.0 { 3.0 } else { 4.0 - x.abs() }
            })
            .collect();
        let opts = ScalarOptions {
            amplitudes: vec![1.0, 10.0, 100.0, 1e3, 1e4],
            max_iters: 4000,
            ..Default::default()
        };
        let res = minimize_scalar(&g, &p, &opts).unwrap();
        for w in res.per_amplitude.windows(2) {
            assert!(
                w[1].1 < w[0].1,
                "quotient did not decrease with the cap: {:?}",
                res.per_amplitude
            );
        }
        assert!(res.mu < 0.05, "mu = {}", res.mu);
    }

    #[test]
    fn solve_on_2d_grid() {
        let g = Grid::new(
            crate::grid::Domain::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap(),
            &[5, 5],
        )
        .unwrap();
        let field = build_exponent_field(&g, &FieldSpec::constant_balanced()).unwrap();
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let result = minimize_constrained(&field, 1.0, &opts).unwrap();
        assert!(result.converged, "residual {}", result.lagrange_residual);
        assert!((result.constraint_value - 1.0).abs() <= 1e-8);
        assert!(result.state.z.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn user_init_warm_start() {
        let field = constant_field(9);
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let cold = minimize_constrained(&field, 1.0, &opts).unwrap();
        assert!(cold.converged);
        let warm_opts = SolveOptions {
            init: InitKind::User,
            init_state: Some(cold.state.clone()),
            ..Default::default()
        };
        let warm = minimize_constrained(&field, 1.0, &warm_opts).unwrap();
        assert!(warm.converged);
        assert!(warm.iterations <= 2, "warm start should converge immediately");
        assert!((warm.lambda - cold.lambda).abs() <= 1e-9 * cold.lambda);

        let missing = SolveOptions { init: InitKind::User, ..Default::default() };
        assert!(minimize_constrained(&field, 1.0, &missing).is_err());
    }

    #[test]
    fn lower_bound_chain_scaling_in_weight() {
        // Scaling c by 10 scales both sides of the chain by 1/10.
        let g = grid_1d(7, 0.0, 1.0);
        let mk = |cval: f64| {
            build_exponent_field(
                &g,
                &FieldSpec { c: ExponentSpec::constant(cval), ..FieldSpec::constant_balanced() },
            )
            .unwrap()
        };
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let f1 = mk(1.0);
        let f10 = mk(10.0);
        let s1 = sweep(&f1, &[1.0], &opts).unwrap();
        let s10 = sweep(&f10, &[1.0], &opts).unwrap();
        let p = f1.p().to_vec();
        let scalar = minimize_scalar(&g, &p, &ScalarOptions::default()).unwrap();
        let c1 = scalar_lower_bound_chain(&f1, &s1, scalar.mu, scalar.mu);
        let c10 = scalar_lower_bound_chain(&f10, &s10, scalar.mu, scalar.mu);
        assert!(c1.holds && c10.holds);
        assert!((c10.lhs - c1.lhs / 10.0).abs() < 1e-9 * c1.lhs);
        assert!((c10.lambda_inf - c1.lambda_inf / 10.0).abs() < 1e-4 * c1.lambda_inf);
    }
}
