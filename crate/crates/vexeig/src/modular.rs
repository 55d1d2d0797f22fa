//! Variable-exponent Lebesgue-space numerics: modulars, Luxemburg norms and
//! the inequality chains connecting them.
//!
//! The discrete modular of a grid function `u` with cell exponents `p` is
//! the midpoint quadrature of `|u|^p`, where the powered node samples of
//! each cell are averaged to its center (the same two-point / four-point
//! node-to-cell rule used by the coupling energy). With constant exponent
//! this reduces exactly to the nodal rectangle rule, which is what makes the
//! tridiagonal eigenvalue oracles for the scalar quotient exact.
//!
//! The Luxemburg norm is the unique `tau > 0` with `rho(u / tau) = 1`; the
//! map `tau -> rho(u/tau)` is continuous and strictly decreasing, and the
//! modular/norm chain brackets the root between `rho^{1/p+}` and
//! `rho^{1/p-}`. Bisection runs on `ln tau` with log-sum-exp evaluation, so
//! the same code serves the iterated-norm ladder where exponents reach the
//! hundreds.

use crate::energy::{self, StatePair};
use crate::grid::{gradient, CellField, Grid, GridFunction, VectorField};
use crate::problem::ExponentField;
use crate::{Error, Result};
use std::sync::Arc;

/// Default relative tolerance on the Luxemburg norm bisection.
pub const DEFAULT_NORM_TOL: f64 = 1e-12;
/// Iteration cap for the norm bisection.
pub const MAX_NORM_ITERS: u32 = 200;

/// Luxemburg norm together with the modular it achieves.
#[derive(Debug, Clone, Copy)]
pub struct LuxemburgNorm {
    /// The norm `tau` with `rho(u / tau) = 1` (0 for the zero function).
    pub value: f64,
    /// `rho(u / value)`; within `tol` of 1 whenever `value > 0`.
    pub achieved_modular: f64,
    pub iterations: u32,
}

/// Quadrature atoms of a modular: weight, log magnitude and exponent.
#[derive(Debug, Clone)]
pub(crate) struct ModularAtoms {
    atoms: Vec<(f64, f64, f64)>, // (weight, ln|value|, exponent)
    s_min: f64,
    s_max: f64,
}

impl ModularAtoms {
    pub(crate) fn from_nodes(u: &GridFunction, p: &[f64]) -> Self {
        let grid = u.grid();
        let vol = grid.cell_volume();
        let w = grid.interp_weight() * vol;
        let mut atoms = Vec::new();
        let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for cell in 0..grid.cell_count() {
            let s = p[cell];
            s_min = s_min.min(s);
            s_max = s_max.max(s);
            let corners = grid.cell_corners(cell);
            for k in 0..corners.count {
                let v = u.corner_value(corners.nodes[k]).abs();
                if v > 0.0 {
                    atoms.push((w, v.ln(), s));
                }
            }
        }
        Self { atoms, s_min, s_max }
    }

    pub(crate) fn from_cells(values: &[f64], grid: &Grid, p: &[f64]) -> Self {
        let vol = grid.cell_volume();
        let mut atoms = Vec::new();
        let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (cell, &v) in values.iter().enumerate() {
            let s = p[cell];
            s_min = s_min.min(s);
            s_max = s_max.max(s);
            let v = v.abs();
            if v > 0.0 {
                atoms.push((vol, v.ln(), s));
            }
        }
        Self { atoms, s_min, s_max }
    }

    pub(crate) fn from_magnitudes(g: &VectorField, p: &[f64]) -> Self {
        let grid = g.grid();
        let mags: Vec<f64> = (0..grid.cell_count()).map(|c| g.magnitude(c)).collect();
        Self::from_cells(&mags, grid, p)
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `ln rho(u / tau)` at `ln tau = lt`, by log-sum-exp.
    pub(crate) fn ln_modular_at(&self, lt: f64) -> f64 {
        if self.atoms.is_empty() {
            return f64::NEG_INFINITY;
        }
        let mut m = f64::NEG_INFINITY;
        for &(w, la, s) in &self.atoms {
            m = m.max(w.ln() + s * (la - lt));
        }
        let sum: f64 = self
            .atoms
            .iter()
            .map(|&(w, la, s)| (w.ln() + s * (la - lt) - m).exp())
            .sum();
        m + sum.ln()
    }

    /// Plain modular value `rho(u)`.
    pub(crate) fn value(&self) -> f64 {
        self.atoms.iter().map(|&(w, la, s)| w * (s * la).exp()).sum()
    }

    /// Luxemburg norm by bisection on `ln tau`.
    pub(crate) fn luxemburg(&self, tol: f64) -> Result<LuxemburgNorm> {
        if tol <= 0.0 {
            return Err(Error::Domain("norm tolerance must be positive".into()));
        }
        if self.is_zero() {
            return Ok(LuxemburgNorm { value: 0.0, achieved_modular: 0.0, iterations: 0 });
        }
        let g0 = self.ln_modular_at(0.0);
        if g0 == 0.0 {
            return Ok(LuxemburgNorm { value: 1.0, achieved_modular: 1.0, iterations: 0 });
        }
        // Modular/norm chain bracket: tau between rho^{1/s+} and rho^{1/s-}.
        let (mut lo, mut hi) = if g0 > 0.0 {
            (g0 / self.s_max, g0 / self.s_min)
        } else {
            (g0 / self.s_min, g0 / self.s_max)
        };
        let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
        // g is decreasing in lt; enforce a sign change before bisecting.
        let mut expand = 0;
        while self.ln_modular_at(lo) < 0.0 && expand < 64 {
            lo -= (hi - lo).max(1e-12);
            expand += 1;
        }
        while self.ln_modular_at(hi) > 0.0 && expand < 128 {
            hi += (hi - lo).max(1e-12);
            expand += 1;
        }
        let mut iterations = 0;
        while iterations < MAX_NORM_ITERS {
            let mid = 0.5 * (lo + hi);
            let g = self.ln_modular_at(mid);
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if hi - lo <= tol {
                let lt = 0.5 * (lo + hi);
                return Ok(LuxemburgNorm {
                    value: lt.exp(),
                    achieved_modular: self.ln_modular_at(lt).exp(),
                    iterations,
                });
            }
        }
        Err(Error::NoConvergence { max_iters: MAX_NORM_ITERS, lo: lo.exp(), hi: hi.exp() })
    }
}

fn check_exponents(grid: &Grid, p: &[f64]) -> Result<()> {
    if p.len() != grid.cell_count() {
        return Err(Error::Domain(format!(
            "expected {} exponent samples, got {}",
            grid.cell_count(),
            p.len()
        )));
    }
    Ok(())
}

/// Modular `rho_p(u)` of a grid function.
pub fn modular(u: &GridFunction, p: &[f64]) -> Result<f64> {
    check_exponents(u.grid(), p)?;
    Ok(ModularAtoms::from_nodes(u, p).value())
}

/// Modular of a cell-sampled scalar field.
pub fn modular_of_cells(f: &CellField, p: &[f64]) -> Result<f64> {
    check_exponents(f.grid(), p)?;
    Ok(ModularAtoms::from_cells(f.values(), f.grid(), p).value())
}

/// Modular of the Euclidean magnitude of a cell vector field.
pub fn modular_of_magnitude(g: &VectorField, p: &[f64]) -> Result<f64> {
    check_exponents(g.grid(), p)?;
    Ok(ModularAtoms::from_magnitudes(g, p).value())
}

/// `ln rho_p(u)`; safe for exponents far beyond floating-point power range.
pub fn ln_modular(u: &GridFunction, p: &[f64]) -> Result<f64> {
    check_exponents(u.grid(), p)?;
    Ok(ModularAtoms::from_nodes(u, p).ln_modular_at(0.0))
}

/// Luxemburg norm of a grid function.
pub fn luxemburg_norm(u: &GridFunction, p: &[f64], tol: f64) -> Result<LuxemburgNorm> {
    check_exponents(u.grid(), p)?;
    ModularAtoms::from_nodes(u, p).luxemburg(tol)
}

/// Luxemburg norm of a cell-sampled scalar field.
pub fn luxemburg_norm_of_cells(f: &CellField, p: &[f64], tol: f64) -> Result<LuxemburgNorm> {
    check_exponents(f.grid(), p)?;
    ModularAtoms::from_cells(f.values(), f.grid(), p).luxemburg(tol)
}

/// Luxemburg norm of the magnitude of a vector field (e.g. `|∇u|`).
pub fn luxemburg_norm_of_magnitude(g: &VectorField, p: &[f64], tol: f64) -> Result<LuxemburgNorm> {
    check_exponents(g.grid(), p)?;
    ModularAtoms::from_magnitudes(g, p).luxemburg(tol)
}

/// Margins of the modular/norm chain for one function.
#[derive(Debug, Clone, Copy)]
pub struct ModularChainReport {
    pub norm: f64,
    pub modular: f64,
    /// Chain bounds on the modular implied by the norm.
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
    /// Smallest slack in the two inequalities (nonnegative when they hold).
    pub margin: f64,
}

/// Verifies `norm^{p-} <= rho <= norm^{p+}` for `norm > 1` and the reversed
/// chain for `norm <= 1`.
pub fn check_modular_norm_relations(u: &GridFunction, p: &[f64]) -> Result<ModularChainReport> {
    check_exponents(u.grid(), p)?;
    let atoms = ModularAtoms::from_nodes(u, p);
    if atoms.is_zero() {
        return Err(Error::Domain("modular/norm chain needs a nonzero function".into()));
    }
    let norm = atoms.luxemburg(DEFAULT_NORM_TOL)?.value;
    let rho = atoms.value();
    let (lower, upper) = if norm > 1.0 {
        (norm.powf(atoms.s_min), norm.powf(atoms.s_max))
    } else {
        (norm.powf(atoms.s_max), norm.powf(atoms.s_min))
    };
    let tol = 1e-10 * (1.0 + rho.abs());
    let margin = (rho - lower).min(upper - rho);
    Ok(ModularChainReport { norm, modular: rho, lower, upper, holds: margin >= -tol, margin })
}

/// Empirical lower bound for the discrete Poincaré constant.
#[derive(Debug, Clone, Copy)]
pub struct PoincareEstimate {
    /// Max over samples of `‖u‖_p / ‖∇u‖_p`.
    pub value: f64,
    /// Samples skipped because their gradient vanished.
    pub skipped: usize,
}

/// Max of `‖u‖_{p(x)} / ‖∇u‖_{p(x)}` over the sample set; a lower bound for
/// the best discrete constant.
pub fn poincare_constant_estimate(samples: &[GridFunction], p: &[f64]) -> Result<PoincareEstimate> {
    if samples.is_empty() {
        return Err(Error::Domain("poincare estimate needs at least one sample".into()));
    }
    let mut best = 0.0f64;
    let mut skipped = 0;
    for u in samples {
        check_exponents(u.grid(), p)?;
        let grad = gradient(u);
        let denom = ModularAtoms::from_magnitudes(&grad, p);
        if denom.is_zero() {
            // Under the Dirichlet condition only the zero function has a
            // vanishing gradient.
            skipped += 1;
            continue;
        }
        let num = luxemburg_norm(u, p, DEFAULT_NORM_TOL)?.value;
        let den = denom.luxemburg(DEFAULT_NORM_TOL)?.value;
        best = best.max(num / den);
    }
    if skipped == samples.len() {
        return Err(Error::Domain("all poincare samples had zero gradient".into()));
    }
    Ok(PoincareEstimate { value: best, skipped })
}

/// Deterministic probe set for [`poincare_constant_estimate`]: low sine
/// modes, seeded smooth combinations, and a finite-difference ascent refine
/// of the best candidate so the estimate sits close to the discrete
/// supremum.
pub fn poincare_probe_functions(
    grid: &Arc<Grid>,
    p: &[f64],
    random_count: usize,
    seed: u64,
    ascent_iters: usize,
) -> Result<Vec<GridFunction>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dimension();
    let mut samples = Vec::new();
    let mode = |k: usize| {
        move |x: &[f64]| -> f64 {
            let mut v = 1.0;
            for (ax, &xi) in x.iter().enumerate() {
                let _ = ax;
                v *= (k as f64 * std::f64::consts::PI * xi).sin();
            }
            v
        }
    };
    for k in 1..=3 {
        // Normalized coordinates per axis so modes fit any box.
        let g = GridFunction::from_fn(grid, |x| {
            let mut t = [0.0; 2];
            for ax in 0..dim {
                let (a, _) = grid.domain().bounds(ax);
                t[ax] = (x[ax] - a) / grid.domain().length(ax);
            }
            mode(k)(&t[..dim])
        })?;
        samples.push(g);
    }
    for _ in 0..random_count {
        let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = GridFunction::from_fn(grid, |x| {
            let mut t = [0.0; 2];
            for ax in 0..dim {
                let (a, _) = grid.domain().bounds(ax);
                t[ax] = (x[ax] - a) / grid.domain().length(ax);
            }
            (1..=3).map(|k| coeffs[k - 1] * mode(k)(&t[..dim])).sum()
        })?;
        samples.push(g);
    }

    if ascent_iters > 0 {
        let ratio = |vals: &[f64]| -> Result<f64> {
            let u = GridFunction::from_values_unchecked(grid, vals.to_vec());
            let grad = gradient(&u);
            let den = ModularAtoms::from_magnitudes(&grad, p);
            if den.is_zero() {
                return Ok(0.0);
            }
            let num = luxemburg_norm(&u, p, DEFAULT_NORM_TOL)?.value;
            Ok(num / den.luxemburg(DEFAULT_NORM_TOL)?.value)
        };
        // Start the ascent from the best probe so far.
        let mut best_vals = samples[0].values().to_vec();
        let mut best = 0.0;
        for s in &samples {
            let r = ratio(s.values())?;
            if r > best {
                best = r;
                best_vals = s.values().to_vec();
            }
        }
        let n = best_vals.len();
        let mut step = 0.1;
        for _ in 0..ascent_iters {
            // Central-difference gradient of the log ratio.
            let scale = best_vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
            let fd = 1e-6 * scale;
            let mut dir = vec![0.0; n];
            for i in 0..n {
                let mut hi = best_vals.clone();
                let mut lo = best_vals.clone();
                hi[i] += fd;
                lo[i] -= fd;
                dir[i] = (ratio(&hi)?.ln() - ratio(&lo)?.ln()) / (2.0 * fd);
            }
            let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            if dn == 0.0 {
                break;
            }
            let mut advanced = false;
            while step > 1e-12 {
                let trial: Vec<f64> = best_vals
                    .iter()
                    .zip(&dir)
                    .map(|(v, d)| v + step * scale * d / dn)
                    .collect();
                let r = ratio(&trial)?;
                if r > best {
                    best = r;
                    best_vals = trial;
                    step *= 1.5;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        samples.push(GridFunction::from_values(grid, best_vals)?);
    }
    Ok(samples)
}

/// Both sides of the weighted Young bound for the coupling term.
#[derive(Debug, Clone, Copy)]
pub struct YoungReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Verifies `∫ c |z|^{alpha+1} |w|^{beta+1} <= ‖c‖_inf (rho_p(z) + rho_q(w))`,
/// the Young/balance bound on the coupling energy.
pub fn check_young_coupling_bound(state: &StatePair, field: &ExponentField) -> Result<YoungReport> {
    let lhs = energy::coupling_energy(state, field);
    let rhs = field.extremes().c_sup
        * (modular(&state.z, field.p())? + modular(&state.w, field.q())?);
    Ok(YoungReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) + f64::MIN_POSITIVE })
}
