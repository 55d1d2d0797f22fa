//! Post-hoc verification of computed eigenpairs: variational identities,
//! inequality chains, positivity and the iterated-norm boundedness ladder.
//!
//! The ladder computes Luxemburg norms at the exponents `p(x) d^k` for
//! `k = 0..k_max` and summarizes them by `E_k = max(d^k ln ‖u‖_k,
//! d^k ln ‖v‖_k)`. The growth factor `d = d_hat / max(p+, q+)` comes from
//! the admissible interval for `d_hat`; the recursion `E_{k+1} <= a k + b +
//! d_hat E_k` is checked with `a = d_hat ln d` and the smallest
//! k-independent `b` that fits, and the closed form `E_{k+1} <= E d_hat^k`
//! with `E = E_1 + b/(d_hat - 1) + a d_hat/(d_hat - 1)^2` is then verified
//! against the computed sequence. Ladder norms of a discrete function
//! approach its max norm as the exponent grows, which is the testable
//! witness of boundedness.
//!
//! Large ladder exponents are handled in log space; the ladder truncates
//! with a warning flag once `max(p+, q+) d^k` exceeds a safe cap.

use crate::energy::{
    coupling_energy, coupling_gradient, dirichlet_energy, dirichlet_gradient,
    weighted_coupling_energy, StatePair,
};
use crate::grid::{gradient, lebesgue_measure};
use crate::modular::{
    self, check_young_coupling_bound, luxemburg_norm_of_magnitude, poincare_constant_estimate,
    poincare_probe_functions, DEFAULT_NORM_TOL,
};
use crate::problem::ExponentField;
use crate::solver::SolveResult;
use crate::{Error, Result};

/// Largest ladder exponent evaluated before truncation.
pub const LADDER_EXPONENT_CAP: f64 = 256.0;

/// One named inequality check: passes iff `lhs <= rhs` within tolerance
/// (`margin = rhs - lhs`). Informational rows set `passed = true`.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl CheckRow {
    fn bound(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let tol = 1e-9 * (1.0 + rhs.abs());
        Self { name: name.into(), passed: lhs <= rhs + tol, lhs, rhs, margin: rhs - lhs }
    }

    fn info(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), passed: true, lhs, rhs, margin: rhs - lhs }
    }
}

/// Collection of check rows; `passed` iff every row passed.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckRow>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Iterated-norm ladder of one state pair.
#[derive(Debug, Clone)]
pub struct MoserLadder {
    /// Per-level exponent growth factor, `d_hat / max(p+, q+)`; above 1.
    pub d: f64,
    pub d_hat: f64,
    /// Effective number of levels actually computed (norms run 0..=k_max).
    pub k_max: usize,
    pub norms_u: Vec<f64>,
    pub norms_v: Vec<f64>,
    /// `E_k = max(d^k ln ‖u‖_k, d^k ln ‖v‖_k)`.
    pub e: Vec<f64>,
    /// True when the requested depth hit the exponent cap.
    pub truncated: bool,
}

/// Multiplicative width of the admissible interval for `d_hat`, derived
/// from the Sobolev conjugates of the sampled exponents. Exponents at or
/// above the dimension embed into every Lebesgue space, so their conjugate
/// ratio is unbounded; the returned ratio is capped at 3.
pub fn admissible_ratio(field: &ExponentField) -> f64 {
    let n = field.grid().dimension() as f64;
    let ratio_for = |samples: &[f64]| -> (f64, f64) {
        // (pi_min, pi_max) over the samples, infinite where e >= N.
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut any_infinite = false;
        for &e in samples {
            if e < n {
                let pi = n * e / (n - e);
                lo = lo.min(pi);
                hi = hi.max(pi);
            } else {
                any_infinite = true;
            }
        }
        if any_infinite {
            hi = f64::INFINITY;
        }
        (lo, hi)
    };
    let ex = field.extremes();
    let (pi_p_lo, pi_p_hi) = ratio_for(field.p());
    let (pi_q_lo, pi_q_hi) = ratio_for(field.q());
    let ratio = (pi_p_lo / ex.p_min)
        .min(pi_p_hi / ex.p_max)
        .min(pi_q_lo / ex.q_min)
        .min(pi_q_hi / ex.q_max);
    ratio.min(3.0)
}

/// Midpoint of the admissible interval for `d_hat`.
pub fn default_d_hat(field: &ExponentField) -> f64 {
    let ex = field.extremes();
    let mx = ex.p_max.max(ex.q_max);
    mx * 0.5 * (1.0 + admissible_ratio(field))
}

/// Ladder with the default `d_hat`.
pub fn moser_ladder(state: &StatePair, field: &ExponentField, k_max: usize) -> Result<MoserLadder> {
    moser_ladder_with(state, field, k_max, default_d_hat(field))
}

/// Ladder with an explicit `d_hat > max(p+, q+)`.
pub fn moser_ladder_with(
    state: &StatePair,
    field: &ExponentField,
    k_max: usize,
    d_hat: f64,
) -> Result<MoserLadder> {
    let ex = field.extremes();
    let mx = ex.p_max.max(ex.q_max);
    if !(d_hat > mx) {
        return Err(Error::Domain(format!(
            "d_hat must exceed max(p+, q+) = {mx}, got {d_hat}"
        )));
    }
    let d = d_hat / mx;
    let mut k_eff = k_max;
    let mut truncated = false;
    while k_eff > 0 && mx * d.powi(k_eff as i32) > LADDER_EXPONENT_CAP {
        k_eff -= 1;
        truncated = true;
    }
    let cells = field.grid().cell_count();
    let mut norms_u = Vec::with_capacity(k_eff + 1);
    let mut norms_v = Vec::with_capacity(k_eff + 1);
    let mut e = Vec::with_capacity(k_eff + 1);
    for k in 0..=k_eff {
        let dk = d.powi(k as i32);
        let su: Vec<f64> = (0..cells).map(|c| field.p()[c] * dk).collect();
        let sv: Vec<f64> = (0..cells).map(|c| field.q()[c] * dk).collect();
        let nu = modular::luxemburg_norm(&state.z, &su, DEFAULT_NORM_TOL)?.value;
        let nv = modular::luxemburg_norm(&state.w, &sv, DEFAULT_NORM_TOL)?.value;
        if nu == 0.0 || nv == 0.0 {
            return Err(Error::Domain("ladder needs nonzero state components".into()));
        }
        norms_u.push(nu);
        norms_v.push(nv);
        e.push((dk * nu.ln()).max(dk * nv.ln()));
    }
    Ok(MoserLadder { d, d_hat, k_max: k_eff, norms_u, norms_v, e, truncated })
}

/// Recursion and closed-form rows for a computed ladder: fits the smallest
/// k-independent `b`, then verifies the geometric bound it implies.
pub fn check_ladder_bounds(ladder: &MoserLadder) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let e = &ladder.e;
    if e.len() < 3 {
        rows.push(CheckRow::info("moser_ladder_too_short", e.len() as f64, 3.0));
        return rows;
    }
    let a = ladder.d_hat * ladder.d.ln();
    let b_fit = (0..e.len() - 1)
        .map(|k| e[k + 1] - ladder.d_hat * e[k] - a * k as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let b = b_fit.max(0.0);
    rows.push(CheckRow::info("moser_fitted_b", b_fit, b));
    // E_{k+1} <= a k + b + d_hat E_k for every computed k.
    let worst_defect = (0..e.len() - 1)
        .map(|k| e[k + 1] - (a * k as f64 + b + ladder.d_hat * e[k]))
        .fold(f64::NEG_INFINITY, f64::max);
    rows.push(CheckRow::bound("moser_recursion", worst_defect, 0.0));
    // Closed form E_{k+1} <= E d_hat^k from the fitted constants.
    let dm1 = ladder.d_hat - 1.0;
    let e_const = e[1] + b / dm1 + a * ladder.d_hat / (dm1 * dm1);
    for k in 1..e.len() - 1 {
        rows.push(CheckRow::bound(
            format!("moser_closed_form_k{k}"),
            e[k + 1],
            e_const * ladder.d_hat.powi(k as i32),
        ));
    }
    rows
}

/// Positivity of the interior values of both components.
pub fn check_positivity(state: &StatePair, interior_floor: f64) -> Vec<CheckRow> {
    let min_of = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    vec![
        CheckRow::bound("positivity_u", interior_floor, min_of(state.z.values())),
        CheckRow::bound("positivity_v", interior_floor, min_of(state.w.values())),
    ]
}

/// Iterated-norm estimates at level `k`, in log scale: the integral of
/// `u^{1 + p(d^k - 1)}` against the worst norm power over the domain, and
/// the coupling-weighted variant with constant 2. The mean-value points of
/// the continuous argument are replaced by the dominating sup over the
/// sampled exponent range.
pub fn check_estimk(
    state: &StatePair,
    field: &ExponentField,
    ladder: &MoserLadder,
    k: usize,
) -> Result<Vec<CheckRow>> {
    if k > ladder.k_max {
        return Err(Error::Domain(format!(
            "level {k} exceeds the ladder depth {}",
            ladder.k_max
        )));
    }
    let grid = field.grid();
    let dk = ladder.d.powi(k as i32);
    let measure = lebesgue_measure(grid);
    let ex = field.extremes();
    let a_u = ladder.norms_u[k];
    let a_v = ladder.norms_v[k];
    let la_u = a_u.ln();
    let la_v = a_v.ln();

    // max over the sampled exponent range of ln(norm^exponent)
    let su_lo = ex.p_min * dk;
    let su_hi = ex.p_max * dk;
    let sv_lo = ex.q_min * dk;
    let sv_hi = ex.q_max * dk;
    let e_lo = 1.0 + ex.p_min * (dk - 1.0);
    let e_hi = 1.0 + ex.p_max * (dk - 1.0);
    let term_u_full = [e_lo, e_hi, su_lo, su_hi]
        .iter()
        .map(|&s| s * la_u)
        .fold(f64::NEG_INFINITY, f64::max);
    let term_u_s = (su_lo * la_u).max(su_hi * la_u);
    let term_v_s = (sv_lo * la_v).max(sv_hi * la_v);

    // (36): ln of the modular of u at exponents 1 + p(d^k - 1).
    let e_exp: Vec<f64> = (0..grid.cell_count())
        .map(|c| 1.0 + field.p()[c] * (dk - 1.0))
        .collect();
    let lhs36 = modular::ln_modular(&state.z, &e_exp)?;
    let rhs36 = measure.max(1.0).ln() + term_u_full.max(term_v_s);

    // (37): ln of the coupling-type integral with the raised u power,
    // log-sum-exp over cells with the shared node-to-cell interpolation.
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    let mut terms: Vec<f64> = Vec::new();
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        let mut zc = 0.0;
        let mut wc = 0.0;
        for kk in 0..corners.count {
            zc += state.z.corner_value(corners.nodes[kk]).abs();
            wc += state.w.corner_value(corners.nodes[kk]).abs();
        }
        zc *= iw;
        wc *= iw;
        if zc > 0.0 && wc > 0.0 {
            let a_pow = field.alpha()[cell] + 1.0 + field.p()[cell] * (dk - 1.0);
            let b_pow = field.beta()[cell] + 1.0;
            terms.push(vol.ln() + a_pow * zc.ln() + b_pow * wc.ln());
        }
    }
    let lhs37 = if terms.is_empty() {
        f64::NEG_INFINITY
    } else {
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    };
    let rhs37 = 2f64.ln() + term_u_s.max(term_v_s);

    Ok(vec![
        CheckRow::bound(format!("estimate36_log_k{k}"), lhs36, rhs36),
        CheckRow::bound(format!("estimate37_log_k{k}"), lhs37, rhs37),
    ])
}

/// Partial-sum bound `sum_{n=1}^{r} (n-1) s^{n-1} <= s / (s-1)^2`.
pub fn check_geometric_tail_bound(s_value: f64, r: usize) -> Result<CheckRow> {
    if !(s_value > 0.0 && s_value < 1.0) {
        return Err(Error::Domain(format!("bound needs s in (0,1), got {s_value}")));
    }
    if r < 1 {
        return Err(Error::Domain("bound needs r >= 1".into()));
    }
    let mut partial = 0.0;
    let mut power = 1.0; // s^{n-1}
    for n in 1..=r {
        partial += (n - 1) as f64 * power;
        power *= s_value;
    }
    let bound = s_value / ((s_value - 1.0) * (s_value - 1.0));
    Ok(CheckRow::bound(format!("geometric_tail_r{r}"), partial, bound))
}

/// Discrete witness of boundedness: every ladder norm stays below
/// `max(1, |Omega|)` times the discrete max norm, and the last ladder level
/// sits within 5% of the max norm.
pub fn check_boundedness(state: &StatePair, field: &ExponentField, ladder: &MoserLadder) -> Vec<CheckRow> {
    let measure_factor = lebesgue_measure(field.grid()).max(1.0);
    let mut rows = Vec::new();
    for (name, norms, func) in [
        ("u", &ladder.norms_u, &state.z),
        ("v", &ladder.norms_v, &state.w),
    ] {
        let sup_norm = func.max_abs();
        let worst = norms.iter().cloned().fold(0.0f64, f64::max);
        rows.push(CheckRow::bound(
            format!("boundedness_{name}"),
            worst,
            (1.0 + 1e-9) * measure_factor * sup_norm,
        ));
        let final_ratio = norms.last().unwrap() / sup_norm;
        rows.push(CheckRow::bound(
            format!("ladder_final_ratio_{name}"),
            (1.0 - final_ratio).abs(),
            0.05,
        ));
    }
    rows
}

/// Constants of the a-priori energy floor, built from empirical discrete
/// Poincaré estimates for `p` and `q`.
#[derive(Debug, Clone, Copy)]
pub struct FloorConstants {
    pub c_p: f64,
    pub c_q: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Builds the floor constants from Poincaré estimates `c_p`, `c_q`.
pub fn floor_constants(field: &ExponentField, c_p: f64, c_q: f64) -> FloorConstants {
    let ex = field.extremes();
    let k_np = if c_p > 1.0 { c_p.powf(ex.p_max) } else { c_p.powf(ex.p_min) };
    let k_nq = if c_q > 1.0 { c_q.powf(ex.q_max) } else { c_q.powf(ex.q_min) };
    let k1 = ex.c_sup * k_np * ex.p_max.powf(ex.p_min / ex.p_max);
    let k2 = ex.c_sup * k_nq * ex.q_max.powf(ex.q_min / ex.q_max);
    FloorConstants { c_p, c_q, k1, k2, k3: k1 + k2 }
}

/// Poincaré estimates for both exponents from deterministic probe sets.
pub fn estimate_floor_constants(field: &ExponentField, seed: u64) -> Result<FloorConstants> {
    let grid = field.grid();
    let probes_p = poincare_probe_functions(grid, field.p(), 8, seed, 40)?;
    let probes_q = poincare_probe_functions(grid, field.q(), 8, seed ^ 0xABCD, 40)?;
    let c_p = poincare_constant_estimate(&probes_p, field.p())?.value;
    let c_q = poincare_constant_estimate(&probes_q, field.q())?.value;
    Ok(floor_constants(field, c_p, c_q))
}

/// A-priori lower bound on the energy of a feasible state: when both
/// gradient norms are below 1 the floor is `(R / 2 K3)^{p+q+/(p-q-)}`,
/// otherwise `max(1/p+, 1/q+)`.
pub fn check_energy_floor(
    state: &StatePair,
    field: &ExponentField,
    r: f64,
    consts: &FloorConstants,
) -> Result<CheckRow> {
    let ex = field.extremes();
    let gz = luxemburg_norm_of_magnitude(&gradient(&state.z), field.p(), DEFAULT_NORM_TOL)?.value;
    let gw = luxemburg_norm_of_magnitude(&gradient(&state.w), field.q(), DEFAULT_NORM_TOL)?.value;
    let energy = dirichlet_energy(state, field);
    let (name, floor) = if gz.max(gw) < 1.0 {
        let pow = (ex.p_max * ex.q_max) / (ex.p_min * ex.q_min);
        ("energy_floor_small_gradients", (r / (2.0 * consts.k3)).powf(pow))
    } else {
        ("energy_floor_large_gradients", (1.0 / ex.p_max).max(1.0 / ex.q_max))
    };
    Ok(CheckRow::bound(name, floor, energy))
}

/// Quotient chain of a feasible state: `A/((a+ + b+ + 2) R) <= A/Bw <= A/R`
/// with a strictly positive lower end.
pub fn check_quotient_chain(state: &StatePair, field: &ExponentField, r: f64) -> Vec<CheckRow> {
    let ex = field.extremes();
    let a = dirichlet_energy(state, field);
    let bw = weighted_coupling_energy(state, field);
    let lower = a / ((ex.alpha_max + ex.beta_max + 2.0) * r);
    let mid = a / bw;
    let upper = a / r;
    vec![
        CheckRow::bound("quotient_chain_positive", f64::MIN_POSITIVE, lower),
        CheckRow::bound("quotient_chain_lower", lower, mid),
        CheckRow::bound("quotient_chain_upper", mid, upper),
    ]
}

/// Options of [`full_report`].
#[derive(Debug, Clone)]
pub struct DiagnosticsOptions {
    /// Constraint level the result was solved at.
    pub r: f64,
    /// Residual threshold used by the solve.
    pub grad_tol: f64,
    pub eps_regularization: f64,
    pub k_max: usize,
    pub interior_floor: f64,
    pub seed: u64,
    /// Relative tolerance for the agreement of the reported eigenvalue with
    /// the least-squares multiplier; loose enough for the O(h) gap of
    /// variable-exponent fields, tight enough to flag a tampered value.
    pub multiplier_tol: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            r: 1.0,
            grad_tol: 1e-7,
            eps_regularization: 1e-10,
            k_max: 6,
            interior_floor: 1e-8,
            seed: 0,
            multiplier_tol: 0.02,
        }
    }
}

/// One pass running every check on a solve result; non-converged results
/// are flagged and the eigenpair checks are skipped.
pub fn full_report(
    result: &SolveResult,
    field: &ExponentField,
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    let mut report = DiagnosticsReport::default();
    report.checks.push(CheckRow {
        name: "converged".into(),
        passed: result.converged,
        lhs: if result.converged { 1.0 } else { 0.0 },
        rhs: 1.0,
        margin: 0.0,
    });
    if !result.converged {
        return Ok(report);
    }
    let state = &result.state;
    let r = opts.r;

    // Energy identity R lambda = A.
    let energy = dirichlet_energy(state, field);
    report.checks.push(CheckRow::bound(
        "energy_identity",
        (r * result.lambda - energy).abs(),
        1e-10 * (1.0 + energy.abs()),
    ));

    // Lagrange residual recomputed from the state with the least-squares
    // multiplier, plus a consistency row comparing that multiplier against
    // the reported eigenvalue A/R. The two coincide exactly at constant
    // exponents and up to an O(h grad p) gap otherwise; a tampered
    // eigenvalue fails the consistency row.
    let ga = dirichlet_gradient(state, field, opts.eps_regularization);
    let gb = coupling_gradient(state, field);
    let gb2 = gb.dot(&gb);
    let lambda_ls = if gb2 > 0.0 { ga.dot(&gb) / gb2 } else { f64::NAN };
    let mut res2 = 0.0;
    for (a, b) in ga.dz.iter().zip(&gb.dz) {
        let v = a - lambda_ls * b;
        res2 += v * v;
    }
    for (a, b) in ga.dw.iter().zip(&gb.dw) {
        let v = a - lambda_ls * b;
        res2 += v * v;
    }
    let residual = res2.sqrt() / (1.0 + ga.norm());
    report.checks.push(CheckRow::bound("lagrange_residual", residual, opts.grad_tol));
    report.checks.push(CheckRow::bound(
        "multiplier_consistency",
        (result.lambda - lambda_ls).abs(),
        opts.multiplier_tol * (1.0 + result.lambda.abs()),
    ));

    // Constraint maintenance.
    let b_val = coupling_energy(state, field);
    report.checks.push(CheckRow::bound("constraint", (b_val - r).abs() / r, 1e-8));

    report.checks.extend(check_positivity(state, opts.interior_floor));
    report.checks.extend(check_quotient_chain(state, field, r));

    let young = check_young_coupling_bound(state, field)?;
    report.checks.push(CheckRow::bound("young_coupling", young.lhs, young.rhs));

    let consts = estimate_floor_constants(field, opts.seed)?;
    report.checks.push(check_energy_floor(state, field, r, &consts)?);

    let ladder = moser_ladder(state, field, opts.k_max)?;
    report.checks.extend(check_ladder_bounds(&ladder));
    for k in 0..=ladder.k_max.min(3) {
        report.checks.extend(check_estimk(state, field, &ladder, k)?);
    }
    report.checks.extend(check_boundedness(state, field, &ladder));
    for (name, norms) in [("u", &ladder.norms_u), ("v", &ladder.norms_v)] {
        let sup = if name == "u" { state.z.max_abs() } else { state.w.max_abs() };
        for (k, norm) in norms.iter().enumerate() {
            report
                .checks
                .push(CheckRow::info(format!("ladder_{name}_k{k}"), *norm, sup));
        }
    }
    report
        .checks
        .push(check_geometric_tail_bound(1.0 / ladder.d_hat, ladder.k_max + 1)?);

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid, GridFunction};
    use crate::problem::{build_exponent_field, FieldSpec};
    use crate::solver::{minimize_constrained, SolveOptions};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn grid_1d(n: usize, a: f64, b: f64) -> Arc<Grid> {
        Grid::new(Domain::interval(a, b).unwrap(), &[n]).unwrap()
    }

    fn constant_field(n: usize) -> crate::problem::ExponentField {
        let g = grid_1d(n, 0.0, 1.0);
        build_exponent_field(&g, &FieldSpec::constant_balanced()).unwrap()
    }

    fn solved(n: usize, r: f64) -> (crate::problem::ExponentField, SolveResult) {
        let field = constant_field(n);
        let opts = SolveOptions { multistart: 2, ..Default::default() };
        let result = minimize_constrained(&field, r, &opts).unwrap();
        assert!(result.converged);
        (field, result)
    }

    #[test]
    fn dhat_interval_one_dimensional_defaults() {
        // All exponents exceed the dimension, so the conjugate ratios are
        // unbounded and the capped midpoint gives d = 2.
        let field = constant_field(7);
        let d_hat = default_d_hat(&field);
        assert!((d_hat - 12.0).abs() < 1e-12, "d_hat = {d_hat}");
        assert!(d_hat > field.extremes().p_max.max(field.extremes().q_max));
    }

    #[test]
    fn ladder_on_unit_bump_stays_below_one() {
        // A function bounded by 1 on a unit-measure domain has every ladder
        // norm at most 1 and nonpositive E_k.
        let (field, _) = solved(7, 1.0);
        let g = field.grid().clone();
        let bump = GridFunction::from_fn(&g, |x| {
            if (x[0] - 0.5).abs() < 0.3 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let s = StatePair::new(bump.clone(), bump).unwrap();
        let ladder = moser_ladder(&s, &field, 5).unwrap();
        assert!(ladder.norms_u.iter().all(|&n| n <= 1.0 + 1e-9), "{:?}", ladder.norms_u);
        assert!(ladder.e.iter().all(|&e| e <= 1e-9));
        for row in check_ladder_bounds(&ladder) {
            assert!(row.passed, "{row:?}");
        }
    }

    #[test]
    fn ladder_norms_approach_discrete_max() {
        let (field, result) = solved(15, 1.0);
        let ladder = moser_ladder(&result.state, &field, 6).unwrap();
        let sup = result.state.z.max_abs();
        let last = *ladder.norms_u.last().unwrap();
        assert!((last / sup - 1.0).abs() < 0.05, "last {last} sup {sup}");
        // Ratios become increasingly accurate up the ladder.
        let first_gap = (ladder.norms_u[0] / sup - 1.0).abs();
        let last_gap = (last / sup - 1.0).abs();
        assert!(last_gap <= first_gap + 1e-12);
    }

    #[test]
    fn ladder_truncates_at_exponent_cap() {
        let (field, result) = solved(7, 1.0);
        // d = 1.1 with p+ = 6: level 40 needs exponent 6 * 1.1^40 > 256.
        let ladder = moser_ladder_with(&result.state, &field, 40, 6.6).unwrap();
        assert!(ladder.truncated);
        assert!(ladder.k_max < 40);
        assert!(6.0 * ladder.d.powi(ladder.k_max as i32) <= LADDER_EXPONENT_CAP + 1e-9);
    }

    #[test]
    fn estimk_holds_on_eigenpairs() {
        let (field, result) = solved(15, 1.0);
        let ladder = moser_ladder(&result.state, &field, 6).unwrap();
        for k in 0..=3 {
            for row in check_estimk(&result.state, &field, &ladder, k).unwrap() {
                assert!(row.passed, "{row:?}");
            }
        }
        // Rescaling the state preserves the inequalities.
        let half = StatePair::new(
            GridFunction::from_values(
                field.grid(),
                result.state.z.values().iter().map(|v| 0.5 * v).collect(),
            )
            .unwrap(),
            GridFunction::from_values(
                field.grid(),
                result.state.w.values().iter().map(|v| 0.5 * v).collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let ladder_half = moser_ladder(&half, &field, 6).unwrap();
        for k in 0..=3 {
            for row in check_estimk(&half, &field, &ladder_half, k).unwrap() {
                assert!(row.passed, "{row:?}");
            }
        }
    }

    #[test]
    fn geometric_tail_bound_cases() {
        let row = check_geometric_tail_bound(0.5, 50).unwrap();
        assert!(row.passed && row.rhs == 2.0 && row.lhs <= 2.0);
        let row = check_geometric_tail_bound(0.9, 200).unwrap();
        assert!(row.passed && (row.rhs - 90.0).abs() < 1e-9);
        let row = check_geometric_tail_bound(0.3, 1).unwrap();
        assert!(row.passed && row.lhs == 0.0);
        assert!(check_geometric_tail_bound(1.5, 10).is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let s = rng.gen_range(0.01..0.99);
            let r = rng.gen_range(1..=500);
            assert!(check_geometric_tail_bound(s, r).unwrap().passed);
        }
    }

    #[test]
    fn positivity_cases() {
        let (field, result) = solved(15, 1.0);
        for row in check_positivity(&result.state, 1e-8) {
            assert!(row.passed, "{row:?}");
        }
        let g = field.grid().clone();
        let zero = StatePair::new(GridFunction::zeros(&g), GridFunction::zeros(&g)).unwrap();
        assert!(check_positivity(&zero, 1e-8).iter().any(|r| !r.passed));

        let mut vals = result.state.z.values().to_vec();
        vals[3] = -vals[3];
        let bad = StatePair::new(
            GridFunction::from_values(&g, vals).unwrap(),
            result.state.w.clone(),
        )
        .unwrap();
        assert!(check_positivity(&bad, 1e-8).iter().any(|r| !r.passed));
    }

    #[test]
    fn energy_floor_on_feasible_states() {
        let field = constant_field(9);
        let consts = estimate_floor_constants(&field, 7).unwrap();
        assert!(consts.k3 > 0.0);
        let g = field.grid().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for r in [1e-2, 1.0, 1e2] {
            for _ in 0..50 {
                let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                    (0..g.node_count()).map(|_| rng.gen_range(0.05..1.0)).collect()
                };
                let s = StatePair::new(
                    GridFunction::from_values(&g, draw(&mut rng)).unwrap(),
                    GridFunction::from_values(&g, draw(&mut rng)).unwrap(),
                )
                .unwrap();
                let feasible = crate::solver::retract_to_constraint(&s, &field, r).unwrap();
                let row = check_energy_floor(&feasible, &field, r, &consts).unwrap();
                assert!(row.passed, "R = {r}: {row:?}");
            }
        }
    }

    #[test]
    fn quotient_chain_on_feasible_states() {
        let field = constant_field(9);
        let g = field.grid().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..100 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..g.node_count()).map(|_| rng.gen_range(0.05..1.0)).collect()
            };
            let s = StatePair::new(
                GridFunction::from_values(&g, draw(&mut rng)).unwrap(),
                GridFunction::from_values(&g, draw(&mut rng)).unwrap(),
            )
            .unwrap();
            let r = rng.gen_range(0.1..10.0);
            let feasible = crate::solver::retract_to_constraint(&s, &field, r).unwrap();
            for row in check_quotient_chain(&feasible, &field, r) {
                assert!(row.passed, "{row:?}");
            }
        }
    }

    #[test]
    fn full_report_passes_on_converged_solve() {
        let (field, result) = solved(15, 1.0);
        let opts = DiagnosticsOptions::default();
        let report = full_report(&result, &field, &opts).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn full_report_flags_divergence_and_tampering() {
        let (field, result) = solved(15, 1.0);
        let opts = DiagnosticsOptions::default();

        let mut diverged = result.clone();
        diverged.converged = false;
        let report = full_report(&diverged, &field, &opts).unwrap();
        assert!(!report.passed());
        assert_eq!(report.checks.len(), 1, "eigenpair checks must be skipped");

        let mut tampered = result.clone();
        tampered.lambda *= 1.1;
        let report = full_report(&tampered, &field, &opts).unwrap();
        let row = report.checks.iter().find(|c| c.name == "multiplier_consistency").unwrap();
        assert!(!row.passed, "a 10% tampered eigenvalue must fail: {row:?}");
    }

    #[test]
    fn spiky_state_flagged_by_final_ratio() {
        let (field, _) = solved(15, 1.0);
        let g = field.grid().clone();
        // A single spike: low ladder levels sit far below the max.
        let mut vals = vec![1e-3; g.node_count()];
        vals[7] = 50.0;
        let spike = GridFunction::from_values(&g, vals).unwrap();
        let s = StatePair::new(spike.clone(), spike).unwrap();
        let ladder = moser_ladder(&s, &field, 2).unwrap();
        let rows = check_boundedness(&s, &field, &ladder);
        let ratio_row = rows.iter().find(|r| r.name == "ladder_final_ratio_u").unwrap();
        assert!(!ratio_row.passed, "shallow ladder of a spike should sit far from the sup");
    }
}
