//! Continuous problem data: variable exponents, coupling weight and the
//! hypotheses they must satisfy.
//!
//! The exponents `p, q, alpha, beta` and the weight `c` are sampled at the
//! quadrature points (cell centers) of a grid, so every integral in the
//! energy layer sees the same collocated data. Extremes such as `p⁻ = min p`
//! are cached as exact min/max over the stored samples.
//!
//! Hypotheses checked by [`validate_hypotheses`]:
//!
//! * lower bounds `p⁻, q⁻, alpha⁻, beta⁻ > 1`;
//! * weight `c >= 0` with finite sup norm;
//! * the balance identity `(alpha+1)/p + (beta+1)/q = 1` at every sample;
//! * subcriticality `p⁺ < N p⁻ / (N - p⁻)` whenever `p⁻ < N` (the condition
//!   the compact embedding actually uses), and likewise for `q`.

use std::sync::Arc;

use crate::grid::Grid;
use crate::{Error, Result};

/// Closed-form exponent profile, evaluated at quadrature points.
#[derive(Debug, Clone, PartialEq)]
pub enum ExponentSpec {
    /// Constant value.
    Constant { value: f64 },
    /// `intercept + slope . x` with one slope entry per axis.
    Affine { intercept: f64, slope: Vec<f64> },
    /// Piecewise-linear profile in `r = |x - center|`.
    /// Knots are `(r, value)` pairs with strictly increasing radii.
    Radial { center: Vec<f64>, knots: Vec<(f64, f64)> },
    /// Piecewise-linear profile in the first coordinate (1D domains).
    /// Knots are `(x, value)` pairs with strictly increasing abscissae.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl ExponentSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    /// The non-monotone profile on `(-2, 2)`: value 3 for `|x| <= 1`,
    /// `4 - |x|` for `1 <= |x| <= 2` (even extension via the radius).
    pub fn zero_infimum_profile() -> Self {
        Self::Radial { center: vec![0.0], knots: vec![(0.0, 3.0), (1.0, 3.0), (2.0, 2.0)] }
    }

    /// Evaluates the profile at `x`; errors when `x` falls outside the
    /// profile's range of definition.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Constant { value } => Ok(*value),
            Self::Affine { intercept, slope } => {
                if slope.len() != x.len() {
                    return Err(Error::Domain(format!(
                        "affine spec has {} slope entries for a {}-dimensional point",
                        slope.len(),
                        x.len()
                    )));
                }
                Ok(intercept + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>())
            }
            Self::Radial { center, knots } => {
                if center.len() != x.len() {
                    return Err(Error::Domain(format!(
                        "radial spec center has dimension {}, point has {}",
                        center.len(),
                        x.len()
                    )));
                }
                let r = center
                    .iter()
                    .zip(x)
                    .map(|(c, xi)| (xi - c) * (xi - c))
                    .sum::<f64>()
                    .sqrt();
                piecewise_linear(knots, r).ok_or_else(|| Error::UndefinedAtPoint {
                    point: x.to_vec(),
                    reason: format!("radius {r} outside knot range"),
                })
            }
            Self::Piecewise { knots } => {
                let t = x[0];
                piecewise_linear(knots, t).ok_or_else(|| Error::UndefinedAtPoint {
                    point: x.to_vec(),
                    reason: format!("abscissa {t} outside knot range"),
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let knots = match self {
            Self::Radial { knots, .. } | Self::Piecewise { knots } => knots,
            _ => return Ok(()),
        };
        if knots.len() < 2 {
            return Err(Error::Domain("piecewise profile needs at least two knots".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("piecewise knots must have strictly increasing abscissae".into()));
        }
        Ok(())
    }
}

fn piecewise_linear(knots: &[(f64, f64)], t: f64) -> Option<f64> {
    let (t0, _) = *knots.first()?;
    let (t1, _) = *knots.last()?;
    // Tolerate round-off at the profile ends.
    let tol = 1e-12 * (1.0 + t1.abs().max(t0.abs()));
    if t < t0 - tol || t > t1 + tol {
        return None;
    }
    let t = t.clamp(t0, t1);
    let k = knots.windows(2).position(|w| t <= w[1].0).unwrap_or(knots.len() - 2);
    let (ta, va) = knots[k];
    let (tb, vb) = knots[k + 1];
    Some(va + (vb - va) * (t - ta) / (tb - ta))
}

/// Specs for the five coefficient profiles of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub p: ExponentSpec,
    pub q: ExponentSpec,
    pub alpha: ExponentSpec,
    pub beta: ExponentSpec,
    pub c: ExponentSpec,
}

impl FieldSpec {
    /// Constant-coefficient system `p = q = 6`, `alpha = beta = 2`, `c = 1`;
    /// balanced exactly since `3/6 + 3/6 = 1`.
    pub fn constant_balanced() -> Self {
        Self {
            p: ExponentSpec::constant(6.0),
            q: ExponentSpec::constant(6.0),
            alpha: ExponentSpec::constant(2.0),
            beta: ExponentSpec::constant(2.0),
            c: ExponentSpec::constant(1.0),
        }
    }
}

/// Sampled exponents and weight with cached extremes.
#[derive(Debug, Clone)]
pub struct ExponentField {
    grid: Arc<Grid>,
    p: Vec<f64>,
    q: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    c: Vec<f64>,
    extremes: Extremes,
}

#[derive(Debug, Clone, Copy)]
pub struct Extremes {
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub c_sup: f64,
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

impl ExponentField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn weight(&self) -> &[f64] {
        &self.c
    }

    pub fn extremes(&self) -> Extremes {
        self.extremes
    }
}

/// Samples the five profiles at the grid's quadrature points.
pub fn build_exponent_field(grid: &Arc<Grid>, spec: &FieldSpec) -> Result<ExponentField> {
    let dim = grid.dimension();
    let sample = |s: &ExponentSpec| -> Result<Vec<f64>> {
        s.validate()?;
        (0..grid.cell_count())
            .map(|cell| {
                let x = grid.cell_center(cell);
                let v = s.eval(&x[..dim])?;
                if !v.is_finite() {
                    return Err(Error::UndefinedAtPoint {
                        point: x[..dim].to_vec(),
                        reason: "profile evaluates to a non-finite value".into(),
                    });
                }
                Ok(v)
            })
            .collect()
    };
    let p = sample(&spec.p)?;
    let q = sample(&spec.q)?;
    let alpha = sample(&spec.alpha)?;
    let beta = sample(&spec.beta)?;
    let c = sample(&spec.c)?;
    let (p_min, p_max) = min_max(&p);
    let (q_min, q_max) = min_max(&q);
    let (alpha_min, alpha_max) = min_max(&alpha);
    let (beta_min, beta_max) = min_max(&beta);
    let (_, c_sup) = min_max(&c.iter().map(|v| v.abs()).collect::<Vec<_>>());
    Ok(ExponentField {
        grid: Arc::clone(grid),
        p,
        q,
        alpha,
        beta,
        c,
        extremes: Extremes {
            p_min,
            p_max,
            q_min,
            q_max,
            alpha_min,
            alpha_max,
            beta_min,
            beta_max,
            c_sup,
        },
    })
}

/// One failed hypothesis with its worst witness point.
#[derive(Debug, Clone)]
pub struct Violation {
    pub hypothesis: String,
    pub point: Vec<f64>,
    pub value: f64,
}

/// Outcome of [`validate_hypotheses`]; violations are data, not errors.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Checks the structural hypotheses on a built field.
pub fn validate_hypotheses(field: &ExponentField, balance_tol: f64) -> ValidationReport {
    let grid = field.grid();
    let dim = grid.dimension();
    let mut violations = Vec::new();

    let mut worst_low = |name: &str, samples: &[f64]| {
        let (idx, &val) = samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if val <= 1.0 {
            violations.push(Violation {
                hypothesis: name.to_string(),
                point: grid.cell_center(idx)[..dim].to_vec(),
                value: val,
            });
        }
    };
    worst_low("H.4: p > 1", field.p());
    worst_low("H.4: q > 1", field.q());
    worst_low("H.3: alpha > 1", field.alpha());
    worst_low("H.3: beta > 1", field.beta());

    // H.2: c >= 0 with finite sup norm.
    let (idx, &c_min) = field
        .weight()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if c_min < 0.0 {
        violations.push(Violation {
            hypothesis: "H.2: c >= 0".into(),
            point: grid.cell_center(idx)[..dim].to_vec(),
            value: c_min,
        });
    }
    if !field.extremes().c_sup.is_finite() {
        violations.push(Violation {
            hypothesis: "H.2: c bounded".into(),
            point: vec![],
            value: field.extremes().c_sup,
        });
    }

    // Balance identity at every quadrature point; report the worst defect.
    let mut worst = (0usize, 0.0f64);
    for cell in 0..grid.cell_count() {
        let defect = ((field.alpha()[cell] + 1.0) / field.p()[cell]
            + (field.beta()[cell] + 1.0) / field.q()[cell]
            - 1.0)
            .abs();
        if defect > worst.1 {
            worst = (cell, defect);
        }
    }
    if worst.1 > balance_tol {
        violations.push(Violation {
            hypothesis: "H.3: balance identity".into(),
            point: grid.cell_center(worst.0)[..dim].to_vec(),
            value: worst.1,
        });
    }

    // Subcriticality for the compact embedding, only binding below the
    // space dimension.
    let n = dim as f64;
    let ex = field.extremes();
    for (name, lo, hi) in [("p", ex.p_min, ex.p_max), ("q", ex.q_min, ex.q_max)] {
        if lo > 1.0 && lo < n && hi >= n * lo / (n - lo) {
            violations.push(Violation {
                hypothesis: format!("subcriticality: {name}+ < N {name}- / (N - {name}-)"),
                point: vec![],
                value: hi,
            });
        }
    }

    ValidationReport { passed: violations.is_empty(), violations }
}

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate_exponent(p_value: f64) -> Result<f64> {
    if !(p_value > 1.0) {
        return Err(Error::Domain(format!("conjugate exponent needs p > 1, got {p_value}")));
    }
    Ok(p_value / (p_value - 1.0))
}

/// True iff both sampled exponents `p` and `q` are (non-strictly) monotone
/// along every grid line of cell centers in the given direction.
pub fn check_monotonicity_condition(field: &ExponentField, direction: &[f64]) -> Result<bool> {
    let grid = field.grid();
    let dim = grid.dimension();
    if direction.len() != dim {
        return Err(Error::Domain(format!(
            "direction has dimension {}, grid has {}",
            direction.len(),
            dim
        )));
    }
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Domain("direction vector must be nonzero and finite".into()));
    }
    let dir: Vec<f64> = direction.iter().map(|d| d / norm).collect();

    // Group cells into lines: equal perpendicular offset, ordered by the
    // signed projection onto the direction.
    let h_min = (0..dim).map(|ax| grid.spacing(ax)).fold(f64::INFINITY, f64::min);
    let quantum = 1e-6 * h_min;
    let mut lines: std::collections::BTreeMap<i64, Vec<(f64, usize)>> = Default::default();
    for cell in 0..grid.cell_count() {
        let x = grid.cell_center(cell);
        let t: f64 = (0..dim).map(|ax| x[ax] * dir[ax]).sum();
        let off = match dim {
            1 => 0.0,
            _ => -x[0] * dir[1] + x[1] * dir[0],
        };
        let key = (off / quantum).round() as i64;
        lines.entry(key).or_default().push((t, cell));
    }

    let monotone = |samples: &[f64], line: &[(f64, usize)]| -> bool {
        let tol = 1e-12;
        let mut up = true;
        let mut down = true;
        for w in line.windows(2) {
            let d = samples[w[1].1] - samples[w[0].1];
            if d > tol {
                down = false;
            }
            if d < -tol {
                up = false;
            }
        }
        up || down
    };

    for line in lines.values_mut() {
        line.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if !monotone(field.p(), line) || !monotone(field.q(), line) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    fn grid_1d(n: usize, a: f64, b: f64) -> Arc<Grid> {
        Grid::new(Domain::interval(a, b).unwrap(), &[n]).unwrap()
    }

    fn scalar_field(grid: &Arc<Grid>, p: ExponentSpec) -> ExponentField {
        // Balanced companions so validation focuses on p.
        let spec = FieldSpec {
            q: p.clone(),
            alpha: ExponentSpec::constant(2.0),
            beta: ExponentSpec::constant(2.0),
            c: ExponentSpec::constant(1.0),
            p,
        };
        build_exponent_field(grid, &spec).unwrap()
    }

    #[test]
    fn constant_field_extremes() {
        let g = grid_1d(4, 0.0, 1.0);
        let f = scalar_field(&g, ExponentSpec::constant(2.0));
        assert_eq!(f.extremes().p_min, 2.0);
        assert_eq!(f.extremes().p_max, 2.0);
    }

    #[test]
    fn zero_infimum_profile_extremes() {
        // Continuous extremes are (2, 3); the sampled minimum sits half a
        // cell inside the boundary, the maximum is attained exactly.
        let g = grid_1d(255, -2.0, 2.0);
        let f = scalar_field(&g, ExponentSpec::zero_infimum_profile());
        let ex = f.extremes();
        assert_eq!(ex.p_max, 3.0);
        let h = g.spacing(0);
        assert!(ex.p_min > 2.0 && ex.p_min <= 2.0 + 0.5 * h + 1e-12, "p_min = {}", ex.p_min);
    }

    #[test]
    fn affine_field_extremes_attained_at_sampled_endpoints() {
        let g = grid_1d(8, 0.0, 1.0);
        let f = scalar_field(
            &g,
            ExponentSpec::Affine { intercept: 2.0, slope: vec![1.0] },
        );
        let ex = f.extremes();
        let h = g.spacing(0);
        assert!((ex.p_min - (2.0 + 0.5 * h)).abs() < 1e-14);
        assert!((ex.p_max - (3.0 - 0.5 * h)).abs() < 1e-14);
        // cached extremes equal min/max over the stored samples exactly
        let (lo, hi) = f
            .p()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert_eq!(ex.p_min, lo);
        assert_eq!(ex.p_max, hi);
    }

    #[test]
    fn spec_undefined_outside_knots() {
        let g = grid_1d(4, -3.0, 3.0);
        let spec = FieldSpec {
            p: ExponentSpec::zero_infimum_profile(), // defined only for |x| <= 2
            ..FieldSpec::constant_balanced()
        };
        let err = build_exponent_field(&g, &spec).unwrap_err();
        match err {
            Error::UndefinedAtPoint { point, .. } => assert!(point[0].abs() > 2.0),
            other => panic!("expected UndefinedAtPoint, got {other:?}"),
        }
    }

    #[test]
    fn validation_passes_exact_balance() {
        let g = grid_1d(6, 0.0, 1.0);
        let f = build_exponent_field(&g, &FieldSpec::constant_balanced()).unwrap();
        let report = validate_hypotheses(&f, 1e-10);
        assert!(report.passed, "{:?}", report.violations);
    }

    #[test]
    fn validation_flags_alpha_at_one() {
        // p = q = 4, alpha = beta = 1 balances exactly but violates H.3.
        let g = grid_1d(6, 0.0, 1.0);
        let spec = FieldSpec {
            p: ExponentSpec::constant(4.0),
            q: ExponentSpec::constant(4.0),
            alpha: ExponentSpec::constant(1.0),
            beta: ExponentSpec::constant(1.0),
            c: ExponentSpec::constant(1.0),
        };
        let f = build_exponent_field(&g, &spec).unwrap();
        let report = validate_hypotheses(&f, 1e-10);
        assert!(!report.passed);
        assert!(report.violations.iter().any(|v| v.hypothesis.contains("alpha")));
        assert!(!report.violations.iter().any(|v| v.hypothesis.contains("balance")));
    }

    #[test]
    fn validation_flags_balance_defect() {
        // p = q = 2 with alpha = beta = 2: defect |3/2 + 3/2 - 1| = 2.
        let g = grid_1d(6, 0.0, 1.0);
        let spec = FieldSpec {
            p: ExponentSpec::constant(2.0),
            q: ExponentSpec::constant(2.0),
            alpha: ExponentSpec::constant(2.0),
            beta: ExponentSpec::constant(2.0),
            c: ExponentSpec::constant(1.0),
        };
        let f = build_exponent_field(&g, &spec).unwrap();
        let report = validate_hypotheses(&f, 1e-10);
        let bal = report
            .violations
            .iter()
            .find(|v| v.hypothesis.contains("balance"))
            .expect("balance violation");
        assert!((bal.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_values() {
        assert_eq!(conjugate_exponent(2.0).unwrap(), 2.0);
        assert!((conjugate_exponent(3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((conjugate_exponent(1.25).unwrap() - 5.0).abs() < 1e-12);
        assert!(conjugate_exponent(1.0).is_err());
        assert!(conjugate_exponent(0.5).is_err());
    }

    #[test]
    fn conjugate_is_involution() {
        let mut t = 1.01;
        while t < 100.0 {
            let back = conjugate_exponent(conjugate_exponent(t).unwrap()).unwrap();
            assert!((back - t).abs() < 1e-12 * (1.0 + t));
            t *= 1.37;
        }
    }

    #[test]
    fn monotonicity_cases() {
        let g = grid_1d(16, 0.0, 1.0);
        let affine = scalar_field(&g, ExponentSpec::Affine { intercept: 2.0, slope: vec![1.0] });
        assert!(check_monotonicity_condition(&affine, &[1.0]).unwrap());

        let constant = scalar_field(&g, ExponentSpec::constant(3.0));
        assert!(check_monotonicity_condition(&constant, &[-1.0]).unwrap());

        let gz = grid_1d(63, -2.0, 2.0);
        let nonmono = scalar_field(&gz, ExponentSpec::zero_infimum_profile());
        assert!(!check_monotonicity_condition(&nonmono, &[1.0]).unwrap());

        assert!(check_monotonicity_condition(&affine, &[0.0]).is_err());
    }

    #[test]
    fn monotonicity_2d_axis_lines() {
        let g = Grid::new(Domain::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap(), &[6, 5]).unwrap();
        let spec = FieldSpec {
            p: ExponentSpec::Affine { intercept: 2.0, slope: vec![1.0, 0.0] },
            q: ExponentSpec::Affine { intercept: 2.0, slope: vec![1.0, 0.0] },
            alpha: ExponentSpec::constant(2.0),
            beta: ExponentSpec::constant(2.0),
            c: ExponentSpec::constant(1.0),
        };
        let f = build_exponent_field(&g, &spec).unwrap();
        assert!(check_monotonicity_condition(&f, &[1.0, 0.0]).unwrap());
        assert!(check_monotonicity_condition(&f, &[0.0, 1.0]).unwrap());

        let bump = FieldSpec {
            p: ExponentSpec::Radial { center: vec![0.5, 0.5], knots: vec![(0.0, 3.0), (1.5, 2.0)] },
            ..spec
        };
        let f = build_exponent_field(&g, &bump).unwrap();
        assert!(!check_monotonicity_condition(&f, &[1.0, 0.0]).unwrap());
    }
}
