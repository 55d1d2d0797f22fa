//! Energy functionals of the coupled system and their discrete gradients.
//!
//! For a state pair `(z, w)` the Dirichlet-type energy integrates
//! `(1/p)|∇z|^p + (1/q)|∇w|^q` over cells, and the coupling energy
//! integrates `c |z|^{alpha+1} |w|^{beta+1}` with `|z|, |w|` averaged from
//! nodes to cell centers. Gradients are the exact derivatives of these
//! discrete sums (differentiate-the-discretization), so central finite
//! differences reproduce them to round-off and Armijo line searches see a
//! consistent slope. Where `p(cell) < 2` the degenerate flux weight
//! `|∇z|^{p-2}` is replaced by `(|∇z|^2 + eps^2)^{(p-2)/2}`.

use crate::grid::{gradient, GridFunction};
use crate::modular;
use crate::problem::ExponentField;
use crate::{Error, Result};

/// A pair `(z, w)` of grid functions on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub z: GridFunction,
    pub w: GridFunction,
}

impl StatePair {
    pub fn new(z: GridFunction, w: GridFunction) -> Result<Self> {
        if z.grid() != w.grid() {
            return Err(Error::Domain("state pair components live on different grids".into()));
        }
        Ok(Self { z, w })
    }

    /// Componentwise absolute value; leaves the coupling energy unchanged
    /// and never increases the Dirichlet energy.
    pub fn abs(&self) -> Self {
        Self { z: self.z.abs(), w: self.w.abs() }
    }
}

/// Nodal derivatives of an energy with respect to both components.
#[derive(Debug, Clone)]
pub struct EnergyGradient {
    pub dz: Vec<f64>,
    pub dw: Vec<f64>,
}

impl EnergyGradient {
    pub fn dot(&self, other: &EnergyGradient) -> f64 {
        let a: f64 = self.dz.iter().zip(&other.dz).map(|(x, y)| x * y).sum();
        let b: f64 = self.dw.iter().zip(&other.dw).map(|(x, y)| x * y).sum();
        a + b
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

/// Neumaier compensated accumulator; keeps energy differences resolvable
/// for the line search near convergence.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// `|g|^{p-2}`, regularized below p = 2 so the flux stays defined at
/// vanishing gradients.
#[inline]
fn flux_weight(g_mag: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p < 2.0 {
        (g_mag * g_mag + eps * eps).powf(0.5 * (p - 2.0))
    } else {
        g_mag.powf(p - 2.0)
    }
}

/// Dirichlet-type energy `∫ (1/p)|∇z|^p + (1/q)|∇w|^q`.
pub fn dirichlet_energy(state: &StatePair, field: &ExponentField) -> f64 {
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let gz = gradient(&state.z);
    let gw = gradient(&state.w);
    let mut total = CompensatedSum::default();
    for cell in 0..grid.cell_count() {
        let p = field.p()[cell];
        let q = field.q()[cell];
        total.add(vol * (gz.magnitude(cell).powf(p) / p + gw.magnitude(cell).powf(q) / q));
    }
    total.value()
}

/// Coupling energy `∫ c |z|^{alpha+1} |w|^{beta+1}`.
pub fn coupling_energy(state: &StatePair, field: &ExponentField) -> f64 {
    coupling_energy_with(state, field, |_| 1.0)
}

/// Coupling energy weighted by `alpha + beta + 2`, the denominator of the
/// second Rayleigh quotient.
pub fn weighted_coupling_energy(state: &StatePair, field: &ExponentField) -> f64 {
    coupling_energy_with(state, field, |cell| {
        field.alpha()[cell] + field.beta()[cell] + 2.0
    })
}

fn coupling_energy_with(
    state: &StatePair,
    field: &ExponentField,
    extra: impl Fn(usize) -> f64,
) -> f64 {
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    let mut total = CompensatedSum::default();
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
        total.add(vol * field.weight()[cell] * extra(cell) * zc.powf(a) * wc.powf(b));
    }
    total.value()
}

/// Exact nodal gradient of the (regularized) Dirichlet energy.
pub fn dirichlet_gradient(state: &StatePair, field: &ExponentField, eps: f64) -> EnergyGradient {
    let grid = state.z.grid();
    let dim = grid.dimension();
    let vol = grid.cell_volume();
    let gz = gradient(&state.z);
    let gw = gradient(&state.w);
    let mut dz = vec![0.0; grid.node_count()];
    let mut dw = vec![0.0; grid.node_count()];
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        for (g, samples, out) in [
            (&gz, field.p(), &mut dz),
            (&gw, field.q(), &mut dw),
        ] {
            let mag = g.magnitude(cell);
            if mag == 0.0 && eps == 0.0 {
                continue;
            }
            let w = flux_weight(mag, samples[cell], eps);
            for axis in 0..dim {
                let flux = vol * w * g.component(cell, axis);
                if flux == 0.0 {
                    continue;
                }
                for k in 0..corners.count {
                    if let Some(i) = corners.nodes[k] {
                        out[i] += flux * grid.gradient_coeff(axis, k);
                    }
                }
            }
        }
    }
    EnergyGradient { dz, dw }
}

/// Exact nodal gradient of the coupling energy.
pub fn coupling_gradient(state: &StatePair, field: &ExponentField) -> EnergyGradient {
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    let mut dz = vec![0.0; grid.node_count()];
    let mut dw = vec![0.0; grid.node_count()];
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
        let base = vol * field.weight()[cell];
        let dz_cell = base * a * zc.powf(a - 1.0) * wc.powf(b) * iw;
        let dw_cell = base * b * zc.powf(a) * wc.powf(b - 1.0) * iw;
        for k in 0..corners.count {
            if let Some(i) = corners.nodes[k] {
                dz[i] += dz_cell * sgn(state.z.values()[i]);
                dw[i] += dw_cell * sgn(state.w.values()[i]);
            }
        }
    }
    EnergyGradient { dz, dw }
}

/// Rayleigh quotient of the system, `A / B`.
pub fn rayleigh_quotient(state: &StatePair, field: &ExponentField) -> Result<f64> {
    let b = coupling_energy(state, field);
    if b <= 0.0 {
        return Err(Error::QuotientUndefined);
    }
    Ok(dirichlet_energy(state, field) / b)
}

/// Scalar modular Rayleigh quotient `rho_p(∇u) / rho_p(u)`.
///
/// This is a quotient of modulars, not norms; for variable `p` it is not
/// invariant under scaling of `u`, which is exactly the mechanism behind
/// the zero-infimum phenomenon.
pub fn scalar_rayleigh_quotient(u: &GridFunction, p: &[f64]) -> Result<f64> {
    let den = modular::modular(u, p)?;
    if den <= 0.0 {
        return Err(Error::QuotientUndefined);
    }
    let num = modular::modular_of_magnitude(&gradient(u), p)?;
    Ok(num / den)
}

/// Derivative pairing of the coupling energy against the scaled test pair
/// `(z/p, w/q)`, evaluated cell-by-cell with the shared quadrature rule.
/// Under the balance identity it reproduces the coupling energy exactly.
///
/// Returns `(pairing, coupling_energy)`.
pub fn coupling_euler_pairing(state: &StatePair, field: &ExponentField) -> (f64, f64) {
    let grid = state.z.grid();
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    let mut pairing = 0.0;
    let mut coupling = 0.0;
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
        let term = vol * field.weight()[cell] * zc.powf(a) * wc.powf(b);
        coupling += term;
        pairing += term * (a / field.p()[cell] + b / field.q()[cell]);
    }
    (pairing, coupling)
}

/// Nodal derivative of the modular `rho_p(u)`.
pub fn d_modular(u: &GridFunction, p: &[f64]) -> Vec<f64> {
    let grid = u.grid();
    let vol = grid.cell_volume();
    let iw = grid.interp_weight();
    let mut out = vec![0.0; grid.node_count()];
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        let s = p[cell];
        for k in 0..corners.count {
            if let Some(i) = corners.nodes[k] {
                let v = u.values()[i];
                if v != 0.0 {
                    out[i] += vol * iw * s * v.abs().powf(s - 1.0) * sgn(v);
                }
            }
        }
    }
    out
}

/// Nodal derivative of the gradient modular `rho_p(∇u)`.
pub fn d_gradient_modular(u: &GridFunction, p: &[f64], eps: f64) -> Vec<f64> {
    let grid = u.grid();
    let dim = grid.dimension();
    let vol = grid.cell_volume();
    let g = gradient(u);
    let mut out = vec![0.0; grid.node_count()];
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        let s = p[cell];
        let mag = g.magnitude(cell);
        if mag == 0.0 && eps == 0.0 {
            continue;
        }
        let w = s * flux_weight(mag, s, eps);
        for axis in 0..dim {
            let flux = vol * w * g.component(cell, axis);
            if flux == 0.0 {
                continue;
            }
            for k in 0..corners.count {
                if let Some(i) = corners.nodes[k] {
                    out[i] += flux * grid.gradient_coeff(axis, k);
                }
            }
        }
    }
    out
}
