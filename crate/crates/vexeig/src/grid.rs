//! Uniform-grid discretization of the domain.
//!
//! A [`Grid`] places `n` interior nodes per axis on a 1D interval or a 2D
//! rectangle; the `n + 1` cells per axis sit between consecutive nodes
//! (boundary nodes included, carrying the homogeneous Dirichlet value 0).
//! Grid functions store interior node values only. The discrete gradient is
//! cell-centered: in 1D the forward difference across each cell, in 2D the
//! per-axis average of the two edge differences of the cell. Integrals use
//! the midpoint rule over cells, so quadrature points are cell centers.

use std::sync::Arc;

use crate::{Error, Result};

/// Bounded open interval or rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    /// 1D domain `(a, b)`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    /// 2D domain `(ax, bx) x (ay, by)`.
    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Self::new(vec![x, y])
    }

    fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::Domain(format!(
                "dimension must be 1 or 2, got {}",
                bounds.len()
            )));
        }
        for &(a, b) in &bounds {
            if !a.is_finite() || !b.is_finite() || b - a <= 0.0 {
                return Err(Error::Domain(format!(
                    "axis interval ({a}, {b}) must have strictly positive length"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        self.bounds[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        let (a, b) = self.bounds[axis];
        b - a
    }

    /// Product of axis lengths.
    pub fn measure(&self) -> f64 {
        (0..self.dimension()).map(|ax| self.length(ax)).product()
    }
}

/// Uniform tensor grid with `n` interior nodes and `n + 1` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    n: Vec<usize>,
    h: Vec<f64>,
}

/// Corner nodes of one cell: `None` marks a boundary node (value 0).
///
/// Order is `[left, right]` in 1D and `[v00, v10, v01, v11]` in 2D, matching
/// the stencil coefficients returned by [`Grid::gradient_coeff`].
#[derive(Debug, Clone, Copy)]
pub struct CellCorners {
    pub nodes: [Option<usize>; 4],
    pub count: usize,
}

impl Grid {
    /// Builds a grid with `n[axis]` interior nodes per axis.
    pub fn new(domain: Domain, n: &[usize]) -> Result<Arc<Self>> {
        if n.len() != domain.dimension() {
            return Err(Error::Domain(format!(
                "expected {} interior-node counts, got {}",
                domain.dimension(),
                n.len()
            )));
        }
        if n.iter().any(|&k| k < 1) {
            return Err(Error::Domain("need at least one interior node per axis".into()));
        }
        let h = (0..domain.dimension())
            .map(|ax| domain.length(ax) / (n[ax] + 1) as f64)
            .collect();
        Ok(Arc::new(Self { domain, n: n.to_vec(), h }))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Interior nodes along `axis`.
    pub fn interior(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn node_count(&self) -> usize {
        self.n.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().map(|&k| k + 1).product()
    }

    /// Volume of one cell (all cells are congruent).
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Coordinates of interior node `idx` (x varies fastest in 2D).
    pub fn node_coord(&self, idx: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        match self.dimension() {
            1 => {
                let (a, _) = self.domain.bounds(0);
                out[0] = a + (idx + 1) as f64 * self.h[0];
            }
            _ => {
                let nx = self.n[0];
                let (i, j) = (idx % nx, idx / nx);
                let (ax, _) = self.domain.bounds(0);
                let (ay, _) = self.domain.bounds(1);
                out[0] = ax + (i + 1) as f64 * self.h[0];
                out[1] = ay + (j + 1) as f64 * self.h[1];
            }
        }
        out
    }

    /// Center of cell `cell` (x varies fastest in 2D); quadrature point.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        match self.dimension() {
            1 => {
                let (a, _) = self.domain.bounds(0);
                out[0] = a + (cell as f64 + 0.5) * self.h[0];
            }
            _ => {
                let cx = self.n[0] + 1;
                let (ci, cj) = (cell % cx, cell / cx);
                let (ax, _) = self.domain.bounds(0);
                let (ay, _) = self.domain.bounds(1);
                out[0] = ax + (ci as f64 + 0.5) * self.h[0];
                out[1] = ay + (cj as f64 + 0.5) * self.h[1];
            }
        }
        out
    }

    /// Corner nodes of `cell` in stencil order.
    pub fn cell_corners(&self, cell: usize) -> CellCorners {
        let mut nodes = [None; 4];
        match self.dimension() {
            1 => {
                let n = self.n[0];
                if cell >= 1 {
                    nodes[0] = Some(cell - 1);
                }
                if cell < n {
                    nodes[1] = Some(cell);
                }
                CellCorners { nodes, count: 2 }
            }
            _ => {
                let (nx, ny) = (self.n[0], self.n[1]);
                let cx = nx + 1;
                let (ci, cj) = (cell % cx, cell / cx);
                let node = |i: isize, j: isize| -> Option<usize> {
                    if i >= 0 && (i as usize) < nx && j >= 0 && (j as usize) < ny {
                        Some(j as usize * nx + i as usize)
                    } else {
                        None
                    }
                };
                let (i, j) = (ci as isize, cj as isize);
                nodes[0] = node(i - 1, j - 1);
                nodes[1] = node(i, j - 1);
                nodes[2] = node(i - 1, j);
                nodes[3] = node(i, j);
                CellCorners { nodes, count: 4 }
            }
        }
    }

    /// Coefficient of corner `corner` in the cell-centered difference
    /// quotient along `axis`.
    pub fn gradient_coeff(&self, axis: usize, corner: usize) -> f64 {
        match self.dimension() {
            1 => [-1.0, 1.0][corner] / self.h[0],
            _ => match axis {
                0 => [-1.0, 1.0, -1.0, 1.0][corner] / (2.0 * self.h[0]),
                _ => [-1.0, -1.0, 1.0, 1.0][corner] / (2.0 * self.h[1]),
            },
        }
    }

    /// Weight of each corner in the node-to-cell average.
    pub fn interp_weight(&self) -> f64 {
        1.0 / (1 << self.dimension()) as f64
    }
}

/// Real-valued function on interior nodes, extended by 0 on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: Arc::clone(grid), values: vec![0.0; grid.node_count()] }
    }

    /// Wraps interior node values; rejects NaN/infinite entries.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "expected {} node values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid function values must be finite".into()));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    /// Samples `f` at interior node coordinates.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dimension();
        let values = (0..grid.node_count())
            .map(|i| f(&grid.node_coord(i)[..dim]))
            .collect();
        Self::from_values(grid, values)
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at an optional node index; boundary (`None`) is 0.
    #[inline]
    pub fn corner_value(&self, node: Option<usize>) -> f64 {
        node.map_or(0.0, |i| self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise absolute value (leaves the coupling energy unchanged).
    pub fn abs(&self) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }
}

/// Cell-centered vector field (difference quotients), `cells x dimension`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<f64>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    #[inline]
    pub fn component(&self, cell: usize, axis: usize) -> f64 {
        self.components[cell * self.grid.dimension() + axis]
    }

    /// Euclidean magnitude of the per-cell vector.
    #[inline]
    pub fn magnitude(&self, cell: usize) -> f64 {
        match self.grid.dimension() {
            1 => self.components[cell].abs(),
            _ => {
                let gx = self.components[2 * cell];
                let gy = self.components[2 * cell + 1];
                gx.hypot(gy)
            }
        }
    }
}

/// Scalar samples at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Domain(format!(
                "expected {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cell-centered discrete gradient of `u` under the zero Dirichlet condition.
pub fn gradient(u: &GridFunction) -> VectorField {
    let grid = u.grid();
    let dim = grid.dimension();
    let mut components = vec![0.0; grid.cell_count() * dim];
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        for axis in 0..dim {
            let mut g = 0.0;
            for k in 0..corners.count {
                g += grid.gradient_coeff(axis, k) * u.corner_value(corners.nodes[k]);
            }
            components[cell * dim + axis] = g;
        }
    }
    VectorField { grid: Arc::clone(grid), components }
}

/// Midpoint rule: sum of cell values times cell volume.
pub fn integrate(f: &CellField) -> f64 {
    let vol = f.grid.cell_volume();
    f.values.iter().sum::<f64>() * vol
}

/// Lebesgue measure of the grid's domain.
pub fn lebesgue_measure(grid: &Grid) -> f64 {
    grid.domain().measure()
}
