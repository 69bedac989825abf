//! Domains, node-centered uniform grids, and the discrete Laplacian.
//!
//! Cartesian grids are 1D or 2D. Radial grids store a 1D radius grid for
//! radially symmetric problems in `n` dimensions; the Laplacian there is
//! `f'' + (n-1)/rho * f'`.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Node coordinates. Only the first `Grid::axes()` entries are meaningful.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ambient_dim: usize,
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
        return Err(Error::InvalidDomain(format!(
            "bounds [{lower}, {upper}] are degenerate"
        )));
    }
    Ok(())
}

impl Domain {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        Ok(Self {
            kind: DomainKind::Interval,
            lower: vec![lower],
            upper: vec![upper],
            ambient_dim: 1,
        })
    }

    pub fn rectangle(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        check_bounds(lower[0], upper[0])?;
        check_bounds(lower[1], upper[1])?;
        Ok(Self {
            kind: DomainKind::Rectangle,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            ambient_dim: 2,
        })
    }

    /// Shell `inner <= |x| <= outer` in `n` dimensions, stored by radius.
    pub fn radial(inner: f64, outer: f64, n: usize) -> Result<Self> {
        check_bounds(inner, outer)?;
        if inner <= 0.0 {
            return Err(Error::InvalidDomain(format!(
                "radial inner radius must be positive, got {inner}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidDomain(format!(
                "radial mode needs ambient dimension >= 2, got {n}"
            )));
        }
        Ok(Self {
            kind: DomainKind::Radial,
            lower: vec![inner],
            upper: vec![outer],
            ambient_dim: n,
        })
    }

    /// Radial domain with the default inner radius `1e-3 * outer`.
    pub fn ball(outer: f64, n: usize) -> Result<Self> {
        Self::radial(1e-3 * outer, outer, n)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Number of stored coordinate axes (1 for intervals and radial shells).
    pub fn axes(&self) -> usize {
        self.lower.len()
    }
}

/// Surface area of the unit sphere in `n` dimensions.
pub fn unit_sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / libm::tgamma(half)
}

/// Interior five-point (or three-point) stencil: `lap f_i = sum_k w_k (f_{n_k} - f_i)`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub neighbors: [usize; 4],
    pub weights: [f64; 4],
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, cells: &[usize]) -> Result<Self> {
        if cells.len() != domain.axes() {
            return Err(Error::InvalidDomain(format!(
                "{} cell counts given for {} axes",
                cells.len(),
                domain.axes()
            )));
        }
        for (axis, &c) in cells.iter().enumerate() {
            if c < 4 {
                return Err(Error::TooFewCells { axis, cells: c });
            }
        }
        let spacing = (0..domain.axes())
            .map(|a| (domain.upper[a] - domain.lower[a]) / cells[a] as f64)
            .collect();
        Ok(Self {
            domain,
            cells: cells.to_vec(),
            spacing,
        })
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> DomainKind {
        self.domain.kind
    }

    pub fn axes(&self) -> usize {
        self.domain.axes()
    }

    pub fn ambient_dim(&self) -> usize {
        self.domain.ambient_dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_along(0)
    }

    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        let nx = self.nodes_along(0);
        (idx % nx, idx / nx)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i == self.cells[axis] {
            self.domain.upper[axis]
        } else {
            self.domain.lower[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.multi_index(idx);
        let x = self.coordinate(0, i);
        let y = if self.axes() > 1 { self.coordinate(1, j) } else { 0.0 };
        [x, y]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.multi_index(idx);
        if i == 0 || i == self.cells[0] {
            return true;
        }
        self.axes() > 1 && (j == 0 || j == self.cells[1])
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&k| self.is_boundary(k)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..self.axes()).all(|a| {
            let tol = 1e-12 * (self.domain.upper[a] - self.domain.lower[a]);
            p[a] >= self.domain.lower[a] - tol && p[a] <= self.domain.upper[a] + tol
        })
    }

    /// Quadrature weight of a node: trapezoid in each axis, times the shell
    /// area factor in radial mode.
    pub fn node_weight(&self, idx: usize) -> f64 {
        let (i, j) = self.multi_index(idx);
        let edge = |axis: usize, k: usize| {
            if k == 0 || k == self.cells[axis] {
                0.5 * self.spacing[axis]
            } else {
                self.spacing[axis]
            }
        };
        match self.kind() {
            DomainKind::Interval => edge(0, i),
            DomainKind::Rectangle => edge(0, i) * edge(1, j),
            DomainKind::Radial => {
                let n = self.ambient_dim();
                let rho = self.coordinate(0, i);
                edge(0, i) * unit_sphere_area(n) * rho.powi(n as i32 - 1)
            }
        }
    }

    /// Volume of one full cell (the largest shell in radial mode).
    pub fn cell_volume(&self) -> f64 {
        match self.kind() {
            DomainKind::Radial => {
                let n = self.ambient_dim();
                self.spacing[0] * unit_sphere_area(n) * self.domain.upper[0].powi(n as i32 - 1)
            }
            _ => self.spacing.iter().product(),
        }
    }

    pub fn stencil(&self, idx: usize) -> Stencil {
        let (i, _) = self.multi_index(idx);
        let ix2 = 1.0 / (self.spacing[0] * self.spacing[0]);
        match self.kind() {
            DomainKind::Interval => Stencil {
                neighbors: [idx + 1, idx - 1, 0, 0],
                weights: [ix2, ix2, 0.0, 0.0],
                len: 2,
            },
            DomainKind::Rectangle => {
                let iy2 = 1.0 / (self.spacing[1] * self.spacing[1]);
                let nx = self.nodes_along(0);
                Stencil {
                    neighbors: [idx + 1, idx - 1, idx + nx, idx - nx],
                    weights: [ix2, ix2, iy2, iy2],
                    len: 4,
                }
            }
            DomainKind::Radial => {
                let rho = self.coordinate(0, i);
                let k = (self.ambient_dim() - 1) as f64 / (2.0 * rho * self.spacing[0]);
                Stencil {
                    neighbors: [idx + 1, idx - 1, 0, 0],
                    weights: [ix2 + k, ix2 - k, 0.0, 0.0],
                    len: 2,
                }
            }
        }
    }

    /// Checks that every interior stencil weight is positive (always true in
    /// Cartesian mode; restricts dx against the inner radius in radial mode).
    pub fn check_monotone_stencil(&self) -> Result<()> {
        if self.kind() != DomainKind::Radial {
            return Ok(());
        }
        let rho = self.coordinate(0, 1);
        let dx = self.spacing[0];
        if (self.ambient_dim() - 1) as f64 * dx >= 2.0 * rho {
            return Err(Error::RadialStencil { dx, rho });
        }
        Ok(())
    }

    /// Largest explicit time step keeping the update monotone:
    /// `dx^2 / (2 * n_axes)` for equal spacing.
    pub fn stability_limit(&self) -> f64 {
        let s: f64 = self.spacing.iter().map(|h| 2.0 / (h * h)).sum();
        1.0 / s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    t: f64,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { grid, values, t })
    }

    pub fn from_fn(grid: Arc<Grid>, t: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let axes = grid.axes();
        let values = (0..grid.node_count())
            .map(|k| f(&grid.point(k)[..axes]))
            .collect();
        Self::new(grid, values, t)
    }

    pub fn constant(grid: Arc<Grid>, t: f64, c: f64) -> Result<Self> {
        let n = grid.node_count();
        Self::new(grid, vec![c; n], t)
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<Grid>, values: Vec<f64>, t: f64) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values, t }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            t: self.t,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature of `|f - g|` with the grid's node weights.
    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok((0..self.values.len())
            .map(|k| self.grid.node_weight(k) * (self.values[k] - other.values[k]).abs())
            .sum())
    }

    /// Writes the field as CSV with header `x[,y],t,value` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let axes = self.grid.axes();
        if axes == 1 {
            writeln!(w, "x,t,value")?;
        } else {
            writeln!(w, "x,y,t,value")?;
        }
        let mut line = String::new();
        for k in 0..self.values.len() {
            line.clear();
            let p = self.grid.point(k);
            for c in p.iter().take(axes) {
                let _ = write!(line, "{c:.16e},");
            }
            let _ = write!(line, "{:.16e},{:.16e}", self.t, self.values[k]);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Centered second-order Laplacian at interior nodes. Boundary nodes carry 0
/// and are identified by `Grid::is_boundary`.
pub fn discrete_laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let v = f.values();
    let out = (0..grid.node_count())
        .map(|k| {
            if grid.is_boundary(k) {
                return 0.0;
            }
            let s = grid.stencil(k);
            (0..s.len)
                .map(|m| s.weights[m] * (v[s.neighbors[m]] - v[k]))
                .sum()
        })
        .collect();
    ScalarField::from_parts_unchecked(grid.clone(), out, f.time())
}

/// Multilinear interpolation; exact at nodes and on affine fields.
pub fn interpolate(f: &ScalarField, x: &[f64]) -> Result<f64> {
    let grid = f.grid();
    if x.len() < grid.axes() || !grid.contains(x) {
        return Err(Error::OutOfDomain { point: x.to_vec() });
    }
    let locate = |axis: usize| {
        let lo = grid.domain().lower()[axis];
        let s = ((x[axis] - lo) / grid.spacing()[axis]).clamp(0.0, grid.cells()[axis] as f64);
        let i = (s.floor() as usize).min(grid.cells()[axis] - 1);
        let node = grid.coordinate(axis, i);
        let w = ((x[axis] - node) / grid.spacing()[axis]).clamp(0.0, 1.0);
        (i, w)
    };
    let v = f.values();
    let (i, wx) = locate(0);
    if grid.axes() == 1 {
        return Ok(lerp(v[i], v[i + 1], wx));
    }
    let (j, wy) = locate(1);
    let a = lerp(v[grid.index(i, j)], v[grid.index(i + 1, j)], wx);
    let b = lerp(v[grid.index(i, j + 1)], v[grid.index(i + 1, j + 1)], wx);
    Ok(lerp(a, b, wy))
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        a + w * (b - a)
    }
}
