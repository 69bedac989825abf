//! The weak-solution integral identity evaluated as a residual on
//! trajectories.
//!
//! For a test function `phi` vanishing on the lateral boundary and at `t = T`,
//!
//! ```text
//! r = int_Q (h phi_t + chi(h) lap phi) - int_{d_L Q} theta d_nu phi + int h0 phi(., 0)
//! ```
//!
//! Space uses two-point Gauss rules per cell applied to the multilinear
//! interpolant of the node values; time uses the trapezoid rule over
//! snapshots.

use crate::enthalpy::chi;
use crate::error::{Error, Result};
use crate::mesh::{unit_sphere_area, DomainKind, Grid};
use crate::quasi::halton;
use crate::stepper::{Snapshot, Trajectory};

pub const MIN_SNAPSHOTS: usize = 20;

/// `16 (x-a)^2 (b-x)^2 / (b-a)^4` on `[a, b]`, zero elsewhere; peak value 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub lo: f64,
    pub hi: f64,
}

impl Bump {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("empty bump support [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Value, first and second derivative. At the support edges, where the
    /// second derivative jumps, it reports the mean of the one-sided limits.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        if x < self.lo || x > self.hi {
            return [0.0; 3];
        }
        let s = 16.0 / (self.hi - self.lo).powi(4);
        let p = x - self.lo;
        let q = self.hi - x;
        let d2 = s * 2.0 * (q * q - 4.0 * p * q + p * p);
        let edge = if p == 0.0 || q == 0.0 { 0.5 } else { 1.0 };
        [s * p * p * q * q, s * 2.0 * p * q * (q - p), edge * d2]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    bumps: Vec<Bump>,
    power: u32,
}

/// A finite linear combination of `psi(x) (1 - t/T)^j` with `psi` a product
/// of per-axis bumps. On radial grids the single axis is the radius and the
/// Laplacian carries the `(n-1)/rho` term.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    terms: Vec<Term>,
    final_time: f64,
    radial_dim: Option<usize>,
    axes: usize,
}

impl TestFunction {
    pub fn zero(grid: &Grid, final_time: f64) -> Self {
        Self {
            terms: Vec::new(),
            final_time,
            radial_dim: radial_dim(grid),
            axes: grid.axes(),
        }
    }

    pub fn separable(grid: &Grid, bumps: Vec<Bump>, power: u32, final_time: f64) -> Result<Self> {
        if bumps.len() != grid.axes() {
            return Err(Error::LengthMismatch {
                expected: grid.axes(),
                got: bumps.len(),
            });
        }
        if power == 0 || !(final_time > 0.0) {
            return Err(Error::InvalidParameter(
                "time factor needs power >= 1 and T > 0".into(),
            ));
        }
        let mut f = Self::zero(grid, final_time);
        f.terms.push(Term {
            coef: 1.0,
            bumps,
            power,
        });
        Ok(f)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut f = self.clone();
        for t in &mut f.terms {
            t.coef *= a;
        }
        f
    }

    /// `self + other`; both must live on the same geometry and horizon.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.final_time != other.final_time
            || self.radial_dim != other.radial_dim
            || self.axes != other.axes
        {
            return Err(Error::InvalidParameter(
                "test functions on different geometries".into(),
            ));
        }
        let mut f = self.clone();
        f.terms.extend(other.terms.iter().cloned());
        Ok(f)
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    fn eta(&self, power: u32, t: f64) -> (f64, f64) {
        let s = (1.0 - t / self.final_time).max(0.0);
        let j = power as i32;
        (s.powi(j), -(power as f64) / self.final_time * s.powi(j - 1))
    }

    /// Spatial factor of one term: value, gradient, Laplacian.
    fn psi(&self, term: &Term, x: &[f64]) -> (f64, [f64; 2], f64) {
        let e: Vec<[f64; 3]> = term.bumps.iter().zip(x).map(|(b, &xi)| b.eval(xi)).collect();
        if e.len() == 1 {
            let mut lap = e[0][2];
            if let Some(n) = self.radial_dim {
                lap += (n as f64 - 1.0) / x[0] * e[0][1];
            }
            (e[0][0], [e[0][1], 0.0], lap)
        } else {
            (
                e[0][0] * e[1][0],
                [e[0][1] * e[1][0], e[0][0] * e[1][1]],
                e[0][2] * e[1][0] + e[0][0] * e[1][2],
            )
        }
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coef * self.psi(term, x).0 * self.eta(term.power, t).0)
            .sum()
    }

    /// `(phi, phi_t, lap phi, grad phi)` at one point.
    pub fn jet(&self, x: &[f64], t: f64) -> (f64, f64, f64, [f64; 2]) {
        let mut out = (0.0, 0.0, 0.0, [0.0; 2]);
        for term in &self.terms {
            let (p, g, l) = self.psi(term, x);
            let (e, de) = self.eta(term.power, t);
            out.0 += term.coef * p * e;
            out.1 += term.coef * p * de;
            out.2 += term.coef * l * e;
            out.3[0] += term.coef * g[0] * e;
            out.3[1] += term.coef * g[1] * e;
        }
        out
    }

    /// Smallest value over `count` Halton points of the space-time box.
    pub fn sampled_minimum(&self, grid: &Grid, count: usize) -> (f64, Vec<f64>, f64) {
        let axes = grid.axes();
        let lo = grid.domain().lower();
        let hi = grid.domain().upper();
        let mut best = (f64::INFINITY, Vec::new(), 0.0);
        for p in halton(count, axes + 1) {
            let x: Vec<f64> = (0..axes).map(|a| lo[a] + p[a] * (hi[a] - lo[a])).collect();
            let t = p[axes] * self.final_time;
            let v = self.value(&x, t);
            if v < best.0 {
                best = (v, x, t);
            }
        }
        best
    }
}

fn radial_dim(grid: &Grid) -> Option<usize> {
    (grid.kind() == DomainKind::Radial).then(|| grid.ambient_dim())
}

/// Quadrature points with their measure and the interpolation weights of
/// the node values that define the field there.
struct Rule {
    nodes: Vec<Vec<(usize, f64)>>,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    normals: Vec<[f64; 2]>,
}

impl Rule {
    fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            points: Vec::new(),
            weights: Vec::new(),
            normals: Vec::new(),
        }
    }

    fn push(&mut self, nodes: Vec<(usize, f64)>, point: [f64; 2], weight: f64, normal: [f64; 2]) {
        self.nodes.push(nodes);
        self.points.push(point);
        self.weights.push(weight);
        self.normals.push(normal);
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn interp(&self, c: usize, v: &[f64]) -> f64 {
        self.nodes[c].iter().map(|&(k, w)| w * v[k]).sum()
    }
}

/// Two-point Gauss abscissae on `[0, 1]`.
const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

fn cell_rule(grid: &Grid) -> Rule {
    let mut r = Rule::empty();
    let dx = grid.spacing()[0];
    match grid.kind() {
        DomainKind::Interval | DomainKind::Radial => {
            let radial = radial_dim(grid);
            for i in 0..grid.cells()[0] {
                let x0 = grid.coordinate(0, i);
                for g in GAUSS {
                    let x = x0 + g * dx;
                    let w = match radial {
                        Some(n) => 0.5 * dx * unit_sphere_area(n) * x.powi(n as i32 - 1),
                        None => 0.5 * dx,
                    };
                    r.push(vec![(i, 1.0 - g), (i + 1, g)], [x, 0.0], w, [0.0; 2]);
                }
            }
        }
        DomainKind::Rectangle => {
            let dy = grid.spacing()[1];
            for j in 0..grid.cells()[1] {
                for i in 0..grid.cells()[0] {
                    let (x0, y0) = (grid.coordinate(0, i), grid.coordinate(1, j));
                    for gy in GAUSS {
                        for gx in GAUSS {
                            let ids = vec![
                                (grid.index(i, j), (1.0 - gx) * (1.0 - gy)),
                                (grid.index(i + 1, j), gx * (1.0 - gy)),
                                (grid.index(i, j + 1), (1.0 - gx) * gy),
                                (grid.index(i + 1, j + 1), gx * gy),
                            ];
                            let p = [x0 + gx * dx, y0 + gy * dy];
                            r.push(ids, p, 0.25 * dx * dy, [0.0; 2]);
                        }
                    }
                }
            }
        }
    }
    r
}

fn lateral_rule(grid: &Grid) -> Rule {
    let mut r = Rule::empty();
    let lo = grid.domain().lower();
    let hi = grid.domain().upper();
    let last = grid.node_count() - 1;
    match grid.kind() {
        DomainKind::Interval => {
            r.push(vec![(0, 1.0)], [lo[0], 0.0], 1.0, [-1.0, 0.0]);
            r.push(vec![(last, 1.0)], [hi[0], 0.0], 1.0, [1.0, 0.0]);
        }
        DomainKind::Radial => {
            let n = grid.ambient_dim() as i32;
            let s = unit_sphere_area(grid.ambient_dim());
            r.push(vec![(0, 1.0)], [lo[0], 0.0], s * lo[0].powi(n - 1), [-1.0, 0.0]);
            r.push(vec![(last, 1.0)], [hi[0], 0.0], s * hi[0].powi(n - 1), [1.0, 0.0]);
        }
        DomainKind::Rectangle => {
            let (cx, cy) = (grid.cells()[0], grid.cells()[1]);
            let (dx, dy) = (grid.spacing()[0], grid.spacing()[1]);
            for i in 0..cx {
                let x0 = grid.coordinate(0, i);
                for g in GAUSS {
                    let x = x0 + g * dx;
                    let edge = |j: usize| vec![(grid.index(i, j), 1.0 - g), (grid.index(i + 1, j), g)];
                    r.push(edge(0), [x, lo[1]], 0.5 * dx, [0.0, -1.0]);
                    r.push(edge(cy), [x, hi[1]], 0.5 * dx, [0.0, 1.0]);
                }
            }
            for j in 0..cy {
                let y0 = grid.coordinate(1, j);
                for g in GAUSS {
                    let y = y0 + g * dy;
                    let edge = |i: usize| vec![(grid.index(i, j), 1.0 - g), (grid.index(i, j + 1), g)];
                    r.push(edge(0), [lo[0], y], 0.5 * dy, [-1.0, 0.0]);
                    r.push(edge(cx), [hi[0], y], 0.5 * dy, [1.0, 0.0]);
                }
            }
        }
    }
    r
}

/// Residual of the weak identity for `phi` over the trajectory.
pub fn weak_residual(traj: &Trajectory, phi: &TestFunction) -> Result<f64> {
    if traj.len() < MIN_SNAPSHOTS {
        return Err(Error::TooFewSnapshots {
            needed: MIN_SNAPSHOTS,
            got: traj.len(),
        });
    }
    if phi.terms.is_empty() {
        return Ok(0.0);
    }
    let grid = traj.grid();
    let cells = cell_rule(grid);
    let lateral = lateral_rule(grid);
    let axes = grid.axes();

    let density = |s: &Snapshot| -> f64 {
        let t = s.time();
        let h = s.h.values();
        let u: Vec<f64> = h.iter().map(|&v| chi(v)).collect();
        let mut sum = 0.0;
        for c in 0..cells.len() {
            let (_, pt, lap, _) = phi.jet(&cells.points[c][..axes], t);
            sum += cells.weights[c] * (cells.interp(c, h) * pt + cells.interp(c, &u) * lap);
        }
        for c in 0..lateral.len() {
            let (_, _, _, g) = phi.jet(&lateral.points[c][..axes], t);
            let nu = lateral.normals[c];
            sum -= lateral.weights[c] * lateral.interp(c, &u) * (g[0] * nu[0] + g[1] * nu[1]);
        }
        sum
    };

    let snaps = traj.snapshots();
    let mut total = 0.0;
    let mut prev = density(&snaps[0]);
    for w in snaps.windows(2) {
        let next = density(&w[1]);
        total += 0.5 * (w[1].time() - w[0].time()) * (prev + next);
        prev = next;
    }
    let h0 = snaps[0].h.values();
    let t0 = snaps[0].time();
    for c in 0..cells.len() {
        total += cells.weights[c] * cells.interp(c, h0) * phi.value(&cells.points[c][..axes], t0);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sub,
    Super,
}

impl Side {
    /// Sub: `r >= -tol`; super: `r <= tol`.
    pub fn holds(self, residual: f64, tol: f64) -> bool {
        match self {
            Side::Sub => residual >= -tol,
            Side::Super => residual <= tol,
        }
    }
}

pub const NEGATIVITY_SAMPLES: usize = 1000;

/// Same functional as [`weak_residual`], for nonnegative `phi` only.
pub fn weak_inequality_residual(traj: &Trajectory, phi: &TestFunction, _side: Side) -> Result<f64> {
    let (min, point, t) = phi.sampled_minimum(traj.grid(), NEGATIVITY_SAMPLES);
    if min < 0.0 {
        return Err(Error::NegativeTestFunction {
            point,
            t,
            value: min,
        });
    }
    weak_residual(traj, phi)
}

/// `count` bumps cycling through the supports (whole domain, lower 60%,
/// upper 60% along every axis), with time powers `j = 1, 1, 1, 2, 2, 2, ...`.
pub fn default_test_basis(grid: &Grid, count: usize, final_time: f64) -> Result<Vec<TestFunction>> {
    let lo = grid.domain().lower();
    let hi = grid.domain().upper();
    let axes = grid.axes();
    (0..count)
        .map(|i| {
            let bumps = (0..axes)
                .map(|a| {
                    let len = hi[a] - lo[a];
                    match i % 3 {
                        0 => Bump::new(lo[a], hi[a]),
                        1 => Bump::new(lo[a], lo[a] + 0.6 * len),
                        _ => Bump::new(hi[a] - 0.6 * len, hi[a]),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            TestFunction::separable(grid, bumps, (i / 3 + 1) as u32, final_time)
        })
        .collect()
}

/// Residuals over a basis, evaluated concurrently.
pub fn basis_residuals(traj: &Trajectory, basis: &[TestFunction]) -> Result<Vec<f64>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = basis
            .iter()
            .map(|phi| s.spawn(move || weak_residual(traj, phi)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("residual worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enthalpy::{EnthalpyField, Selection};
    use crate::mesh::Domain;
    use std::sync::Arc;

    fn steady(grid: Arc<Grid>, c: f64, slices: usize, t_end: f64) -> Trajectory {
        let times: Vec<f64> = (0..=slices).map(|k| t_end * k as f64 / slices as f64).collect();
        Trajectory::from_temperature_fn(grid, &times, Selection::Maximal, |_, _| c).unwrap()
    }

    #[test]
    fn bump_shape() {
        let b = Bump::new(0.0, 1.0).unwrap();
        assert_eq!(b.eval(0.5)[0], 1.0);
        assert_eq!(b.eval(-0.1), [0.0; 3]);
        // second derivative jumps from 0 to 32 at the edge
        assert_eq!(b.eval(0.0), [0.0, 0.0, 16.0]);
        assert_eq!(b.eval(1.2), [0.0; 3]);
        // derivative by finite differences
        let x = 0.3;
        let e = 1e-5;
        let fd = (b.eval(x + e)[0] - b.eval(x - e)[0]) / (2.0 * e);
        assert!((fd - b.eval(x)[1]).abs() < 1e-8);
        let fd2 = (b.eval(x + e)[1] - b.eval(x - e)[1]) / (2.0 * e);
        assert!((fd2 - b.eval(x)[2]).abs() < 1e-6);
    }

    #[test]
    fn zero_function_gives_zero() {
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[20]).unwrap().shared();
        let traj = steady(g.clone(), 0.7, 30, 1.0);
        let z = TestFunction::zero(&g, 1.0);
        assert_eq!(weak_residual(&traj, &z).unwrap(), 0.0);
        assert_eq!(weak_inequality_residual(&traj, &z, Side::Super).unwrap(), 0.0);
    }

    #[test]
    fn steady_state_residual_is_quadrature_error() {
        let g = Grid::new(Domain::rectangle([0.0; 2], [1.0; 2]).unwrap(), &[100, 100])
            .unwrap()
            .shared();
        let traj = steady(g.clone(), 0.7, 100, 1.0);
        for phi in default_test_basis(&g, 6, 1.0).unwrap() {
            let r = weak_residual(&traj, &phi).unwrap();
            assert!(r.abs() <= 1e-3, "{r}");
        }
    }

    /// Independent check of the steady identity for one 1D test function.
    #[test]
    fn steady_identity_by_hand() {
        // phi = 16 x^2 (1-x)^2 (1 - t), h = c = 1.5, T = 1:
        // int_Q c phi_t = -c * 16/30, int c phi(., 0) = c * 16/30, and
        // int psi'' = psi'(1) - psi'(0) = 0. Two-point Gauss is exact on the
        // quadratic psi'', and the first two terms use the same rule for psi,
        // so the sum vanishes to roundoff.
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[20]).unwrap().shared();
        let traj = steady(g.clone(), 1.5, 20, 1.0);
        let phi = TestFunction::separable(&g, vec![Bump::new(0.0, 1.0).unwrap()], 1, 1.0).unwrap();
        let r = weak_residual(&traj, &phi).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }

    #[test]
    fn lateral_term_is_computed() {
        // a bump on [-0.4, 1] has nonzero slope at x = 0; for a constant
        // state the lateral term must cancel the Laplacian term
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[400]).unwrap().shared();
        let traj = steady(g.clone(), 0.8, 200, 1.0);
        let phi = TestFunction::separable(&g, vec![Bump::new(-0.4, 1.0).unwrap()], 1, 1.0).unwrap();
        let r = weak_residual(&traj, &phi).unwrap();
        assert!(r.abs() < 1e-4, "{r}");
    }

    #[test]
    fn linearity() {
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[50]).unwrap().shared();
        let times: Vec<f64> = (0..=40).map(|k| 0.01 * k as f64).collect();
        let traj = Trajectory::from_temperature_fn(g.clone(), &times, Selection::Maximal, |x, t| {
            (x[0] - 0.3 - t).sin()
        })
        .unwrap();
        let b = default_test_basis(&g, 2, 0.4).unwrap();
        let r1 = weak_residual(&traj, &b[0]).unwrap();
        let r2 = weak_residual(&traj, &b[1]).unwrap();
        let combo = b[0].scaled(2.5).plus(&b[1].scaled(-0.75)).unwrap();
        let r = weak_residual(&traj, &combo).unwrap();
        assert!((r - (2.5 * r1 - 0.75 * r2)).abs() <= 1e-14 * (1.0 + r.abs()));
    }

    #[test]
    fn rejects_negative_and_short() {
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[20]).unwrap().shared();
        let traj = steady(g.clone(), 0.7, 30, 1.0);
        let phi = TestFunction::separable(&g, vec![Bump::new(0.0, 1.0).unwrap()], 1, 1.0)
            .unwrap()
            .scaled(-1.0);
        assert!(matches!(
            weak_inequality_residual(&traj, &phi, Side::Sub),
            Err(Error::NegativeTestFunction { .. })
        ));
        let short = steady(g.clone(), 0.7, 5, 1.0);
        assert!(matches!(
            weak_residual(&short, &phi),
            Err(Error::TooFewSnapshots { needed: 20, got: 6 })
        ));
    }

    #[test]
    fn radial_steady_state() {
        let g = Grid::new(Domain::radial(0.5, 1.5, 3).unwrap(), &[200]).unwrap().shared();
        let traj = steady(g.clone(), 0.3, 100, 1.0);
        for phi in default_test_basis(&g, 3, 1.0).unwrap() {
            let r = weak_residual(&traj, &phi).unwrap();
            assert!(r.abs() < 1e-4, "{r}");
        }
    }

    #[test]
    fn supercaloric_field_has_nonpositive_residual() {
        // h = 1 + t is liquid and h_t - lap h = 1 > 0
        let g = Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[200]).unwrap().shared();
        let snaps = (0..=50)
            .map(|k| {
                let t = 0.02 * k as f64;
                Snapshot {
                    step: k,
                    h: EnthalpyField::from_temperature_fn(g.clone(), t, Selection::Maximal, |_| {
                        1.0 + t
                    })
                    .unwrap(),
                }
            })
            .collect();
        let traj = Trajectory::from_snapshots(snaps, 0.02).unwrap();
        for phi in default_test_basis(&g, 6, 1.0).unwrap() {
            let r = weak_inequality_residual(&traj, &phi, Side::Super).unwrap();
            assert!(r < 0.0 && Side::Super.holds(r, 0.0), "{r}");
            assert!(!Side::Sub.holds(r, 1e-6));
        }
    }
}
