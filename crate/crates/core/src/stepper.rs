//! Time integration of `h_t = lap chi(h)` with Dirichlet temperature data.
//!
//! Both schemes are written so that each nodal update is a composition of
//! nondecreasing, correctly rounded operations in the old values. Ordered
//! data therefore stay ordered bit-for-bit under the explicit scheme.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::enthalpy::{chi, chi_inverse, EnthalpyField, Selection};
use crate::error::{Error, Result};
use crate::mesh::{Domain, DomainKind, Grid, ScalarField};

type BoundaryFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Boundary temperature `theta(x, t)`.
#[derive(Clone)]
pub struct BoundaryData(Arc<BoundaryFn>);

impl BoundaryData {
    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.0)(x, t)
    }

    /// `theta + shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let inner = self.clone();
        Self::new(move |x, t| inner.eval(x, t) + shift)
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Explicit,
    Implicit,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    h0: EnthalpyField,
    theta: BoundaryData,
    final_time: f64,
    boundary_selection: Selection,
}

pub const COMPATIBILITY_TOL: f64 = 1e-12;

impl ProblemSpec {
    /// Checks `chi(h0) = theta(., 0)` at every boundary node.
    pub fn new(h0: EnthalpyField, theta: BoundaryData, final_time: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        let grid = h0.grid().clone();
        grid.check_monotone_stencil()?;
        let axes = grid.axes();
        for k in grid.boundary_nodes() {
            let p = grid.point(k);
            let th = theta.eval(&p[..axes], 0.0);
            let c = chi(h0.values()[k]);
            if !((c - th).abs() <= COMPATIBILITY_TOL) {
                return Err(Error::Incompatible {
                    node: k,
                    point: p[..axes].to_vec(),
                    chi_h0: c,
                    theta: th,
                });
            }
        }
        Ok(Self {
            h0,
            theta,
            final_time,
            boundary_selection: Selection::Maximal,
        })
    }

    /// Enthalpy selection used when the boundary temperature is exactly zero.
    pub fn with_boundary_selection(mut self, s: Selection) -> Self {
        self.boundary_selection = s;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.h0.grid()
    }

    pub fn h0(&self) -> &EnthalpyField {
        &self.h0
    }

    pub fn theta(&self) -> &BoundaryData {
        &self.theta
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn boundary_selection(&self) -> Selection {
        self.boundary_selection
    }
}

/// Sets boundary nodes to `chi_inverse(theta(x, t), selection)`.
pub fn apply_boundary(
    h: &EnthalpyField,
    theta: &BoundaryData,
    t: f64,
    selection: Selection,
) -> EnthalpyField {
    let mut values = h.values().to_vec();
    set_boundary(h.grid(), &mut values, theta, t, selection);
    EnthalpyField::new(ScalarField::from_parts_unchecked(h.grid().clone(), values, t))
}

fn set_boundary(grid: &Grid, v: &mut [f64], theta: &BoundaryData, t: f64, s: Selection) {
    let axes = grid.axes();
    let nx = grid.nodes_along(0);
    let mut put = |k: usize| {
        let p = grid.point(k);
        v[k] = chi_inverse(theta.eval(&p[..axes], t), s);
    };
    if axes == 1 {
        put(0);
        put(nx - 1);
    } else {
        for k in 0..grid.node_count() {
            if grid.is_boundary(k) {
                put(k);
            }
        }
    }
}

/// `h - c*chi(h)` evaluated branchwise so that it is nondecreasing in `h`
/// after rounding whenever `s = 1 - c >= 0`.
#[inline]
fn self_term(h: f64, s: f64) -> f64 {
    if h > 0.0 {
        s * h
    } else if h >= -1.0 {
        h
    } else {
        s * (h + 1.0) - 1.0
    }
}

/// Inverse of `z + c*chi(z)`.
#[inline]
fn solve_node(rhs: f64, c: f64) -> f64 {
    if rhs > 0.0 {
        rhs / (1.0 + c)
    } else if rhs >= -1.0 {
        rhs
    } else {
        (rhs - c) / (1.0 + c)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTimeStep(dt))
    }
}

/// Forward Euler step; boundary data are imposed at `t + dt`.
pub fn step_explicit(
    h: &EnthalpyField,
    dt: f64,
    theta: &BoundaryData,
    selection: Selection,
) -> Result<EnthalpyField> {
    check_dt(dt)?;
    let grid = h.grid();
    let limit = grid.stability_limit();
    if dt > limit {
        return Err(Error::Cfl { dt, limit });
    }
    grid.check_monotone_stencil()?;
    let old = h.values();
    let u: Vec<f64> = old.iter().map(|&v| chi(v)).collect();
    let mut new = old.to_vec();
    for k in 0..grid.node_count() {
        if grid.is_boundary(k) {
            continue;
        }
        let st = grid.stencil(k);
        let mut c = 0.0;
        let mut flux = 0.0;
        for m in 0..st.len {
            let lam = dt * st.weights[m];
            c += lam;
            flux += lam * u[st.neighbors[m]];
        }
        new[k] = self_term(old[k], (1.0 - c).max(0.0)) + flux;
    }
    let t = h.time() + dt;
    set_boundary(grid, &mut new, theta, t, selection);
    Ok(EnthalpyField::new(ScalarField::from_parts_unchecked(
        grid.clone(),
        new,
        t,
    )))
}

#[derive(Debug, Clone, Copy)]
pub struct GaussSeidel {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GaussSeidel {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

/// Backward Euler step solved by red-black nonlinear Gauss-Seidel.
pub fn step_implicit(
    h: &EnthalpyField,
    dt: f64,
    theta: &BoundaryData,
    selection: Selection,
) -> Result<EnthalpyField> {
    step_implicit_with(h, dt, theta, selection, GaussSeidel::default())
}

pub fn step_implicit_with(
    h: &EnthalpyField,
    dt: f64,
    theta: &BoundaryData,
    selection: Selection,
    gs: GaussSeidel,
) -> Result<EnthalpyField> {
    check_dt(dt)?;
    let grid = h.grid();
    grid.check_monotone_stencil()?;
    let old = h.values();
    let t = h.time() + dt;
    let mut z = old.to_vec();
    set_boundary(grid, &mut z, theta, t, selection);
    let mut u: Vec<f64> = z.iter().map(|&v| chi(v)).collect();

    let color = |k: usize| {
        let (i, j) = grid.multi_index(k);
        (i + j) % 2
    };
    let interior: [Vec<usize>; 2] = {
        let mut sets = [Vec::new(), Vec::new()];
        for k in 0..grid.node_count() {
            if !grid.is_boundary(k) {
                sets[color(k)].push(k);
            }
        }
        sets
    };

    let mut update = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < gs.max_sweeps {
        sweeps += 1;
        update = 0.0;
        for set in &interior {
            for &k in set {
                let st = grid.stencil(k);
                let mut c = 0.0;
                let mut rhs = old[k];
                for m in 0..st.len {
                    let lam = dt * st.weights[m];
                    c += lam;
                    rhs += lam * u[st.neighbors[m]];
                }
                let zk = solve_node(rhs, c);
                update = f64::max(update, (zk - z[k]).abs());
                z[k] = zk;
                u[k] = chi(zk);
            }
        }
        if update < gs.tol {
            return Ok(EnthalpyField::new(ScalarField::from_parts_unchecked(
                grid.clone(),
                z,
                t,
            )));
        }
    }
    let residual = implicit_residual(grid, old, &z, dt);
    Err(Error::NonConvergence {
        sweeps,
        update,
        residual,
    })
}

/// Max nodal residual of `z - dt*lap chi(z) - h_old` over interior nodes.
pub fn implicit_residual(grid: &Grid, old: &[f64], z: &[f64], dt: f64) -> f64 {
    let mut r: f64 = 0.0;
    for k in 0..grid.node_count() {
        if grid.is_boundary(k) {
            continue;
        }
        let st = grid.stencil(k);
        let lap: f64 = (0..st.len)
            .map(|m| st.weights[m] * (chi(z[st.neighbors[m]]) - chi(z[k])))
            .sum();
        r = r.max((z[k] - dt * lap - old[k]).abs());
    }
    r
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub scheme: Scheme,
    /// Time step; defaults to `cfl * stability limit`.
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Snapshot every this many steps; defaults to `max(1, T/(100 dt))`.
    pub snapshot_every: Option<usize>,
    pub gauss_seidel: GaussSeidel,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Explicit,
            dt: None,
            cfl: 0.9,
            snapshot_every: None,
            gauss_seidel: GaussSeidel::default(),
        }
    }
}

impl SolveOptions {
    pub fn explicit() -> Self {
        Self::default()
    }

    pub fn implicit(dt: f64) -> Self {
        Self {
            scheme: Scheme::Implicit,
            dt: Some(dt),
            ..Self::default()
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_snapshot_every(mut self, k: usize) -> Self {
        self.snapshot_every = Some(k.max(1));
        self
    }

    pub fn time_step(&self, grid: &Grid) -> f64 {
        self.dt.unwrap_or(self.cfl * grid.stability_limit())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub h: EnthalpyField,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.h.time()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Arc<Grid>,
    snapshots: Vec<Snapshot>,
    dt: f64,
    steps: usize,
}

impl Trajectory {
    /// Builds a trajectory from given snapshots; times must increase strictly
    /// and start at 0.
    pub fn from_snapshots(snapshots: Vec<Snapshot>, dt: f64) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or(Error::TooFewSnapshots { needed: 1, got: 0 })?;
        let grid = first.h.grid().clone();
        if first.time().abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "trajectory must start at t = 0, got {}",
                first.time()
            )));
        }
        for w in snapshots.windows(2) {
            if !(w[1].time() > w[0].time()) || w[1].h.grid() != &grid {
                return Err(Error::InvalidParameter(
                    "snapshot times must increase on a common grid".into(),
                ));
            }
        }
        let steps = snapshots.last().map(|s| s.step).unwrap_or(0);
        Ok(Self {
            grid,
            snapshots,
            dt,
            steps,
        })
    }

    /// Samples a closed-form temperature at the given times.
    pub fn from_temperature_fn(
        grid: Arc<Grid>,
        times: &[f64],
        selection: Selection,
        u: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let mut snaps = Vec::with_capacity(times.len());
        for (step, &t) in times.iter().enumerate() {
            let h = EnthalpyField::from_temperature_fn(grid.clone(), t, selection, |x| u(x, t))?;
            snaps.push(Snapshot { step, h });
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Self::from_snapshots(snaps, dt)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshots_mut(&mut self) -> &mut [Snapshot] {
        &mut self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots.last().map(|s| s.time()).unwrap_or(0.0)
    }

    pub fn last(&self) -> &EnthalpyField {
        &self.snapshots.last().expect("trajectory is nonempty").h
    }

    /// Nominal solver time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn temperatures(&self) -> Vec<ScalarField> {
        self.snapshots.iter().map(|s| s.h.temperature()).collect()
    }

    /// Largest gap between consecutive snapshot times.
    pub fn max_snapshot_interval(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| w[1].time() - w[0].time())
            .fold(0.0, f64::max)
    }

    /// Writes `snapshot_NNNNNN.csv` files holding enthalpy, an index
    /// `snapshots.csv` (`step,t,path`), and `grid.csv` describing the grid.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = BufWriter::new(fs::File::create(dir.join("snapshots.csv"))?);
        writeln!(index, "step,t,path")?;
        for s in &self.snapshots {
            let name = format!("snapshot_{:06}.csv", s.step);
            let f = BufWriter::new(fs::File::create(dir.join(&name))?);
            s.h.field().write_csv(f)?;
            writeln!(index, "{},{:.16e},{}", s.step, s.time(), name)?;
        }
        index.flush()?;
        write_grid(&self.grid, &dir.join("grid.csv"))?;
        Ok(())
    }

    /// Reads a directory written by [`Trajectory::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let grid = read_grid(&dir.join("grid.csv"))?.shared();
        let index = fs::read_to_string(dir.join("snapshots.csv"))?;
        let mut snaps = Vec::new();
        for (ln, line) in index.lines().enumerate().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Io(format!("snapshots.csv line {}: malformed", ln + 1)));
            }
            let step: usize = parts[0]
                .parse()
                .map_err(|_| Error::Io(format!("snapshots.csv line {}: bad step", ln + 1)))?;
            let t: f64 = parts[1]
                .parse()
                .map_err(|_| Error::Io(format!("snapshots.csv line {}: bad time", ln + 1)))?;
            let path = PathBuf::from(parts[2]);
            let values = read_values(&dir.join(path), grid.axes())?;
            let field = ScalarField::new(grid.clone(), values, t)?;
            snaps.push(Snapshot {
                step,
                h: EnthalpyField::new(field),
            });
        }
        let dt = if snaps.len() > 1 {
            (snaps[1].time() - snaps[0].time()) / (snaps[1].step - snaps[0].step).max(1) as f64
        } else {
            0.0
        };
        Self::from_snapshots(snaps, dt)
    }

    /// Legacy ASCII VTK structured points of the temperature, one file per
    /// snapshot (2D grids only).
    pub fn write_vtk(&self, dir: &Path) -> Result<()> {
        if self.grid.kind() != DomainKind::Rectangle {
            return Err(Error::InvalidParameter("VTK export needs a 2D grid".into()));
        }
        fs::create_dir_all(dir)?;
        let g = &self.grid;
        for s in &self.snapshots {
            let mut w = BufWriter::new(fs::File::create(
                dir.join(format!("snapshot_{:06}.vtk", s.step)),
            )?);
            writeln!(w, "# vtk DataFile Version 3.0")?;
            writeln!(w, "temperature t={:.16e}", s.time())?;
            writeln!(w, "ASCII")?;
            writeln!(w, "DATASET STRUCTURED_POINTS")?;
            writeln!(w, "DIMENSIONS {} {} 1", g.nodes_along(0), g.nodes_along(1))?;
            let lo = g.domain().lower();
            writeln!(w, "ORIGIN {:.16e} {:.16e} 0", lo[0], lo[1])?;
            writeln!(w, "SPACING {:.16e} {:.16e} 1", g.spacing()[0], g.spacing()[1])?;
            writeln!(w, "POINT_DATA {}", g.node_count())?;
            writeln!(w, "SCALARS u double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in s.h.values() {
                writeln!(w, "{:.16e}", chi(*v))?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn write_grid(grid: &Grid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "kind,ambient_dim,axis,lower,upper,cells")?;
    let kind = match grid.kind() {
        DomainKind::Interval => "interval",
        DomainKind::Rectangle => "rectangle",
        DomainKind::Radial => "radial",
    };
    for a in 0..grid.axes() {
        writeln!(
            w,
            "{kind},{},{a},{:.16e},{:.16e},{}",
            grid.ambient_dim(),
            grid.domain().lower()[a],
            grid.domain().upper()[a],
            grid.cells()[a]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn read_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path)?;
    let bad = |m: &str| Error::Io(format!("{}: {m}", path.display()));
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    if rows.is_empty() || rows.iter().any(|r| r.len() != 6) {
        return Err(bad("malformed grid description"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
    let cells = |s: &str| s.parse::<usize>().map_err(|_| bad("bad cell count"));
    let dim: usize = rows[0][1].parse().map_err(|_| bad("bad dimension"))?;
    let domain = match rows[0][0] {
        "interval" => Domain::interval(num(rows[0][3])?, num(rows[0][4])?)?,
        "radial" => Domain::radial(num(rows[0][3])?, num(rows[0][4])?, dim)?,
        "rectangle" if rows.len() == 2 => Domain::rectangle(
            [num(rows[0][3])?, num(rows[1][3])?],
            [num(rows[0][4])?, num(rows[1][4])?],
        )?,
        _ => return Err(bad("unknown grid kind")),
    };
    let counts: Vec<usize> = rows.iter().map(|r| cells(r[5])).collect::<Result<_>>()?;
    Grid::new(domain, &counts)
}

fn read_values(path: &Path, axes: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .enumerate()
        .map(|(ln, l)| {
            l.split(',')
                .nth(axes + 1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Io(format!("{} line {}: bad value", path.display(), ln + 2)))
        })
        .collect()
}

/// Integrates from 0 to `T`; the last step is shortened to land on `T`.
pub fn solve(spec: &ProblemSpec, opts: &SolveOptions) -> Result<Trajectory> {
    let grid = spec.grid();
    let dt = opts.time_step(grid);
    check_dt(dt)?;
    let t_end = spec.final_time();
    let n_steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let every = opts
        .snapshot_every
        .unwrap_or_else(|| ((t_end / (100.0 * dt)).floor() as usize).max(1));
    let sel = spec.boundary_selection();
    let mut h = apply_boundary(spec.h0(), spec.theta(), 0.0, sel);
    h.field_mut().set_time(0.0);
    let mut snaps = vec![Snapshot {
        step: 0,
        h: h.clone(),
    }];
    for step in 1..=n_steps {
        let t_prev = h.time();
        let target = if step == n_steps { t_end } else { step as f64 * dt };
        let this_dt = target - t_prev;
        let next = match opts.scheme {
            Scheme::Explicit => step_explicit(&h, this_dt, spec.theta(), sel),
            Scheme::Implicit => {
                step_implicit_with(&h, this_dt, spec.theta(), sel, opts.gauss_seidel)
            }
        };
        h = next.map_err(|e| Error::StepFailed {
            t: t_prev,
            source: Box::new(e),
        })?;
        h.field_mut().set_time(target);
        if step % every == 0 || step == n_steps {
            snaps.push(Snapshot {
                step,
                h: h.clone(),
            });
        }
    }
    let mut traj = Trajectory::from_snapshots(snaps, dt)?;
    traj.steps = n_steps;
    Ok(traj)
}

/// Discrete heat flux through the boundary, `sum over interior nodes of
/// weight * lap chi(h)`, which the interior update conserves exactly in 1D.
pub fn interior_heat_content(h: &EnthalpyField) -> f64 {
    let g = h.grid();
    (0..g.node_count())
        .filter(|&k| !g.is_boundary(k))
        .map(|k| g.node_weight(k) * h.values()[k])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(cells: usize) -> Arc<Grid> {
        Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[cells])
            .unwrap()
            .shared()
    }

    fn field(g: &Arc<Grid>, f: impl Fn(f64) -> f64) -> EnthalpyField {
        EnthalpyField::new(ScalarField::from_fn(g.clone(), 0.0, |x| f(x[0])).unwrap())
    }

    #[test]
    fn uniform_liquid_is_steady() {
        let g = unit(40);
        let h = field(&g, |_| 0.5);
        let th = BoundaryData::constant(0.5);
        let dt = 0.4 * g.spacing()[0].powi(2);
        let e = step_explicit(&h, dt, &th, Selection::Maximal).unwrap();
        // the monotone splitting rounds once more than the difference form
        assert!(e.values().iter().all(|&v| (v - 0.5).abs() <= 2.0 * f64::EPSILON));
        let i = step_implicit(&h, 10.0 * dt, &th, Selection::Maximal).unwrap();
        assert!(i.values().iter().all(|&v| (v - 0.5).abs() <= 1e-12));
    }

    #[test]
    fn uniform_mushy_is_exactly_steady() {
        let g = unit(40);
        let h = field(&g, |_| -0.5);
        let th = BoundaryData::constant(0.0);
        let dt = 0.4 * g.spacing()[0].powi(2);
        let e = step_explicit(&h, dt, &th, Selection::Minimal).unwrap();
        for k in 1..40 {
            assert_eq!(e.values()[k], -0.5);
        }
    }

    #[test]
    fn boundary_values() {
        let g = unit(8);
        let h = field(&g, |_| 1.0);
        let b = apply_boundary(&h, &BoundaryData::constant(-0.3), 0.0, Selection::Maximal);
        assert_eq!(b.values()[0], -1.3);
        let b = apply_boundary(&h, &BoundaryData::constant(0.3), 0.0, Selection::Maximal);
        assert_eq!(b.values()[8], 0.3);
        let b = apply_boundary(&h, &BoundaryData::constant(0.0), 0.0, Selection::Maximal);
        assert_eq!(b.values()[0], 0.0);
        let b = apply_boundary(&h, &BoundaryData::constant(0.0), 0.0, Selection::Minimal);
        assert_eq!(b.values()[0], -1.0);
    }

    #[test]
    fn cfl_rejected() {
        let g = unit(10);
        let h = field(&g, |_| 0.5);
        let dt = 0.51 * g.spacing()[0].powi(2);
        assert!(matches!(
            step_explicit(&h, dt, &BoundaryData::constant(0.5), Selection::Maximal),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn implicit_matches_explicit_to_second_order() {
        // one step from sin(pi x) + 2 with matching boundary data
        let diff = |cells: usize, dt: f64| {
            let g = unit(cells);
            let h = field(&g, |x| (std::f64::consts::PI * x).sin() + 2.0);
            let th = BoundaryData::constant(2.0);
            let e = step_explicit(&h, dt, &th, Selection::Maximal).unwrap();
            let i = step_implicit(&h, dt, &th, Selection::Maximal).unwrap();
            e.values()
                .iter()
                .zip(i.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let d1 = diff(50, 1e-4);
        let d2 = diff(50, 5e-5);
        let ratio = d1 / d2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn implicit_mass_balance() {
        let g = unit(50);
        let h = field(&g, |x| 2.0 * x - 0.7 + 0.3 * (7.0 * x).sin());
        let u0 = chi(h.values()[0]);
        let u1 = chi(h.values()[50]);
        let th = BoundaryData::new(move |x, _| if x[0] < 0.5 { u0 } else { u1 });
        let dt = 1e-3;
        let gs = GaussSeidel {
            tol: 1e-14,
            max_sweeps: 100_000,
        };
        let h1 = step_implicit_with(&h, dt, &th, Selection::Maximal, gs).unwrap();
        let dx = g.spacing()[0];
        let u: Vec<f64> = h1.values().iter().map(|&v| chi(v)).collect();
        let flux = (u[50] - u[49]) / dx - (u[1] - u[0]) / dx;
        let change: f64 = (1..50).map(|k| (h1.values()[k] - h.values()[k]) * dx).sum();
        assert!(
            (change - dt * flux).abs() <= 1e-8 * (dt * flux).abs(),
            "{change} vs {}",
            dt * flux
        );
    }

    #[test]
    fn solve_lands_on_final_time() {
        let g = unit(20);
        let h0 = EnthalpyField::from_temperature_fn(g.clone(), 0.0, Selection::Maximal, |x| {
            1.0 - 2.0 * x[0]
        })
        .unwrap();
        let th = BoundaryData::new(|x, _| 1.0 - 2.0 * x[0]);
        let spec = ProblemSpec::new(h0, th, 0.0123).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit().with_dt(1e-3)).unwrap();
        assert_eq!(traj.final_time(), 0.0123);
        assert_eq!(traj.times()[0], 0.0);
        assert_eq!(traj.steps(), 13);
        let times = traj.times();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn incompatible_data_rejected() {
        let g = unit(10);
        let h0 = field(&g, |_| 0.5);
        let err = ProblemSpec::new(h0, BoundaryData::constant(0.4), 1.0).unwrap_err();
        assert!(matches!(err, Error::Incompatible { node: 0, .. }));
    }

    #[test]
    fn nonconvergence_reported() {
        let g = unit(40);
        let h = field(&g, |x| (6.0 * x).sin());
        let th = BoundaryData::new(|x, _| (6.0 * x[0]).sin());
        let gs = GaussSeidel {
            tol: 1e-14,
            max_sweeps: 3,
        };
        let err = step_implicit_with(&h, 1.0, &th, Selection::Maximal, gs).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { sweeps: 3, .. }));
    }

    #[test]
    fn export_round_trip() {
        let g = unit(10);
        let h0 =
            EnthalpyField::from_temperature_fn(g.clone(), 0.0, Selection::Maximal, |x| x[0] - 0.3)
                .unwrap();
        let th = BoundaryData::new(|x, _| x[0] - 0.3);
        let spec = ProblemSpec::new(h0, th, 0.01).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit().with_snapshot_every(5)).unwrap();
        let dir = std::env::temp_dir().join(format!("stefan_export_{}", std::process::id()));
        traj.write_dir(&dir).unwrap();
        let back = Trajectory::read_dir(&dir).unwrap();
        assert_eq!(back.len(), traj.len());
        for (a, b) in back.snapshots().iter().zip(traj.snapshots()) {
            assert_eq!(a.h.values(), b.h.values());
            assert_eq!(a.time(), b.time());
        }
        let _ = fs::remove_dir_all(&dir);
    }

    fn random_profile(coef: &[f64], x: f64) -> f64 {
        coef.iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * 3.0 * x).sin())
            .sum::<f64>()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn explicit_is_monotone(
            a in proptest::collection::vec(-1.5f64..1.5, 4),
            gap in proptest::collection::vec(0.0f64..0.8, 4),
            shift in 0.0f64..0.5,
        ) {
            let g = unit(40);
            let lo = field(&g, |x| random_profile(&a, x) - 0.5);
            let hi = field(&g, |x| random_profile(&a, x) - 0.5 + shift + random_profile(&gap, x).abs());
            let th_lo = BoundaryData::constant(0.0);
            let dt = 0.9 * g.stability_limit();
            let mut l = lo;
            let mut h = hi;
            for _ in 0..200 {
                let t = l.time();
                l = step_explicit(&l, dt, &th_lo, Selection::Minimal).unwrap();
                h = step_explicit(&h, dt, &th_lo, Selection::Maximal).unwrap();
                prop_assert!(l.time() > t);
                for k in 0..41 {
                    prop_assert!(l.values()[k] <= h.values()[k]);
                }
            }
        }

        #[test]
        fn maximum_principle_and_contraction(
            a in proptest::collection::vec(-1.5f64..1.5, 4),
            b in proptest::collection::vec(-1.5f64..1.5, 4),
        ) {
            let g = unit(40);
            let h1 = field(&g, |x| random_profile(&a, x) * x * (1.0 - x) * 4.0 - 0.2);
            let h2 = field(&g, |x| random_profile(&b, x) * x * (1.0 - x) * 4.0 - 0.2);
            let th = BoundaryData::constant(0.0);
            let dt = 0.9 * g.stability_limit();
            let bound_lo = h1.values().iter().chain(h2.values()).cloned().fold(-1.0, f64::min);
            let bound_hi = h1.values().iter().chain(h2.values()).cloned().fold(0.0, f64::max);
            let d0 = h1.field().l1_distance(h2.field()).unwrap();
            let (mut p, mut q) = (h1, h2);
            for _ in 0..300 {
                p = step_explicit(&p, dt, &th, Selection::Minimal).unwrap();
                q = step_explicit(&q, dt, &th, Selection::Minimal).unwrap();
                for v in p.values().iter().chain(q.values()) {
                    prop_assert!(*v >= bound_lo && *v <= bound_hi);
                }
            }
            let d1 = p.field().l1_distance(q.field()).unwrap();
            prop_assert!(d1 <= d0 * (1.0 + 1e-8) + 1e-15);
        }
    }
}
