//! Sup/inf convolutions, barrier crossing tests on parabolic neighborhoods,
//! the comparison harness, the scaling transform and the maximal/minimal
//! envelopes.

use std::sync::Arc;

use crate::barriers::{Barrier, Kind};
use crate::enthalpy::{chi, chi_inverse, EnthalpyField, Selection};
use crate::error::{Error, Result};
use crate::mesh::{Domain, DomainKind, Grid, ScalarField};
use crate::oracles::ExactSolution;
use crate::stepper::{solve, BoundaryData, ProblemSpec, Snapshot, SolveOptions, Trajectory};

fn threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(16)
}

/// Maps `f` over `0..n` on scoped threads, preserving order.
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let chunk = n.div_ceil(threads()).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|lo| {
                let f = &f;
                s.spawn(move || (lo..(lo + chunk).min(n)).map(f).collect::<Vec<_>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Convolutions

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionVariant {
    /// Sup over the space-time ball.
    Z,
    /// Sup over the space disk.
    U,
    /// Inf over the space-time ball.
    W,
    /// Inf over the space disk.
    V,
}

impl ConvolutionVariant {
    pub fn is_sup(self) -> bool {
        matches!(self, Self::Z | Self::U)
    }

    pub fn is_space_time(self) -> bool {
        matches!(self, Self::Z | Self::W)
    }
}

/// Discrete envelope of a trajectory's temperature over balls of radius `r`,
/// evaluated on grid samples only.
#[derive(Debug, Clone)]
pub struct ConvolutionField {
    grid: Arc<Grid>,
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
    r: f64,
    variant: ConvolutionVariant,
    /// Node offsets with their squared distance.
    offsets: Vec<(isize, isize, f64)>,
}

pub fn convolve(traj: &Trajectory, r: f64, variant: ConvolutionVariant) -> Result<ConvolutionField> {
    let grid = traj.grid().clone();
    if grid.kind() == DomainKind::Radial {
        return Err(Error::InvalidParameter(
            "convolutions are defined on Cartesian grids".into(),
        ));
    }
    let min = 2.0 * grid.max_spacing().max(traj.max_snapshot_interval());
    if !(r >= min) {
        return Err(Error::RadiusTooSmall { r, min });
    }
    let sp = grid.spacing();
    let reach = |a: usize| (r / sp[a] + 1e-9).floor() as isize;
    let (rx, ry) = (reach(0), if grid.axes() > 1 { reach(1) } else { 0 });
    let mut offsets = Vec::new();
    for j in -ry..=ry {
        for i in -rx..=rx {
            let dx = i as f64 * sp[0];
            let dy = if grid.axes() > 1 { j as f64 * sp[1] } else { 0.0 };
            let d2 = dx * dx + dy * dy;
            if d2 <= r * r * (1.0 + 1e-12) {
                offsets.push((i, j, d2));
            }
        }
    }
    Ok(ConvolutionField {
        times: traj.times(),
        samples: traj
            .temperatures()
            .into_iter()
            .map(ScalarField::into_values)
            .collect(),
        grid,
        r,
        variant,
        offsets,
    })
}

impl ConvolutionField {
    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn variant(&self) -> ConvolutionVariant {
        self.variant
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Source temperature at a node and snapshot.
    pub fn source(&self, node: usize, snapshot: usize) -> f64 {
        self.samples[snapshot][node]
    }

    /// Whether `(node, snapshot)` lies in `C_r = Omega_{2r} x (r, T - r)`.
    pub fn in_valid_region(&self, node: usize, snapshot: usize) -> bool {
        let t = self.times[snapshot];
        let t_end = *self.times.last().expect("non-empty");
        if !(t > self.r && t < t_end - self.r) {
            return false;
        }
        let p = self.grid.point(node);
        let d = self.grid.domain();
        (0..self.grid.axes()).all(|a| p[a] - d.lower()[a] > 2.0 * self.r && d.upper()[a] - p[a] > 2.0 * self.r)
    }

    /// Envelope value, or `None` outside `C_r`.
    pub fn value(&self, node: usize, snapshot: usize) -> Option<f64> {
        if !self.in_valid_region(node, snapshot) {
            return None;
        }
        let (i, j) = self.grid.multi_index(node);
        let t = self.times[snapshot];
        let pick = |a: f64, b: f64| if self.variant.is_sup() { a.max(b) } else { a.min(b) };
        let mut acc = self.samples[snapshot][node];
        let snaps: Vec<usize> = if self.variant.is_space_time() {
            (0..self.times.len())
                .filter(|&s| (self.times[s] - t).abs() <= self.r)
                .collect()
        } else {
            vec![snapshot]
        };
        for s in snaps {
            let dt = self.times[s] - t;
            let budget = self.r * self.r * (1.0 + 1e-12) - dt * dt;
            for &(di, dj, d2) in &self.offsets {
                if d2 > budget {
                    continue;
                }
                let ii = i as isize + di;
                let jj = j as isize + dj;
                let k = self.grid.index(ii as usize, jj as usize);
                acc = pick(acc, self.samples[s][k]);
            }
        }
        Some(acc)
    }

    /// Envelope over all nodes at one snapshot.
    pub fn snapshot_values(&self, snapshot: usize) -> Vec<Option<f64>> {
        par_map(self.grid.node_count(), |k| self.value(k, snapshot))
    }
}

// ---------------------------------------------------------------------------
// Parabolic neighborhoods and crossing tests

/// Space-time cylinder `S x [t0, t1]` over an axis-aligned box or an annulus
/// (a disk when `inner = 0`), in trajectory time.
#[derive(Debug, Clone, PartialEq)]
pub enum Neighborhood {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        t0: f64,
        t1: f64,
    },
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
        t0: f64,
        t1: f64,
    },
}

impl Neighborhood {
    pub fn times(&self) -> (f64, f64) {
        match self {
            Neighborhood::Box { t0, t1, .. } | Neighborhood::Annulus { t0, t1, .. } => (*t0, *t1),
        }
    }

    pub fn contains_space(&self, x: &[f64]) -> bool {
        match self {
            Neighborhood::Box { lower, upper, .. } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi),
            Neighborhood::Annulus {
                center,
                inner,
                outer,
                ..
            } => {
                let len = x.len().max(center.len());
                let rho = (0..len)
                    .map(|i| {
                        let d = x.get(i).copied().unwrap_or(0.0) - center.get(i).copied().unwrap_or(0.0);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt();
                rho >= *inner && rho <= *outer
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Supersolution barrier expected above the field.
    BarrierAbove,
    /// Subsolution barrier expected below the field.
    BarrierBelow,
}

impl Side {
    pub fn for_kind(kind: Kind) -> Self {
        match kind {
            Kind::Super => Side::BarrierAbove,
            Kind::Sub => Side::BarrierBelow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingVerdict {
    NoCrossing,
    Crossing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    /// Minimum over `D` of `barrier - field` (above) or `field - barrier` (below).
    pub min_gap: f64,
    /// Point and trajectory time of the minimum.
    pub witness: (Vec<f64>, f64),
    /// Minimum of the same gap over the parabolic boundary of `D`.
    pub boundary_margin: f64,
    pub tol: f64,
    pub verdict: CrossingVerdict,
    pub nodes_checked: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CrossingOptions {
    /// Barrier time is trajectory time plus this offset.
    pub time_offset: f64,
    /// Defaults to `2 (dx + dt)`.
    pub tol: Option<f64>,
}

pub fn default_crossing_tol(traj: &Trajectory) -> f64 {
    2.0 * (traj.grid().max_spacing() + traj.dt())
}

/// Compares the trajectory temperature with a barrier over `D`. The bottom
/// of `D` is its first snapshot; lateral nodes are grid boundary nodes or
/// nodes with an axis neighbor outside `D`.
pub fn crossing_test(
    traj: &Trajectory,
    barrier: &Barrier,
    d: &Neighborhood,
    side: Side,
    opts: CrossingOptions,
) -> Result<CrossingReport> {
    if Side::for_kind(barrier.kind()) != side {
        return Err(Error::InvalidParameter(format!(
            "a {:?} barrier cannot be placed {:?}",
            barrier.kind(),
            side
        )));
    }
    let grid = traj.grid();
    let axes = grid.axes();
    let tol = opts.tol.unwrap_or_else(|| default_crossing_tol(traj));
    let (t0, t1) = d.times();
    let eps_t = 1e-12 * (1.0 + t1.abs());
    let snaps: Vec<usize> = (0..traj.len())
        .filter(|&s| {
            let t = traj.snapshots()[s].time();
            t >= t0 - eps_t && t <= t1 + eps_t
        })
        .collect();
    let inside: Vec<bool> = (0..grid.node_count())
        .map(|k| d.contains_space(&grid.point(k)[..axes]))
        .collect();
    let nodes: Vec<usize> = (0..grid.node_count()).filter(|&k| inside[k]).collect();
    if snaps.is_empty() || nodes.is_empty() {
        return Err(Error::InvalidParameter("neighborhood contains no samples".into()));
    }
    let lateral: Vec<bool> = nodes
        .iter()
        .map(|&k| {
            if grid.is_boundary(k) {
                return true;
            }
            let (i, j) = grid.multi_index(k);
            let mut nb = vec![grid.index(i + 1, j), grid.index(i - 1, j)];
            if axes > 1 {
                nb.push(grid.index(i, j + 1));
                nb.push(grid.index(i, j - 1));
            }
            nb.into_iter().any(|n| !inside[n])
        })
        .collect();

    struct Partial {
        min: (f64, usize, usize),
        margin: f64,
    }
    let per_snapshot = par_map(snaps.len(), |si| -> Result<Partial> {
        let s = snaps[si];
        let snap = &traj.snapshots()[s];
        let t = snap.time();
        let tb = t + opts.time_offset;
        let mut p = Partial {
            min: (f64::INFINITY, 0, s),
            margin: f64::INFINITY,
        };
        for (ni, &k) in nodes.iter().enumerate() {
            let x = &grid.point(k)[..axes];
            if !barrier.contains(x, tb) {
                return Err(Error::OutsideValidity(format!(
                    "x = {x:?}, barrier time {tb}"
                )));
            }
            let phi = barrier.value(x, tb);
            let u = chi(snap.h.values()[k]);
            let gap = match side {
                Side::BarrierAbove => phi - u,
                Side::BarrierBelow => u - phi,
            };
            if gap < p.min.0 {
                p.min = (gap, k, s);
            }
            if si == 0 || lateral[ni] {
                p.margin = p.margin.min(gap);
            }
        }
        Ok(p)
    });
    let mut min = (f64::INFINITY, 0, 0);
    let mut margin = f64::INFINITY;
    for p in per_snapshot {
        let p = p?;
        if p.min.0 < min.0 {
            min = p.min;
        }
        margin = margin.min(p.margin);
    }
    let verdict = if margin <= 0.0 {
        CrossingVerdict::Inconclusive
    } else if min.0 >= -tol {
        CrossingVerdict::NoCrossing
    } else {
        CrossingVerdict::Crossing
    };
    Ok(CrossingReport {
        min_gap: min.0,
        witness: (grid.point(min.1)[..axes].to_vec(), traj.snapshots()[min.2].time()),
        boundary_margin: margin,
        tol,
        verdict,
        nodes_checked: nodes.len() * snaps.len(),
    })
}

/// A solver trajectory started `gap` below a supersolution (above a
/// subsolution) on its whole validity window, with the cylinder `D` that
/// fits inside the validity region for all times.
#[derive(Debug, Clone)]
pub struct CrossingFixture {
    pub barrier: Barrier,
    pub trajectory: Trajectory,
    pub neighborhood: Neighborhood,
    pub side: Side,
    pub options: CrossingOptions,
}

impl CrossingFixture {
    pub fn run(&self) -> Result<CrossingReport> {
        crossing_test(
            &self.trajectory,
            &self.barrier,
            &self.neighborhood,
            self.side,
            self.options,
        )
    }
}

/// Builds the fixture on a radial grid of `barrier.dim()` dimensions (an
/// interval about the center when `n = 1`). Outside the validity shell the
/// data continue from the shell edge with a slope steeper than the barrier's,
/// bending away from it.
pub fn barrier_fixture(
    barrier: &Barrier,
    gap: f64,
    cells: usize,
    opts: &SolveOptions,
) -> Result<CrossingFixture> {
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter("gap must be positive".into()));
    }
    let n = barrier.dim();
    if n > 1 && barrier.center().iter().any(|&c| c != 0.0) {
        return Err(Error::InvalidParameter(
            "radial fixtures need a barrier centered at the origin".into(),
        ));
    }
    let (bt0, bt1) = barrier.validity_times();
    let samples = 65;
    let mut inner = f64::NEG_INFINITY;
    let mut outer = f64::INFINITY;
    let mut r_min = f64::INFINITY;
    let mut r_max = 0.0f64;
    for k in 0..samples {
        let t = bt0 + (bt1 - bt0) * k as f64 / (samples - 1) as f64;
        let (r0, r1) = barrier.validity_radii(t);
        inner = inner.max(r0);
        outer = outer.min(r1);
        r_min = r_min.min(r0);
        r_max = r_max.max(r1);
    }
    if !(inner < outer) {
        return Err(Error::OutsideValidity(
            "validity shells share no common radius".into(),
        ));
    }
    let shrink = 1e-12 * outer;
    let (inner, outer) = ((inner + shrink).max(0.0), outer - shrink);
    let pad = 0.05 * (r_max - r_min);
    let hi = r_max + pad;
    let lo = r_min - pad;
    let center = barrier.center().first().copied().unwrap_or(0.0);
    let domain = if n == 1 {
        Domain::interval(center - hi, center + hi)?
    } else if lo <= 0.02 * hi {
        Domain::ball(hi, n)?
    } else {
        Domain::radial(lo, hi, n)?
    };
    let grid = Grid::new(domain, &[cells])?.shared();
    let sign = match barrier.kind() {
        Kind::Super => -1.0,
        Kind::Sub => 1.0,
    };
    let b = barrier.clone();
    let data = move |x: &[f64], t: f64| {
        let tb = (bt0 + t).clamp(bt0, bt1);
        let (r0, r1) = b.validity_radii(tb);
        let p = b.profile();
        let slope = 1.0 + 2.0 * p.d_rho(r0.max(1e-12), tb).abs().max(p.d_rho(r1, tb).abs());
        let rho = b.rho(x);
        let clamped = rho.clamp(r0, r1);
        p.value(clamped, tb) + sign * (gap + slope * (rho - clamped).abs())
    };
    let data = Arc::new(data);
    let d0 = data.clone();
    let h0 = EnthalpyField::from_temperature_fn(grid.clone(), 0.0, Selection::Maximal, |x| {
        d0(x, 0.0)
    })?;
    let theta = BoundaryData::new(move |x, t| data(x, t));
    let spec = ProblemSpec::new(h0, theta, bt1 - bt0)?;
    let trajectory = solve(&spec, opts)?;
    Ok(CrossingFixture {
        barrier: barrier.clone(),
        trajectory,
        neighborhood: Neighborhood::Annulus {
            center: barrier.center().to_vec(),
            inner,
            outer,
            t0: 0.0,
            t1: bt1 - bt0,
        },
        side: Side::for_kind(barrier.kind()),
        options: CrossingOptions {
            time_offset: bt0,
            tol: None,
        },
    })
}

/// Pushes the field past the barrier by `amount` at the interior node of `D`
/// nearest the barrier front, on a middle snapshot. Returns the edited
/// trajectory and the point and time of the edit.
pub fn inject_violation(fixture: &CrossingFixture, amount: f64) -> Result<(Trajectory, Vec<f64>, f64)> {
    let mut traj = fixture.trajectory.clone();
    let grid = traj.grid().clone();
    let axes = grid.axes();
    let s = traj.len() / 2;
    let t = traj.snapshots()[s].time();
    let tb = t + fixture.options.time_offset;
    let b = &fixture.barrier;
    let target = b.front_radius(tb);
    let (lo, hi) = match &fixture.neighborhood {
        Neighborhood::Annulus { inner, outer, .. } => (*inner, *outer),
        Neighborhood::Box { .. } => {
            return Err(Error::InvalidParameter("fixture neighborhoods are annuli".into()))
        }
    };
    let mid = target.filter(|r| *r > lo && *r < hi).unwrap_or(0.5 * (lo + hi));
    let node = (0..grid.node_count())
        .filter(|&k| {
            let x = &grid.point(k)[..axes];
            let rho = b.rho(x);
            !grid.is_boundary(k) && rho > lo && rho < hi
        })
        .min_by(|&a, &c| {
            let da = (b.rho(&grid.point(a)[..axes]) - mid).abs();
            let dc = (b.rho(&grid.point(c)[..axes]) - mid).abs();
            da.total_cmp(&dc)
        })
        .ok_or_else(|| Error::InvalidParameter("no interior node in D".into()))?;
    let x = grid.point(node)[..axes].to_vec();
    let phi = b.value(&x, tb);
    let u = match fixture.side {
        Side::BarrierAbove => phi + amount,
        Side::BarrierBelow => phi - amount,
    };
    traj.snapshots_mut()[s].h.field_mut().values_mut()[node] = chi_inverse(u, Selection::Maximal);
    Ok((traj, x, t))
}

// ---------------------------------------------------------------------------
// Comparison harness

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Smallest separation of the data on the parabolic boundary.
    pub initial_gap: f64,
    /// `max (u - v)^+` over nodes and snapshots.
    pub max_violation: f64,
    pub snapshots: usize,
}

impl ComparisonReport {
    pub fn ordered(&self) -> bool {
        self.max_violation == 0.0
    }
}

/// Samples of the lateral boundary used for the separation check.
pub const SEPARATION_TIMES: usize = 257;

/// Runs both problems concurrently and checks the temperatures stay ordered.
/// Separation is checked at every node at `t = 0` and at boundary nodes on
/// `SEPARATION_TIMES` uniform times.
pub fn comparison_harness(
    sub: &ProblemSpec,
    sup: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<ComparisonReport> {
    let grid = sub.grid();
    if grid != sup.grid() {
        return Err(Error::GridMismatch);
    }
    if sub.final_time() != sup.final_time() {
        return Err(Error::InvalidParameter("final times differ".into()));
    }
    let mut gap = f64::INFINITY;
    for (a, b) in sub.h0().values().iter().zip(sup.h0().values()) {
        gap = gap.min(chi(*b) - chi(*a));
    }
    let t_end = sub.final_time();
    for i in 0..SEPARATION_TIMES {
        let t = t_end * i as f64 / (SEPARATION_TIMES - 1) as f64;
        for k in grid.boundary_nodes() {
            let x = &grid.point(k)[..grid.axes()];
            gap = gap.min(sup.theta().eval(x, t) - sub.theta().eval(x, t));
        }
    }
    if !(gap > 0.0) {
        return Err(Error::NotSeparated { gap });
    }
    let (u, v) = std::thread::scope(|s| {
        let a = s.spawn(|| solve(sub, opts));
        let b = s.spawn(|| solve(sup, opts));
        (
            a.join().expect("solver panicked"),
            b.join().expect("solver panicked"),
        )
    });
    let (u, v) = (u?, v?);
    if u.len() != v.len() {
        return Err(Error::InvalidParameter("snapshot schedules differ".into()));
    }
    let mut worst = 0.0f64;
    for (a, b) in u.snapshots().iter().zip(v.snapshots()) {
        for (x, y) in a.h.values().iter().zip(b.h.values()) {
            worst = worst.max(chi(*x) - chi(*y));
        }
    }
    Ok(ComparisonReport {
        initial_gap: gap,
        max_violation: worst,
        snapshots: u.len(),
    })
}

// ---------------------------------------------------------------------------
// Scaling

/// `a u(bx, ab^2 t + c)` for a planar exact solution. The enthalpy keeps the
/// latent part of the original: `h = a chi(h0) + (h0 - chi(h0))`.
#[derive(Clone)]
pub struct ScaledSolution {
    pub inner: Arc<dyn ExactSolution>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ScaledSolution {
    pub fn new(inner: Arc<dyn ExactSolution>, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scaling needs a, b > 0 and c >= 0, got ({a}, {b}, {c})"
            )));
        }
        Ok(Self { inner, a, b, c })
    }

    fn time(&self, t: f64) -> f64 {
        self.a * self.b * self.b * t + self.c
    }
}

impl ExactSolution for ScaledSolution {
    fn u(&self, x: f64, t: f64) -> f64 {
        self.a * self.inner.u(self.b * x, self.time(t))
    }
    fn u_x(&self, x: f64, t: f64) -> f64 {
        self.a * self.b * self.inner.u_x(self.b * x, self.time(t))
    }
    fn u_t(&self, x: f64, t: f64) -> f64 {
        self.a * self.a * self.b * self.b * self.inner.u_t(self.b * x, self.time(t))
    }
    fn h(&self, x: f64, t: f64) -> f64 {
        let h = self.inner.h(self.b * x, self.time(t));
        self.a * chi(h) + (h - chi(h))
    }
    fn front(&self, t: f64) -> f64 {
        self.inner.front(self.time(t)) / self.b
    }
    fn front_speed(&self, t: f64) -> f64 {
        self.a * self.b * self.inner.front_speed(self.time(t))
    }
    fn validity(&self) -> (f64, f64) {
        let (t0, t1) = self.inner.validity();
        let k = self.a * self.b * self.b;
        (((t0 - self.c) / k).max(0.0), (t1 - self.c) / k)
    }
    fn selection(&self) -> Selection {
        self.inner.selection()
    }
}

fn scaled_domain(d: &Domain, b: f64) -> Result<Domain> {
    match d.kind() {
        DomainKind::Interval => Domain::interval(d.lower()[0] / b, d.upper()[0] / b),
        DomainKind::Rectangle => Domain::rectangle(
            [d.lower()[0] / b, d.lower()[1] / b],
            [d.upper()[0] / b, d.upper()[1] / b],
        ),
        DomainKind::Radial => Domain::radial(d.lower()[0] / b, d.upper()[0] / b, d.ambient_dim()),
    }
}

/// Resamples `a u(bx, ab^2 t + c)` on the grid scaled by `1/b`, whose nodes
/// map onto the original nodes. Snapshot times are those after `c`, with a
/// first snapshot interpolated linearly in enthalpy at time `c`.
pub fn scale_trajectory(traj: &Trajectory, a: f64, b: f64, c: f64) -> Result<Trajectory> {
    if !(a > 0.0 && b > 0.0 && c >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scaling needs a, b > 0 and c >= 0, got ({a}, {b}, {c})"
        )));
    }
    let grid = Grid::new(scaled_domain(traj.grid().domain(), b)?, traj.grid().cells())?.shared();
    let k = a * b * b;
    let snaps = traj.snapshots();
    let times = traj.times();
    let first_after = times.iter().position(|&t| t > c).ok_or_else(|| {
        Error::InvalidParameter(format!("shift c = {c} is beyond the final time"))
    })?;
    let transform = |h: &[f64]| -> Vec<f64> {
        h.iter().map(|&v| a * chi(v) + (v - chi(v))).collect()
    };
    let start: Vec<f64> = if first_after == 0 {
        snaps[0].h.values().to_vec()
    } else {
        let (s0, s1) = (&snaps[first_after - 1], &snaps[first_after]);
        let w = (c - s0.time()) / (s1.time() - s0.time());
        s0.h.values()
            .iter()
            .zip(s1.h.values())
            .map(|(x, y)| x + w * (y - x))
            .collect()
    };
    let mut out = vec![Snapshot {
        step: 0,
        h: EnthalpyField::new(ScalarField::new(grid.clone(), transform(&start), 0.0)?),
    }];
    for s in &snaps[first_after..] {
        let t = (s.time() - c) / k;
        if t <= 0.0 {
            continue;
        }
        out.push(Snapshot {
            step: s.step,
            h: EnthalpyField::new(ScalarField::new(grid.clone(), transform(s.h.values()), t)?),
        });
    }
    Trajectory::from_snapshots(out, traj.dt() / k)
}

// ---------------------------------------------------------------------------
// Envelopes

/// Temperatures of the solves from the maximal and minimal initial enthalpy.
#[derive(Debug, Clone)]
pub struct Envelopes {
    /// `U1`, from `h0 = u0` where `u0 >= 0`, `u0 - 1` otherwise.
    pub upper: Trajectory,
    /// `U2`, from `h0 = u0` where `u0 > 0`, `u0 - 1` otherwise.
    pub lower: Trajectory,
}

pub fn envelopes(
    grid: Arc<Grid>,
    u0: &(dyn Fn(&[f64]) -> f64 + Sync),
    theta: &BoundaryData,
    final_time: f64,
    opts: &SolveOptions,
) -> Result<Envelopes> {
    let run = |sel: Selection| -> Result<Trajectory> {
        let h0 = EnthalpyField::from_temperature_fn(grid.clone(), 0.0, sel, u0)?;
        let spec = ProblemSpec::new(h0, theta.clone(), final_time)?.with_boundary_selection(sel);
        solve(&spec, opts)
    };
    let (upper, lower) = std::thread::scope(|s| {
        let a = s.spawn(|| run(Selection::Maximal));
        let b = s.spawn(|| run(Selection::Minimal));
        (
            a.join().expect("solver panicked"),
            b.join().expect("solver panicked"),
        )
    });
    Ok(Envelopes {
        upper: upper?,
        lower: lower?,
    })
}

impl Envelopes {
    /// `max (U2 - U1)^+` over all snapshots.
    pub fn order_violation(&self) -> f64 {
        self.pairs()
            .map(|(hi, lo)| (chi(lo) - chi(hi)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `max (U1 - U2)` at the final snapshot over nodes selected by `mask`.
    pub fn final_gap(&self, mask: impl Fn(&[f64]) -> bool) -> f64 {
        let g = self.upper.grid();
        let (a, b) = (self.upper.last(), self.lower.last());
        (0..g.node_count())
            .filter(|&k| mask(&g.point(k)[..g.axes()]))
            .map(|k| chi(a.values()[k]) - chi(b.values()[k]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn identical(&self) -> bool {
        self.pairs().all(|(a, b)| chi(a) == chi(b))
    }

    /// Largest excursion of `chi(h)` outside `[U2, U1]` over snapshots.
    pub fn sandwich_violation(&self, traj: &Trajectory) -> Result<f64> {
        if traj.len() != self.upper.len() || traj.grid() != self.upper.grid() {
            return Err(Error::GridMismatch);
        }
        let mut worst = 0.0f64;
        for ((s, hi), lo) in traj
            .snapshots()
            .iter()
            .zip(self.upper.snapshots())
            .zip(self.lower.snapshots())
        {
            for ((&h, &a), &b) in s.h.values().iter().zip(hi.h.values()).zip(lo.h.values()) {
                let u = chi(h);
                worst = worst.max(u - chi(a)).max(chi(b) - u);
            }
        }
        Ok(worst)
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.upper
            .snapshots()
            .iter()
            .zip(self.lower.snapshots())
            .flat_map(|(a, b)| a.h.values().iter().copied().zip(b.h.values().iter().copied()))
    }
}
