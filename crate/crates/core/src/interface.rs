//! Free-boundary extraction, one-sided gradients, normal velocities and the
//! Stefan-condition residual.

use std::io::Write;

use crate::barriers::expansion_constants;
use crate::enthalpy::EnthalpyField;
use crate::error::{Error, Result};
use crate::mesh::{interpolate, Grid, ScalarField};
use crate::stepper::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSample {
    pub position: Vec<f64>,
    pub time: f64,
    /// Unit normal pointing out of `{u > 0}`.
    pub normal: Vec<f64>,
    pub vn: Option<f64>,
    pub grad_plus: f64,
    pub grad_minus: f64,
    /// Both phases present within three cells of the front.
    pub two_phase: bool,
    /// Fewer than two same-sign samples were available on some side.
    pub low_confidence: bool,
}

impl InterfaceSample {
    fn at(position: Vec<f64>, time: f64, normal: Vec<f64>) -> Self {
        Self {
            position,
            time,
            normal,
            vn: None,
            grad_plus: 0.0,
            grad_minus: 0.0,
            two_phase: false,
            low_confidence: false,
        }
    }
}

/// A run of nodes with `u = 0` exactly, with the coordinates of its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct MushyBand {
    pub nodes: Vec<usize>,
    /// End coordinates of the run (1D grids only).
    pub fronts: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterfaceSet {
    pub samples: Vec<InterfaceSample>,
    pub bands: Vec<MushyBand>,
}

fn axis_edges(grid: &Grid) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let nx = grid.nodes_along(0);
    let ny = if grid.axes() > 1 { grid.nodes_along(1) } else { 1 };
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            if i + 1 < nx {
                out.push((k, grid.index(i + 1, j), 0));
            }
            if grid.axes() > 1 && j + 1 < ny {
                out.push((k, grid.index(i, j + 1), 1));
            }
        }
    }
    out
}

/// Gradient of the multilinear interpolant at `x`, by differencing the
/// interpolant over a tenth of a cell.
fn interpolated_gradient(u: &ScalarField, x: &[f64]) -> Vec<f64> {
    let g = u.grid();
    (0..g.axes())
        .map(|a| {
            let h = 0.1 * g.spacing()[a];
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[a] += h;
            m[a] -= h;
            let up = interpolate(u, &p).unwrap_or(f64::NAN);
            let um = interpolate(u, &m).unwrap_or(f64::NAN);
            match (up.is_nan(), um.is_nan()) {
                (false, false) => (up - um) / (2.0 * h),
                (false, true) => (up - u_at(u, x)) / h,
                (true, false) => (u_at(u, x) - um) / h,
                (true, true) => 0.0,
            }
        })
        .collect()
}

fn u_at(u: &ScalarField, x: &[f64]) -> f64 {
    interpolate(u, x).unwrap_or(0.0)
}

/// Zero crossings on grid edges between strictly signed nodes, located by
/// linear interpolation, plus the runs of exactly-zero nodes.
pub fn extract_interface(u: &ScalarField) -> InterfaceSet {
    let g = u.grid();
    let v = u.values();
    let axes = g.axes();
    let mut set = InterfaceSet::default();
    for (a, b, axis) in axis_edges(g) {
        let (ua, ub) = (v[a], v[b]);
        if !(ua > 0.0 && ub < 0.0 || ua < 0.0 && ub > 0.0) {
            continue;
        }
        let s = ua / (ua - ub);
        let pa = g.point(a);
        let mut pos = pa[..axes].to_vec();
        pos[axis] += s * g.spacing()[axis];
        let normal = if axes == 1 {
            vec![if ua > 0.0 { 1.0 } else { -1.0 }]
        } else {
            let grad = interpolated_gradient(u, &pos);
            let n = grad.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 0.0 {
                grad.iter().map(|c| -c / n).collect()
            } else {
                let mut e = vec![0.0; axes];
                e[axis] = if ua > 0.0 { 1.0 } else { -1.0 };
                e
            }
        };
        set.samples.push(InterfaceSample::at(pos, u.time(), normal));
    }
    // zero plateaus: connected components over axis neighbors
    let mut seen = vec![false; v.len()];
    for start in 0..v.len() {
        if v[start] != 0.0 || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut nodes = Vec::new();
        seen[start] = true;
        while let Some(k) = stack.pop() {
            nodes.push(k);
            let (i, j) = g.multi_index(k);
            let mut nb = Vec::new();
            if i > 0 {
                nb.push(g.index(i - 1, j));
            }
            if i + 1 < g.nodes_along(0) {
                nb.push(g.index(i + 1, j));
            }
            if axes > 1 {
                if j > 0 {
                    nb.push(g.index(i, j - 1));
                }
                if j + 1 < g.nodes_along(1) {
                    nb.push(g.index(i, j + 1));
                }
            }
            for n in nb {
                if v[n] == 0.0 && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        nodes.sort_unstable();
        let fronts = (axes == 1).then(|| {
            (
                g.point(nodes[0])[0],
                g.point(*nodes.last().expect("non-empty"))[0],
            )
        });
        set.bands.push(MushyBand { nodes, fronts });
    }
    set
}

/// Fronts of a 1D enthalpy field, placed by liquid fraction: between a
/// liquid node and the next solid node (or the end of the grid) the front
/// sits at the shared cell face shifted by `dx` times the summed fractions
/// `h + 1` of the mushy nodes in between.
pub fn enthalpy_fronts(h: &EnthalpyField) -> Result<Vec<InterfaceSample>> {
    let g = h.grid();
    if g.axes() != 1 {
        return Err(Error::InvalidParameter(
            "liquid-fraction fronts are defined on 1D grids".into(),
        ));
    }
    let u = h.temperature();
    let v = u.values();
    let hv = h.values();
    let dx = g.spacing()[0];
    let n = v.len();
    let melted = |a: usize, b: usize| (a..b).map(|k| (hv[k] + 1.0).clamp(0.0, 1.0)).sum::<f64>() * dx;
    let signed: Vec<usize> = (0..n).filter(|&k| v[k] != 0.0).collect();
    let mut out = Vec::new();
    let push = |out: &mut Vec<InterfaceSample>, x: f64, nx: f64| {
        out.push(InterfaceSample::at(vec![x], h.time(), vec![nx]));
    };
    if let Some(&first) = signed.first() {
        if first > 0 && v[first] > 0.0 {
            push(&mut out, g.point(first)[0] - 0.5 * dx - melted(0, first), -1.0);
        }
    }
    for (idx, &i) in signed.iter().enumerate() {
        let j = signed.get(idx + 1).copied().unwrap_or(n);
        let next_solid = j == n || v[j] < 0.0;
        if v[i] > 0.0 && next_solid && (j < n || i + 1 < n) {
            push(&mut out, g.point(i)[0] + 0.5 * dx + melted(i + 1, j), 1.0);
        } else if v[i] < 0.0 && j < n && v[j] > 0.0 {
            push(&mut out, g.point(j)[0] - 0.5 * dx - melted(i + 1, j), -1.0);
        }
    }
    Ok(out)
}

/// Derivative at distance 0 of the polynomial through the same-sign samples
/// `(d, u)`: quadratic with three, linear with two, and the secant to the
/// front with one.
fn one_sided_slope(pts: &[(f64, f64)]) -> f64 {
    match pts {
        [] => 0.0,
        [(d1, u1)] => u1 / d1,
        [(d1, u1), (d2, u2)] => (u2 - u1) / (d2 - d1),
        [(d1, u1), (d2, u2), (d3, u3), ..] => {
            // Newton form, derivative at 0
            let f12 = (u2 - u1) / (d2 - d1);
            let f23 = (u3 - u2) / (d3 - d2);
            let f123 = (f23 - f12) / (d3 - d1);
            f12 + f123 * (-d1 - d2)
        }
    }
}

/// One-sided gradient magnitudes `(|Du+|, |Du-|)` along the sample normal,
/// from same-sign samples only, and a low-confidence flag when a present
/// phase has fewer than two samples. Also sets the two-phase flag.
pub fn one_sided_gradients(u: &ScalarField, sample: &mut InterfaceSample) -> (f64, f64) {
    let g = u.grid();
    let dx = g.min_spacing();
    let mut low = false;
    let mut present = [false; 2];
    let mut slopes = [0.0; 2];
    for (side, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        // liquid lies against the normal
        let dir = -sign;
        let mut pts = Vec::new();
        if g.axes() == 1 {
            let x0 = sample.position[0];
            let step = dir * sample.normal[0];
            let v = u.values();
            let mut idx: Vec<usize> = (0..v.len())
                .filter(|&k| (g.point(k)[0] - x0) * step > 1e-9 * dx)
                .collect();
            idx.sort_by(|&a, &b| {
                let da = (g.point(a)[0] - x0).abs();
                let db = (g.point(b)[0] - x0).abs();
                da.total_cmp(&db)
            });
            for &k in &idx {
                let d = (g.point(k)[0] - x0).abs();
                if d > 3.0 * dx + 1e-9 * dx {
                    break;
                }
                if v[k] * sign > 0.0 {
                    present[side] = true;
                    break;
                }
            }
            for k in idx {
                let val = v[k];
                if val == 0.0 && pts.is_empty() {
                    continue;
                }
                if val * sign <= 0.0 || pts.len() == 3 {
                    break;
                }
                pts.push(((g.point(k)[0] - x0) * step, val * sign));
            }
            slopes[side] = one_sided_slope(&pts).abs();
        } else {
            for k in 1..=3 {
                let d = k as f64 * dx;
                let p: Vec<f64> = sample
                    .position
                    .iter()
                    .zip(&sample.normal)
                    .map(|(x, n)| x + dir * d * n)
                    .collect();
                let Ok(val) = interpolate(u, &p) else { break };
                if val * sign > 0.0 {
                    present[side] = true;
                    if pts.len() < 3 {
                        pts.push((d, val * sign));
                    }
                } else if !pts.is_empty() {
                    break;
                }
            }
            slopes[side] = one_sided_slope(&pts).abs();
        }
        if present[side] && pts.len() < 2 {
            low = true;
        }
        if !present[side] {
            slopes[side] = 0.0;
        }
    }
    sample.grad_plus = slopes[0];
    sample.grad_minus = slopes[1];
    sample.two_phase = present[0] && present[1];
    sample.low_confidence = low;
    (slopes[0], slopes[1])
}

/// Normal velocity of each sample of `a` from its nearest same-orientation
/// match in `b` within `3 dx`; `None` for unmatched samples.
pub fn normal_velocity(a: &[InterfaceSample], b: &[InterfaceSample], dt: f64, dx: f64) -> Vec<Option<f64>> {
    a.iter()
        .map(|s| {
            let best = b
                .iter()
                .filter(|o| dot(&o.normal, &s.normal) > 0.0)
                .map(|o| {
                    let d: Vec<f64> = o.position.iter().zip(&s.position).map(|(p, q)| p - q).collect();
                    (dot(&d, &d).sqrt(), d)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0))?;
            (best.0 <= 3.0 * dx * (1.0 + 1e-9)).then(|| dot(&best.1, &s.normal) / dt)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StefanResidual {
    /// `V_n - (|Du+| - |Du-|)`.
    TwoPhase(f64),
    /// `V_n - |Du+|`, admissible when `>= -tol`.
    LiquidSlack(f64),
    /// `-|Du-| - V_n`, admissible when `>= -tol`.
    SolidSlack(f64),
}

impl StefanResidual {
    pub fn value(self) -> f64 {
        match self {
            Self::TwoPhase(r) | Self::LiquidSlack(r) | Self::SolidSlack(r) => r,
        }
    }

    pub fn admissible(self, tol: f64) -> bool {
        match self {
            Self::TwoPhase(r) => r.abs() <= tol,
            Self::LiquidSlack(s) | Self::SolidSlack(s) => s >= -tol,
        }
    }
}

pub fn stefan_residual(s: &InterfaceSample) -> Option<StefanResidual> {
    let v = s.vn?;
    Some(if s.two_phase {
        StefanResidual::TwoPhase(v - (s.grad_plus - s.grad_minus))
    } else if s.grad_plus > 0.0 {
        StefanResidual::LiquidSlack(v - s.grad_plus)
    } else {
        StefanResidual::SolidSlack(-s.grad_minus - v)
    })
}

/// Front-smearing budget for the one-sided slacks.
pub fn slack_tolerance(dx: f64, dt_snapshot: f64) -> f64 {
    3.0 * (dx / dt_snapshot * dx + dx)
}

fn fronts_of(h: &EnthalpyField) -> Vec<InterfaceSample> {
    if h.grid().axes() == 1 {
        enthalpy_fronts(h).expect("1D grid")
    } else {
        extract_interface(&h.temperature()).samples
    }
}

/// Half-width of the time window over which [`analyze_trajectory`] measures
/// front displacement and averages gradients. The enthalpy front advances in
/// stop-and-go steps of one cell, so only the time-integrated Stefan balance
/// is meaningful at the grid scale.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    /// Defaults to `final_time / 32`; never less than one snapshot interval.
    pub half_window: Option<f64>,
}

impl AnalysisOptions {
    pub fn with_half_window(w: f64) -> Self {
        Self { half_window: Some(w) }
    }
}

/// Index in `b` of the nearest same-orientation sample within `reach`.
fn match_sample(s: &InterfaceSample, b: &[InterfaceSample], reach: f64) -> Option<usize> {
    b.iter()
        .enumerate()
        .filter(|(_, o)| dot(&o.normal, &s.normal) > 0.0)
        .map(|(k, o)| {
            let d2: f64 = o.position.iter().zip(&s.position).map(|(p, q)| (p - q) * (p - q)).sum();
            (d2, k)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .and_then(|(d2, k)| (d2.sqrt() <= reach * (1.0 + 1e-9)).then_some(k))
}

/// Fronts of every snapshot with one-sided gradients and velocities.
///
/// Each sample is tracked snapshot to snapshot (nearest match within `3 dx`)
/// backward and forward over the window; `vn` is the normal displacement
/// between the ends of the track over its duration and the gradients are the
/// trapezoidal time averages along it. Samples whose track breaks keep
/// `vn = None`.
pub fn analyze_trajectory(traj: &Trajectory, opts: &AnalysisOptions) -> Vec<Vec<InterfaceSample>> {
    let reach = 3.0 * traj.grid().max_spacing();
    let snaps = traj.snapshots();
    let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
    let raw: Vec<Vec<InterfaceSample>> = crate::viscosity::par_map(snaps.len(), |i| {
        let u = snaps[i].h.temperature();
        let mut f = fronts_of(&snaps[i].h);
        for sample in &mut f {
            one_sided_gradients(&u, sample);
        }
        f
    });
    let n = raw.len();
    if n < 2 {
        return raw;
    }
    let links = |from: usize, to: usize| -> Vec<Option<usize>> {
        raw[from].iter().map(|s| match_sample(s, &raw[to], reach)).collect()
    };
    let fwd: Vec<Vec<Option<usize>>> = crate::viscosity::par_map(n - 1, |i| links(i, i + 1));
    let bwd: Vec<Vec<Option<usize>>> = crate::viscosity::par_map(n - 1, |i| links(i + 1, i));
    let half = opts.half_window.unwrap_or(times[n - 1] / 32.0);
    crate::viscosity::par_map(n, |i| {
        raw[i]
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut out = s.clone();
                // (snapshot, sample) pairs along the track, in time order
                let mut track = vec![(i, k)];
                let (mut j, mut m) = (i, k);
                while j > 0 && times[i] - times[j] < half {
                    match bwd[j - 1][m] {
                        Some(p) => {
                            j -= 1;
                            m = p;
                            track.insert(0, (j, m));
                        }
                        None => break,
                    }
                }
                let (mut j, mut m) = (i, k);
                while j + 1 < n && times[j] - times[i] < half {
                    match fwd[j][m] {
                        Some(p) => {
                            j += 1;
                            m = p;
                            track.push((j, m));
                        }
                        None => break,
                    }
                }
                if track.len() < 2 {
                    return out;
                }
                let (a, ka) = track[0];
                let (b, kb) = *track.last().expect("non-empty");
                let span = times[b] - times[a];
                let disp: Vec<f64> = raw[b][kb]
                    .position
                    .iter()
                    .zip(&raw[a][ka].position)
                    .map(|(p, q)| p - q)
                    .collect();
                out.vn = Some(dot(&disp, &s.normal) / span);
                let (mut gp, mut gm) = (0.0, 0.0);
                for w in track.windows(2) {
                    let (s0, s1) = (&raw[w[0].0][w[0].1], &raw[w[1].0][w[1].1]);
                    let dt = times[w[1].0] - times[w[0].0];
                    gp += 0.5 * (s0.grad_plus + s1.grad_plus) * dt;
                    gm += 0.5 * (s0.grad_minus + s1.grad_minus) * dt;
                    out.low_confidence |= s0.low_confidence || s1.low_confidence;
                }
                out.grad_plus = gp / span;
                out.grad_minus = gm / span;
                out
            })
            .collect()
    })
}

/// `t,x[,y],Vn,gradp,gradm,residual,flag`.
pub fn write_interface_csv<W: Write>(samples: &[Vec<InterfaceSample>], axes: usize, mut w: W) -> std::io::Result<()> {
    let coords = if axes == 1 { "x" } else { "x,y" };
    writeln!(w, "t,{coords},Vn,gradp,gradm,residual,flag")?;
    for s in samples.iter().flatten() {
        let pos: Vec<String> = s.position.iter().map(|x| format!("{x:e}")).collect();
        let (res, kind) = match stefan_residual(s) {
            Some(StefanResidual::TwoPhase(r)) => (format!("{r:e}"), "two_phase"),
            Some(StefanResidual::LiquidSlack(r)) => (format!("{r:e}"), "liquid"),
            Some(StefanResidual::SolidSlack(r)) => (format!("{r:e}"), "solid"),
            None => (String::new(), "unmatched"),
        };
        let flag = if s.low_confidence {
            format!("{kind}|low_confidence")
        } else {
            kind.to_string()
        };
        writeln!(
            w,
            "{:e},{},{},{:e},{:e},{},{}",
            s.time,
            pos.join(","),
            s.vn.map(|v| format!("{v:e}")).unwrap_or_default(),
            s.grad_plus,
            s.grad_minus,
            res,
            flag
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub holds: bool,
    /// Bound `M` on `|u|` over the parabolic boundary.
    pub m_bound: f64,
    pub v: f64,
    pub t_r: f64,
    pub snapshots_checked: usize,
    /// First node found outside the allowed neighborhood, with its time.
    pub witness: Option<(Vec<f64>, f64)>,
}

/// Checks `{u(t) <= 0}` within `r + dx` of `{u0 <= 0}` and `{u(t) >= 0}`
/// within `r + dx` of `{u0 >= 0}` for all snapshots with `t <= t_r`.
pub fn expansion_bound_check(traj: &Trajectory, r: f64) -> Result<ExpansionReport> {
    let g = traj.grid();
    let axes = g.axes();
    let temps = traj.temperatures();
    let mut m = temps[0].max_abs();
    for t in &temps {
        for k in g.boundary_nodes() {
            m = m.max(t.values()[k].abs());
        }
    }
    let c = expansion_constants(m, r, g.ambient_dim())?;
    let reach = r + g.max_spacing();
    let u0 = temps[0].values();
    let near = |pred: &dyn Fn(f64) -> bool| -> Vec<bool> {
        let mut mask = vec![false; u0.len()];
        let sp = g.spacing();
        let ri = (reach / sp[0]).floor() as isize;
        let rj = if axes > 1 { (reach / sp[1]).floor() as isize } else { 0 };
        let offsets: Vec<(isize, isize)> = (-rj..=rj)
            .flat_map(|j| (-ri..=ri).map(move |i| (i, j)))
            .filter(|&(i, j)| {
                let dy = if axes > 1 { j as f64 * sp[1] } else { 0.0 };
                let dx = i as f64 * sp[0];
                dx * dx + dy * dy <= reach * reach * (1.0 + 1e-12)
            })
            .collect();
        let nx = g.nodes_along(0) as isize;
        let ny = if axes > 1 { g.nodes_along(1) as isize } else { 1 };
        for k in 0..u0.len() {
            if !pred(u0[k]) {
                continue;
            }
            let (i, j) = g.multi_index(k);
            for &(di, dj) in &offsets {
                let (ii, jj) = (i as isize + di, j as isize + dj);
                if ii >= 0 && ii < nx && jj >= 0 && jj < ny {
                    mask[g.index(ii as usize, jj as usize)] = true;
                }
            }
        }
        mask
    };
    let cold = near(&|v| v <= 0.0);
    let warm = near(&|v| v >= 0.0);
    let mut checked = 0;
    for (s, u) in traj.snapshots().iter().zip(&temps) {
        if s.time() > c.t_r * (1.0 + 1e-12) {
            break;
        }
        checked += 1;
        for (k, &v) in u.values().iter().enumerate() {
            if (v <= 0.0 && !cold[k]) || (v >= 0.0 && !warm[k]) {
                return Ok(ExpansionReport {
                    holds: false,
                    m_bound: m,
                    v: c.v,
                    t_r: c.t_r,
                    snapshots_checked: checked,
                    witness: Some((g.point(k)[..axes].to_vec(), s.time())),
                });
            }
        }
    }
    Ok(ExpansionReport {
        holds: true,
        m_bound: m,
        v: c.v,
        t_r: c.t_r,
        snapshots_checked: checked,
        witness: None,
    })
}

/// Stefan residuals of the two-phase samples, with the front position.
pub fn two_phase_residuals(samples: &[Vec<InterfaceSample>]) -> Vec<(f64, f64, f64)> {
    samples
        .iter()
        .flatten()
        .filter_map(|s| match stefan_residual(s)? {
            StefanResidual::TwoPhase(r) => Some((s.time, s.vn?, r)),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enthalpy::Selection;
    use crate::mesh::Domain;
    use crate::oracles::{oracle_problem, sample_enthalpy, AheadState, ExactSolution, Neumann, TravellingWave};
    use crate::stepper::{solve, BoundaryData, ProblemSpec, SolveOptions};
    use std::sync::Arc;

    fn unit(cells: usize) -> Arc<Grid> {
        Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[cells]).unwrap().shared()
    }

    #[test]
    fn linear_profile() {
        let u = ScalarField::from_fn(unit(9), 0.0, |x| x[0] - 0.5).unwrap();
        let mut set = extract_interface(&u);
        assert_eq!(set.samples.len(), 1);
        let s = &mut set.samples[0];
        assert!((s.position[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.normal, vec![-1.0]);
        let (gp, gm) = one_sided_gradients(&u, s);
        assert!((gp - 1.0).abs() < 1e-12 && (gm - 1.0).abs() < 1e-12);
        assert!(s.two_phase && !s.low_confidence);

        let w = u.map(|v| -v);
        let mut set = extract_interface(&w);
        let s = &mut set.samples[0];
        assert_eq!(s.normal, vec![1.0]);
        let (gp, gm) = one_sided_gradients(&w, s);
        assert!((gp - 1.0).abs() < 1e-12 && (gm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_field_has_no_interface() {
        let u = ScalarField::constant(unit(10), 0.0, 1.0).unwrap();
        let set = extract_interface(&u);
        assert!(set.samples.is_empty() && set.bands.is_empty());
    }

    #[test]
    fn plateaus_are_bands() {
        let u = ScalarField::from_fn(unit(10), 0.0, |x| {
            if x[0] < 0.35 {
                1.0
            } else if x[0] > 0.65 {
                -1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let set = extract_interface(&u);
        assert!(set.samples.is_empty());
        assert_eq!(set.bands.len(), 1);
        assert_eq!(set.bands[0].nodes, vec![4, 5, 6]);
        assert_eq!(set.bands[0].fronts, Some((0.4, 0.6000000000000001)));
    }

    #[test]
    fn circle_normals_are_unit_and_outward() {
        let g = Grid::new(Domain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap(), &[64, 64])
            .unwrap()
            .shared();
        let u = ScalarField::from_fn(g, 0.0, |x| 0.5 - (x[0] * x[0] + x[1] * x[1]).sqrt()).unwrap();
        let set = extract_interface(&u);
        assert!(set.samples.len() > 100);
        for s in &set.samples {
            let n = dot(&s.normal, &s.normal).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
            let r = dot(&s.position, &s.position).sqrt();
            assert!((r - 0.5).abs() < 0.02);
            assert!(dot(&s.normal, &s.position) / r > 0.99);
            // the local linear model vanishes at the sample
            let mut t = s.clone();
            let (gp, gm) = one_sided_gradients(&u, &mut t);
            assert!((gp - 1.0).abs() < 0.05 && (gm - 1.0).abs() < 0.05, "{gp} {gm}");
        }
    }

    #[test]
    fn wave_gradients() {
        let w = TravellingWave::with(1.0, 0.2, AheadState::Bottom).unwrap();
        let h = sample_enthalpy(&w, unit(400), 0.3).unwrap();
        let fronts = enthalpy_fronts(&h).unwrap();
        assert_eq!(fronts.len(), 1);
        let mut s = fronts[0].clone();
        assert!((s.position[0] - w.front(0.3)).abs() <= 1.0 / 400.0);
        let (gp, gm) = one_sided_gradients(&h.temperature(), &mut s);
        assert!((gp - 1.0).abs() < 0.05 && gm == 0.0, "{gp} {gm}");
        assert!(!s.two_phase);
    }

    #[test]
    fn static_equilibrium() {
        let g = unit(9);
        let u = |x: &[f64], _t: f64| x[0] - 0.5;
        let times: Vec<f64> = (0..5).map(|i| 0.01 * i as f64).collect();
        let traj = Trajectory::from_temperature_fn(g, &times, Selection::Maximal, u).unwrap();
        for s in analyze_trajectory(&traj, &AnalysisOptions::default()).iter().flatten() {
            assert_eq!(s.vn, Some(0.0));
            let r = stefan_residual(s).unwrap();
            assert!(matches!(r, StefanResidual::TwoPhase(_)));
            assert!(r.value().abs() < 1e-12);
        }
    }

    #[test]
    fn unmatched_samples() {
        let a = vec![InterfaceSample::at(vec![0.5], 0.0, vec![1.0])];
        let b = vec![InterfaceSample::at(vec![0.6], 0.1, vec![1.0])];
        assert_eq!(normal_velocity(&a, &b, 0.1, 0.01), vec![None]);
        let v = normal_velocity(&a, &b, 0.1, 0.05)[0].unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let c = vec![InterfaceSample::at(vec![0.51], 0.1, vec![-1.0])];
        assert_eq!(normal_velocity(&a, &c, 0.1, 0.05), vec![None]);
    }

    fn wave_front_error(cells: usize) -> f64 {
        let w: Arc<dyn ExactSolution> = Arc::new(TravellingWave::with(1.0, 0.2, AheadState::Bottom).unwrap());
        let spec = oracle_problem(w.clone(), unit(cells), 0.0, 0.5).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit()).unwrap();
        traj.snapshots()
            .iter()
            .skip(1)
            .map(|s| {
                let f = enthalpy_fronts(&s.h).unwrap();
                (f[0].position[0] - w.front(s.time())).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn wave_front_converges() {
        let e: Vec<f64> = [100, 200, 400].iter().map(|&n| wave_front_error(n)).collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1] - 2.0).abs() <= 0.6, "{e:?}");
        }
    }

    fn neumann_worst_residual(cells: usize) -> f64 {
        let sol: Arc<dyn ExactSolution> = Arc::new(Neumann::new(1.0, -0.5).unwrap());
        let spec = oracle_problem(sol, unit(cells), 0.05, 0.1).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit().with_snapshot_every(cells / 50)).unwrap();
        let half = 0.008;
        let all = analyze_trajectory(&traj, &AnalysisOptions::with_half_window(half));
        let res: Vec<_> = two_phase_residuals(&all)
            .into_iter()
            .filter(|(t, _, _)| *t >= half && *t <= 0.1 - half)
            .collect();
        assert!(res.len() > 500);
        res.iter().map(|(_, v, r)| r.abs() / v.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn neumann_residual_converges() {
        let cells = [100usize, 200, 400, 800];
        let worst: Vec<f64> = cells.iter().map(|&n| neumann_worst_residual(n)).collect();
        assert!(worst[3] < 0.1, "{worst:?}");
        let order = crate::oracles::fitted_order(&cells.map(|n| 1.0 / n as f64), &worst);
        assert!(order >= 0.8, "{worst:?} order {order}");
    }

    fn wave_worst_slack(cells: usize) -> f64 {
        let w: Arc<dyn ExactSolution> = Arc::new(TravellingWave::with(1.0, 0.2, AheadState::Bottom).unwrap());
        let spec = oracle_problem(w, unit(cells), 0.0, 0.5).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit().with_snapshot_every(cells / 50)).unwrap();
        let half = 0.05;
        analyze_trajectory(&traj, &AnalysisOptions::with_half_window(half))
            .iter()
            .flatten()
            .filter(|s| s.time >= half && s.time <= 0.5 - half)
            .map(|s| match stefan_residual(s).unwrap() {
                StefanResidual::LiquidSlack(r) => r.abs(),
                other => panic!("{other:?}"),
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn wave_slack_converges() {
        let cells = [100usize, 200, 400];
        let worst: Vec<f64> = cells.iter().map(|&n| wave_worst_slack(n)).collect();
        let order = crate::oracles::fitted_order(&cells.map(|n| 1.0 / n as f64), &worst);
        assert!(order >= 0.8, "{worst:?} order {order}");
    }

    #[test]
    fn neumann_front_within_a_cell() {
        let sol = Neumann::new(1.0, -0.5).unwrap();
        let g = Grid::new(Domain::interval(0.0, 3.0).unwrap(), &[300]).unwrap().shared();
        let u = crate::oracles::sample_temperature(&sol, g.clone(), 1.0).unwrap();
        let set = extract_interface(&u);
        assert_eq!(set.samples.len(), 1);
        assert!((set.samples[0].position[0] - sol.front(1.0)).abs() <= g.max_spacing());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn samples_sit_on_the_zero_set(
            cx in -0.3f64..0.3,
            cy in -0.3f64..0.3,
            r in 0.2f64..0.6,
            tilt in -1.0f64..1.0,
        ) {
            let g = Grid::new(Domain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap(), &[40, 40])
                .unwrap()
                .shared();
            let u = ScalarField::from_fn(g, 0.0, |x| {
                r * r - (x[0] - cx).powi(2) - (x[1] - cy).powi(2) + tilt * x[0] * 0.1
            })
            .unwrap();
            for s in extract_interface(&u).samples {
                let n = dot(&s.normal, &s.normal).sqrt();
                proptest::prop_assert!((n - 1.0).abs() < 1e-12);
                proptest::prop_assert!(interpolate(&u, &s.position).unwrap().abs() < 1e-10);
            }
        }
    }

    fn warm_disk(cells: usize, r_cells: f64, edit: bool) -> ExpansionReport {
        let g = Grid::new(Domain::rectangle([-1.0, -1.0], [1.0, 1.0]).unwrap(), &[cells, cells])
            .unwrap()
            .shared();
        let u0 = |x: &[f64]| if x[0] * x[0] + x[1] * x[1] < 0.25 { 1.0 } else { -1.0 };
        let h0 = EnthalpyField::from_temperature_fn(g.clone(), 0.0, Selection::Maximal, u0).unwrap();
        let r = r_cells * g.max_spacing();
        let t_r = expansion_constants(1.0, r, 2).unwrap().t_r;
        let spec = ProblemSpec::new(h0, BoundaryData::constant(-1.0), t_r).unwrap();
        let mut traj = solve(&spec, &SolveOptions::explicit().with_snapshot_every(1)).unwrap();
        if edit {
            let last = traj.len() - 1;
            let k = g.index(cells / 2, cells / 2);
            traj.snapshots_mut()[last].h.field_mut().values_mut()[k] = -2.0;
        }
        expansion_bound_check(&traj, r).unwrap()
    }

    #[test]
    fn expansion_bound() {
        let rep = warm_disk(60, 5.0, false);
        assert!(rep.holds && rep.snapshots_checked > 1, "{rep:?}");
        let rep = warm_disk(60, 5.0, true);
        assert!(!rep.holds);
        assert_eq!(rep.witness.unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn no_cold_set_is_trivially_included() {
        let g = unit(50);
        let h0 = EnthalpyField::from_temperature_fn(g, 0.0, Selection::Maximal, |x| 1.0 + x[0]).unwrap();
        let spec = ProblemSpec::new(h0, BoundaryData::new(|x, _| 1.0 + x[0]), 0.01).unwrap();
        let traj = solve(&spec, &SolveOptions::explicit()).unwrap();
        assert!(expansion_bound_check(&traj, 0.1).unwrap().holds);
    }
}
