//! Closed-form reference solutions and the epsilon-regularized family.

use std::f64::consts::PI;
use std::sync::Arc;

use libm::{erf, erfc};

use crate::enthalpy::{chi, EnthalpyField, Selection};
use crate::error::{Error, Result};
use crate::mesh::{Grid, ScalarField};
use crate::stepper::{solve, BoundaryData, ProblemSpec, SolveOptions, Trajectory};

/// A planar exact solution on `x >= 0` with a single front.
pub trait ExactSolution: Send + Sync {
    fn u(&self, x: f64, t: f64) -> f64;
    fn u_x(&self, x: f64, t: f64) -> f64;
    fn u_t(&self, x: f64, t: f64) -> f64;
    fn h(&self, x: f64, t: f64) -> f64;
    fn front(&self, t: f64) -> f64;
    fn front_speed(&self, t: f64) -> f64;
    /// Times on which the closed form is defined.
    fn validity(&self) -> (f64, f64);
    /// Selection that reproduces the enthalpy at zero temperature.
    fn selection(&self) -> Selection;

    /// One-sided gradient magnitudes at the front, liquid side first.
    fn front_gradients(&self, t: f64) -> (f64, f64) {
        let x = self.front(t);
        let s = 1e-9 * (1.0 + x);
        (self.u_x(x - s, t).abs(), self.u_x(x + s, t).abs())
    }
}

/// Enthalpy carried ahead of a one-phase front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AheadState {
    /// `h = 0`: top of the mushy interval.
    Top,
    /// `h = -1`: the latent heat is still to be supplied.
    Bottom,
}

impl AheadState {
    pub fn enthalpy(self) -> f64 {
        match self {
            AheadState::Top => 0.0,
            AheadState::Bottom => -1.0,
        }
    }
}

/// `u = exp(V(Vt + x0 - x)) - 1` behind the front `X(t) = x0 + Vt`, `u = 0`
/// ahead of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravellingWave {
    pub speed: f64,
    pub offset: f64,
    pub ahead: AheadState,
}

impl TravellingWave {
    /// Ahead-state `h = -1`, fixed by the calibration test below.
    pub fn new(speed: f64) -> Result<Self> {
        Self::with(speed, 0.0, AheadState::Bottom)
    }

    pub fn with(speed: f64, offset: f64, ahead: AheadState) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wave speed must be positive, got {speed}"
            )));
        }
        Ok(Self {
            speed,
            offset,
            ahead,
        })
    }
}

impl ExactSolution for TravellingWave {
    fn u(&self, x: f64, t: f64) -> f64 {
        let xi = self.front(t) - x;
        if xi >= 0.0 {
            (self.speed * xi).exp_m1()
        } else {
            0.0
        }
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        let xi = self.front(t) - x;
        if xi >= 0.0 {
            -self.speed * (self.speed * xi).exp()
        } else {
            0.0
        }
    }

    fn u_t(&self, x: f64, t: f64) -> f64 {
        let xi = self.front(t) - x;
        if xi >= 0.0 {
            self.speed * self.speed * (self.speed * xi).exp()
        } else {
            0.0
        }
    }

    fn h(&self, x: f64, t: f64) -> f64 {
        if x <= self.front(t) {
            self.u(x, t)
        } else {
            self.ahead.enthalpy()
        }
    }

    fn front(&self, t: f64) -> f64 {
        self.offset + self.speed * t
    }

    fn front_speed(&self, _t: f64) -> f64 {
        self.speed
    }

    fn validity(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn selection(&self) -> Selection {
        match self.ahead {
            AheadState::Top => Selection::Maximal,
            AheadState::Bottom => Selection::Minimal,
        }
    }
}

/// Two-phase similarity solution: liquid at `u_hot > 0` on the wall `x = 0`,
/// solid at `u_cold < 0` far away, front `X(t) = 2 lambda sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neumann {
    pub u_hot: f64,
    pub u_cold: f64,
    pub lambda: f64,
}

/// Latent-heat balance `lambda sqrt(pi) - exp(-lambda^2)(u_hot/erf + u_cold/erfc)`.
pub fn neumann_balance(lambda: f64, u_hot: f64, u_cold: f64) -> f64 {
    lambda * PI.sqrt() - (-lambda * lambda).exp() * (u_hot / erf(lambda) + u_cold / erfc(lambda))
}

pub const NEUMANN_BRACKET: (f64, f64) = (1e-6, 10.0);

impl Neumann {
    pub fn new(u_hot: f64, u_cold: f64) -> Result<Self> {
        if !(u_hot > 0.0) || !(u_cold <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need u_hot > 0 and u_cold <= 0, got {u_hot}, {u_cold}"
            )));
        }
        let (mut lo, mut hi) = NEUMANN_BRACKET;
        let f = |l: f64| neumann_balance(l, u_hot, u_cold);
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo.signum() != fhi.signum() && flo.is_finite() && fhi.is_finite()) {
            return Err(Error::NoBracket { lo, hi });
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            u_hot,
            u_cold,
            lambda: 0.5 * (lo + hi),
        })
    }

    fn xi(x: f64, t: f64) -> f64 {
        x / (2.0 * t.sqrt())
    }
}

impl ExactSolution for Neumann {
    fn u(&self, x: f64, t: f64) -> f64 {
        let xi = Self::xi(x, t);
        if xi <= self.lambda {
            self.u_hot * (1.0 - erf(xi) / erf(self.lambda))
        } else {
            self.u_cold * (1.0 - erfc(xi) / erfc(self.lambda))
        }
    }

    fn u_x(&self, x: f64, t: f64) -> f64 {
        let xi = Self::xi(x, t);
        let g = 2.0 / PI.sqrt() * (-xi * xi).exp() / (2.0 * t.sqrt());
        if xi <= self.lambda {
            -self.u_hot * g / erf(self.lambda)
        } else {
            self.u_cold * g / erfc(self.lambda)
        }
    }

    fn u_t(&self, x: f64, t: f64) -> f64 {
        let xi = Self::xi(x, t);
        let g = 2.0 / PI.sqrt() * (-xi * xi).exp() * xi / (2.0 * t);
        if xi <= self.lambda {
            self.u_hot * g / erf(self.lambda)
        } else {
            -self.u_cold * g / erfc(self.lambda)
        }
    }

    fn h(&self, x: f64, t: f64) -> f64 {
        if Self::xi(x, t) <= self.lambda {
            self.u(x, t)
        } else {
            self.u(x, t) - 1.0
        }
    }

    fn front(&self, t: f64) -> f64 {
        2.0 * self.lambda * t.sqrt()
    }

    fn front_speed(&self, t: f64) -> f64 {
        self.lambda / t.sqrt()
    }

    fn validity(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn selection(&self) -> Selection {
        Selection::Maximal
    }
}

/// `u_t - u_xx` with a centered second difference of step `dx`.
pub fn stencil_residual(sol: &dyn ExactSolution, x: f64, t: f64, dx: f64) -> f64 {
    let uxx = (sol.u(x + dx, t) - 2.0 * sol.u(x, t) + sol.u(x - dx, t)) / (dx * dx);
    sol.u_t(x, t) - uxx
}

/// Problem on an interval grid seeded from `sol` at physical time `t0`;
/// solver time `s` corresponds to physical time `t0 + s`.
pub fn oracle_problem(
    sol: Arc<dyn ExactSolution>,
    grid: Arc<Grid>,
    t0: f64,
    duration: f64,
) -> Result<ProblemSpec> {
    let h0 = EnthalpyField::new(ScalarField::from_fn(grid, 0.0, |x| sol.h(x[0], t0))?);
    let s = sol.clone();
    let theta = BoundaryData::new(move |x, t| s.u(x[0], t0 + t));
    Ok(ProblemSpec::new(h0, theta, duration)?.with_boundary_selection(sol.selection()))
}

/// Weighted L1 distances of enthalpy and temperature from the oracle.
pub fn l1_errors(h: &EnthalpyField, sol: &dyn ExactSolution, t_phys: f64) -> (f64, f64) {
    let g = h.grid();
    let mut eh = 0.0;
    let mut eu = 0.0;
    for (k, &v) in h.values().iter().enumerate() {
        let x = g.point(k)[0];
        let w = g.node_weight(k);
        eh += w * (v - sol.h(x, t_phys)).abs();
        eu += w * (chi(v) - sol.u(x, t_phys)).abs();
    }
    (eh, eu)
}

#[derive(Debug, Clone)]
pub struct EpsilonMember {
    pub eps: f64,
    /// Data `u0 + eps`, `theta + eps`.
    pub upper: Trajectory,
    /// Data `u0 - eps`, `theta - eps`.
    pub lower: Trajectory,
}

/// Solves with data shifted by `+-2^-j` for `j = 0..=depth`, in parallel.
pub fn epsilon_family(
    grid: Arc<Grid>,
    u0: &(dyn Fn(&[f64]) -> f64 + Sync),
    theta: &BoundaryData,
    final_time: f64,
    depth: usize,
    opts: &SolveOptions,
) -> Result<Vec<EpsilonMember>> {
    let run = |shift: f64| -> Result<Trajectory> {
        let u = ScalarField::from_fn(grid.clone(), 0.0, |x| u0(x) + shift)?;
        let h0 = EnthalpyField::from_temperature(&u, Selection::Maximal);
        let spec = ProblemSpec::new(h0, theta.shifted(shift), final_time)?;
        solve(&spec, opts)
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..=depth)
            .map(|j| {
                let eps = 0.5f64.powi(j as i32);
                let run = &run;
                scope.spawn(move || -> Result<EpsilonMember> {
                    Ok(EpsilonMember {
                        eps,
                        upper: run(eps)?,
                        lower: run(-eps)?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("epsilon solve panicked"))
            .collect()
    })
}

/// Max nodal temperature gap between consecutive members, over all snapshots.
pub fn cauchy_gaps(family: &[EpsilonMember], upper: bool) -> Vec<f64> {
    family
        .windows(2)
        .map(|w| {
            let (a, b) = if upper {
                (&w[0].upper, &w[1].upper)
            } else {
                (&w[0].lower, &w[1].lower)
            };
            a.snapshots()
                .iter()
                .zip(b.snapshots())
                .flat_map(|(p, q)| {
                    p.h.values()
                        .iter()
                        .zip(q.h.values())
                        .map(|(x, y)| (chi(*x) - chi(*y)).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// True when the upper family decreases and the lower family increases in
/// `j`, nodewise and exactly.
pub fn family_is_monotone(family: &[EpsilonMember]) -> bool {
    family.windows(2).all(|w| {
        let ordered = |a: &Trajectory, b: &Trajectory| {
            a.snapshots().iter().zip(b.snapshots()).all(|(p, q)| {
                p.h.values().iter().zip(q.h.values()).all(|(x, y)| x <= y)
            })
        };
        ordered(&w[1].upper, &w[0].upper) && ordered(&w[0].lower, &w[1].lower)
    })
}

/// Least-squares slope of `ln err` against `ln dx`.
pub fn fitted_order(dx: &[f64], err: &[f64]) -> f64 {
    let n = dx.len().min(err.len()) as f64;
    let xs: Vec<f64> = dx.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Temperature samples of a solution on a uniform grid, for export.
pub fn sample_temperature(
    sol: &dyn ExactSolution,
    grid: Arc<Grid>,
    t: f64,
) -> Result<ScalarField> {
    ScalarField::from_fn(grid, t, |x| sol.u(x[0], t))
}

/// Enthalpy of `sol` at `t` via the solution's own selection at `u = 0`.
pub fn sample_enthalpy(sol: &dyn ExactSolution, grid: Arc<Grid>, t: f64) -> Result<EnthalpyField> {
    Ok(EnthalpyField::new(ScalarField::from_fn(grid, t, |x| {
        sol.h(x[0], t)
    })?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    fn unit(cells: usize) -> Arc<Grid> {
        Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[cells])
            .unwrap()
            .shared()
    }

    #[test]
    fn wave_front_identities() {
        let w = TravellingWave::new(1.3).unwrap();
        let t = 0.2;
        assert_eq!(w.front(t), 1.3 * t);
        assert_eq!(w.u(w.front(t), t), 0.0);
        let (p, m) = w.front_gradients(t);
        assert!((p - 1.3).abs() < 1e-8);
        assert_eq!(m, 0.0);
        assert!(TravellingWave::new(0.0).is_err());
    }

    #[test]
    fn wave_is_caloric_behind_front() {
        let w = TravellingWave::new(1.0).unwrap();
        let dx = 1.0 / 400.0;
        for t in [0.1, 0.3, 0.5] {
            let mut x = dx;
            while x < w.front(t) - 2.0 * dx {
                let r = stencil_residual(&w, x, t, dx);
                assert!(r.abs() <= 1e-6, "residual {r} at x={x}, t={t}");
                x += dx;
            }
        }
    }

    #[test]
    fn neumann_balance_is_solved() {
        let n = Neumann::new(1.0, -0.5).unwrap();
        assert!(neumann_balance(n.lambda, 1.0, -0.5).abs() <= 1e-8);
        // Stefan condition at the front
        for t in [0.05, 0.3, 1.0] {
            let (gp, gm) = n.front_gradients(t);
            let r = n.front_speed(t) - (gp - gm);
            assert!(r.abs() <= 1e-6 * n.front_speed(t), "t={t} r={r}");
        }
        assert_eq!(n.u(0.0, 0.3), 1.0);
        assert!(n.u(n.front(0.3), 0.3).abs() < 1e-12);
    }

    #[test]
    fn neumann_lambda_decreases_with_cold_side() {
        let ls: Vec<f64> = [0.0, -0.25, -0.5, -1.0, -2.0]
            .iter()
            .map(|&c| Neumann::new(1.0, c).unwrap().lambda)
            .collect();
        assert!(ls.windows(2).all(|w| w[1] < w[0]), "{ls:?}");
    }

    #[test]
    fn neumann_balance_monotone_in_cold_side_over_lambda_grid() {
        for k in 1..100 {
            let l = 0.02 * k as f64;
            let a = neumann_balance(l, 1.0, -0.5);
            let b = neumann_balance(l, 1.0, -1.0);
            assert!(b > a);
        }
    }

    #[test]
    fn neumann_is_caloric_away_from_front() {
        let n = Neumann::new(1.0, -0.5).unwrap();
        let dx = 1.0 / 400.0;
        // the truncation term dx^2/12 u_xxxx decays like 1/t^2
        for t in [1.0, 2.0] {
            let xf = n.front(t);
            let mut x = dx;
            while x < 1.0 {
                if (x - xf).abs() > 2.0 * dx {
                    let r = stencil_residual(&n, x, t, dx);
                    assert!(r.abs() <= 1e-6, "residual {r} at x={x}, t={t}");
                }
                x += dx;
            }
        }
    }

    #[test]
    fn bad_neumann_parameters() {
        assert!(Neumann::new(-1.0, -0.5).is_err());
        assert!(Neumann::new(1.0, 0.5).is_err());
    }

    fn discrete_front(h: &EnthalpyField) -> f64 {
        // melted amount: each node contributes its liquid fraction
        let g = h.grid();
        (0..g.node_count())
            .map(|k| g.node_weight(k) * (h.values()[k] + 1.0).clamp(0.0, 1.0))
            .sum()
    }

    /// Runs both candidate ahead-states from the exact profile and keeps the
    /// one whose discrete front follows `X(t) = Vt`.
    #[test]
    fn calibrate_wave_ahead_state() {
        let g = unit(200);
        let t_end = 0.3;
        let mut errs = Vec::new();
        for ahead in [AheadState::Top, AheadState::Bottom] {
            let w = Arc::new(TravellingWave::with(1.0, 0.2, ahead).unwrap());
            let spec = oracle_problem(w.clone(), g.clone(), 0.0, t_end).unwrap();
            let traj = solve(&spec, &SolveOptions::explicit()).unwrap();
            let err = (discrete_front(traj.last()) - w.front(t_end)).abs();
            errs.push((ahead, err));
        }
        let best = errs
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(best.0, AheadState::Bottom, "{errs:?}");
        assert!(best.1 < 0.02, "{errs:?}");
        // the frozen default
        assert_eq!(TravellingWave::new(1.0).unwrap().ahead, AheadState::Bottom);
    }

    #[test]
    fn wave_l1_error_shrinks() {
        let t_end = 0.2;
        let errs: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&c| {
                let w = Arc::new(TravellingWave::with(1.0, 0.2, AheadState::Bottom).unwrap());
                let spec = oracle_problem(w.clone(), unit(c), 0.0, t_end).unwrap();
                let traj = solve(&spec, &SolveOptions::explicit()).unwrap();
                l1_errors(traj.last(), w.as_ref(), t_end).0
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn epsilon_family_small() {
        let g = unit(40);
        let u0 = |x: &[f64]| if (x[0] - 0.5).abs() < 0.2 { 0.0 } else { -0.5 };
        let fam = epsilon_family(
            g,
            &u0,
            &BoundaryData::constant(-0.5),
            0.02,
            3,
            &SolveOptions::explicit(),
        )
        .unwrap();
        assert_eq!(fam.len(), 4);
        assert!(family_is_monotone(&fam));
        let gaps = cauchy_gaps(&fam, true);
        assert_eq!(gaps.len(), 3);
    }
}
