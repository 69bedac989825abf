//! Radially symmetric classical sub- and supersolutions with closed-form
//! derivatives, their parameter selection, and a sampling classifier.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quasi::{halton, radical_inverse};

/// Margin separating strict inequalities from ties.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Sub,
    Super,
}

impl Kind {
    pub fn flipped(self) -> Self {
        match self {
            Kind::Sub => Kind::Super,
            Kind::Super => Kind::Sub,
        }
    }
}

/// A function of `(rho, t)` with `rho = |x - center|` in `R^n`.
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, rho: f64, t: f64) -> f64;
    fn d_rho(&self, rho: f64, t: f64) -> f64;
    fn d_rho2(&self, rho: f64, t: f64) -> f64;
    fn d_t(&self, rho: f64, t: f64) -> f64;

    fn laplacian(&self, rho: f64, t: f64) -> f64 {
        let n = self.dim() as f64;
        let d2 = self.d_rho2(rho, t);
        if n > 1.0 {
            d2 + (n - 1.0) / rho * self.d_rho(rho, t)
        } else {
            d2
        }
    }

    /// Radius of the zero set at time `t`, if the profile changes sign.
    fn front_radius(&self, t: f64) -> Option<f64>;
    /// `R'(t)`.
    fn front_speed(&self, t: f64) -> f64;
    /// `d phi / d rho` just outside and just inside the front.
    fn one_sided_slopes(&self, t: f64) -> (f64, f64);
    fn validity_times(&self) -> (f64, f64);
    fn validity_radii(&self, t: f64) -> (f64, f64);
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarrierParams {
    Appendix(AppendixBarrierParams),
    Paraboloid(ParaboloidParams),
    Power(PowerParams),
    SqrtProfile(SqrtProfileParams),
    Expansion(ExpansionParams),
    Negated(Box<BarrierParams>),
    Scaled {
        a: f64,
        b: f64,
        c: f64,
        inner: Box<BarrierParams>,
    },
    Custom(String),
}

#[derive(Debug, Clone)]
pub struct Barrier {
    profile: Arc<dyn RadialProfile>,
    center: Vec<f64>,
    kind: Kind,
    params: BarrierParams,
}

impl Barrier {
    pub fn from_profile(profile: Arc<dyn RadialProfile>, kind: Kind, params: BarrierParams) -> Self {
        Self {
            profile,
            center: Vec::new(),
            kind,
            params,
        }
    }

    pub fn profile(&self) -> &Arc<dyn RadialProfile> {
        &self.profile
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn params(&self) -> &BarrierParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn translated(mut self, center: &[f64]) -> Self {
        self.center = center.to_vec();
        self
    }

    /// Distance from the center; missing coordinates count as zero.
    pub fn rho(&self, x: &[f64]) -> f64 {
        let len = x.len().max(self.center.len());
        (0..len)
            .map(|i| {
                let d = x.get(i).copied().unwrap_or(0.0) - self.center.get(i).copied().unwrap_or(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.profile.value(self.rho(x), t)
    }

    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let rho = self.rho(x);
        let d = self.profile.d_rho(rho, t);
        if rho == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter()
            .enumerate()
            .map(|(i, &xi)| d * (xi - self.center.get(i).copied().unwrap_or(0.0)) / rho)
            .collect()
    }

    pub fn d_t(&self, x: &[f64], t: f64) -> f64 {
        self.profile.d_t(self.rho(x), t)
    }

    pub fn laplacian(&self, x: &[f64], t: f64) -> f64 {
        self.profile.laplacian(self.rho(x), t)
    }

    pub fn front_radius(&self, t: f64) -> Option<f64> {
        self.profile.front_radius(t)
    }

    pub fn validity_times(&self) -> (f64, f64) {
        self.profile.validity_times()
    }

    pub fn validity_radii(&self, t: f64) -> (f64, f64) {
        self.profile.validity_radii(t)
    }

    /// Whether `(x, t)` lies in the closed validity region.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        let (t0, t1) = self.validity_times();
        if t < t0 || t > t1 {
            return false;
        }
        let (r0, r1) = self.validity_radii(t);
        let rho = self.rho(x);
        rho >= r0 && rho <= r1
    }

    /// `-phi`, which swaps sub and super.
    pub fn negated(&self) -> Self {
        Self {
            profile: Arc::new(Negated(self.profile.clone())),
            center: self.center.clone(),
            kind: self.kind.flipped(),
            params: BarrierParams::Negated(Box::new(self.params.clone())),
        }
    }

    /// `a phi(b x, a b^2 t + c)` about the same center.
    pub fn scaled(&self, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c >= 0.0) || !(a * b * b).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scaling needs a, b > 0 and c >= 0, got ({a}, {b}, {c})"
            )));
        }
        Ok(Self {
            profile: Arc::new(Scaled {
                inner: self.profile.clone(),
                a,
                b,
                c,
            }),
            center: self.center.iter().map(|x| x / b).collect(),
            kind: self.kind,
            params: BarrierParams::Scaled {
                a,
                b,
                c,
                inner: Box::new(self.params.clone()),
            },
        })
    }

    pub fn classify(&self, samples: usize) -> ClassificationReport {
        classify_candidate(self.profile.as_ref(), samples, Some(self.kind))
    }
}

#[derive(Debug)]
struct Negated(Arc<dyn RadialProfile>);

impl RadialProfile for Negated {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        -self.0.value(rho, t)
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        -self.0.d_rho(rho, t)
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        -self.0.d_rho2(rho, t)
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        -self.0.d_t(rho, t)
    }
    fn laplacian(&self, rho: f64, t: f64) -> f64 {
        -self.0.laplacian(rho, t)
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        self.0.front_radius(t)
    }
    fn front_speed(&self, t: f64) -> f64 {
        self.0.front_speed(t)
    }
    fn one_sided_slopes(&self, t: f64) -> (f64, f64) {
        let (o, i) = self.0.one_sided_slopes(t);
        (-o, -i)
    }
    fn validity_times(&self) -> (f64, f64) {
        self.0.validity_times()
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        self.0.validity_radii(t)
    }
}

#[derive(Debug)]
struct Scaled {
    inner: Arc<dyn RadialProfile>,
    a: f64,
    b: f64,
    c: f64,
}

impl Scaled {
    fn time(&self, t: f64) -> f64 {
        self.a * self.b * self.b * t + self.c
    }
}

impl RadialProfile for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        self.a * self.inner.value(self.b * rho, self.time(t))
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        self.a * self.b * self.inner.d_rho(self.b * rho, self.time(t))
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        self.a * self.b * self.b * self.inner.d_rho2(self.b * rho, self.time(t))
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        self.a * self.a * self.b * self.b * self.inner.d_t(self.b * rho, self.time(t))
    }
    fn laplacian(&self, rho: f64, t: f64) -> f64 {
        self.a * self.b * self.b * self.inner.laplacian(self.b * rho, self.time(t))
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        self.inner.front_radius(self.time(t)).map(|r| r / self.b)
    }
    fn front_speed(&self, t: f64) -> f64 {
        self.a * self.b * self.inner.front_speed(self.time(t))
    }
    fn one_sided_slopes(&self, t: f64) -> (f64, f64) {
        let (o, i) = self.inner.one_sided_slopes(self.time(t));
        let s = self.a * self.b;
        (s * o, s * i)
    }
    fn validity_times(&self) -> (f64, f64) {
        let (t0, t1) = self.inner.validity_times();
        let k = self.a * self.b * self.b;
        ((t0 - self.c) / k, (t1 - self.c) / k)
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        let (r0, r1) = self.inner.validity_radii(self.time(t));
        (r0 / self.b, r1 / self.b)
    }
}

// ---------------------------------------------------------------------------
// Appendix test functions

/// Inputs of the two-sided test function `phi_0(|x| - R - m t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixSpec {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub speed: f64,
    pub eps: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixBarrierParams {
    pub spec: AppendixSpec,
    pub q: f64,
    pub tau: f64,
    pub delta: f64,
    pub margin: f64,
}

/// One-sided limits of `(d_t - lap) phi` at `rho -> R+` and `rho -> R-`.
pub fn appendix_one_sided_limits(spec: &AppendixSpec, radius: f64, q: f64) -> (f64, f64) {
    let k = spec.speed + (spec.dim as f64 - 1.0) / radius;
    (-spec.alpha * k - q, spec.beta * k - q)
}

impl AppendixBarrierParams {
    pub fn new(spec: AppendixSpec, kind: Kind) -> Result<Self> {
        let AppendixSpec {
            alpha,
            beta,
            radius,
            speed: m,
            eps,
            dim,
        } = spec;
        let bad = |s: &str| Err(Error::BarrierParams(s.to_string()));
        if !(alpha.is_finite() && beta.is_finite() && m.is_finite()) {
            return bad("non-finite slope or speed");
        }
        if alpha == 0.0 || beta == 0.0 {
            return bad("alpha and beta must be nonzero");
        }
        if alpha.signum() == beta.signum() {
            return bad("sign alpha != sign beta violated");
        }
        if !(radius > 0.0) || !(eps > 0.0) || dim == 0 {
            return bad("need R > 0, eps > 0 and n >= 1");
        }
        let lhs = m * beta.signum();
        let rhs = alpha + beta;
        if lhs == rhs {
            return bad("alpha + beta != m sign beta violated");
        }
        match kind {
            Kind::Super if !(lhs > rhs) => {
                return bad("supersolution needs m sign beta > alpha + beta")
            }
            Kind::Sub if !(lhs < rhs) => return bad("subsolution needs m sign beta < alpha + beta"),
            _ => {}
        }
        let nm1 = dim as f64 - 1.0;
        let margin = 0.1 * (1.0 + alpha.abs() + beta.abs()) * (1.0 + m.abs() + nm1 / radius);
        let tau_max = radius / (4.0 * m.abs() + 4.0);
        let radii = [radius - m.abs() * tau_max, radius + m.abs() * tau_max];
        let q = match kind {
            Kind::Super => {
                radii
                    .iter()
                    .map(|&r| {
                        let (o, i) = appendix_one_sided_limits(&spec, r, 0.0);
                        o.min(i)
                    })
                    .fold(f64::INFINITY, f64::min)
                    - margin
            }
            Kind::Sub => {
                radii
                    .iter()
                    .map(|&r| {
                        let (o, i) = appendix_one_sided_limits(&spec, r, 0.0);
                        o.max(i)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
                    + margin
            }
        };
        // keeps the interior operator within margin/2 of its front limits
        let spread = (m.abs() + 2.0 * nm1 / radius) * q.abs()
            + alpha.abs().max(beta.abs()) * nm1 * 8.0 / (3.0 * radius * radius);
        let delta_pde = if spread > 0.0 {
            0.5 * margin / spread
        } else {
            f64::INFINITY
        };
        let delta = (eps / (q.abs() + 1.0)).min(radius / 4.0).min(delta_pde);
        let tau = (delta / (2.0 * m.abs() + 1.0)).min(tau_max);
        if !(radius - m.abs() * tau - delta > 0.0) {
            return bad("R - |m| tau - delta > 0 violated");
        }
        Ok(Self {
            spec,
            q,
            tau,
            delta,
            margin,
        })
    }

    /// `|D phi+| - |D phi-|` on the front.
    pub fn gradient_jump(&self) -> f64 {
        self.spec.alpha + self.spec.beta
    }

    /// Normal velocity of the front with respect to `{phi > 0}`.
    pub fn normal_velocity(&self) -> f64 {
        if self.spec.beta < 0.0 {
            -self.spec.speed
        } else {
            self.spec.speed
        }
    }

    fn front(&self, t: f64) -> f64 {
        self.spec.radius + self.spec.speed * t
    }

    fn phi0(&self, s: f64) -> [f64; 2] {
        let slope = if s >= 0.0 {
            self.spec.alpha
        } else {
            -self.spec.beta
        };
        [slope * s + 0.5 * self.q * s * s, slope + self.q * s]
    }

    /// Largest deviations `|phi/(rho-R_t) - alpha|` and `|phi/(R_t-rho) - beta|`
    /// over samples of the shell.
    pub fn eps_closeness(&self, samples: usize) -> (f64, f64) {
        let mut out = (0.0f64, 0.0f64);
        // phi depends on (rho, t) through s = rho - R_t only
        for p in halton(samples, 1) {
            let s = (2.0 * p[0] - 1.0) * self.delta;
            if s == 0.0 {
                continue;
            }
            let v = self.phi0(s)[0];
            if s > 0.0 {
                out.0 = out.0.max((v / s - self.spec.alpha).abs());
            } else {
                out.1 = out.1.max((v / -s - self.spec.beta).abs());
            }
        }
        out
    }
}

impl RadialProfile for AppendixBarrierParams {
    fn dim(&self) -> usize {
        self.spec.dim
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        self.phi0(rho - self.front(t))[0]
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        self.phi0(rho - self.front(t))[1]
    }
    fn d_rho2(&self, _rho: f64, _t: f64) -> f64 {
        self.q
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        -self.spec.speed * self.phi0(rho - self.front(t))[1]
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        Some(self.front(t))
    }
    fn front_speed(&self, _t: f64) -> f64 {
        self.spec.speed
    }
    fn one_sided_slopes(&self, _t: f64) -> (f64, f64) {
        (self.spec.alpha, -self.spec.beta)
    }
    fn validity_times(&self) -> (f64, f64) {
        (-self.tau, 0.0)
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        let r = self.front(t);
        (r - self.delta, r + self.delta)
    }
}

pub fn make_appendix_barrier(spec: AppendixSpec, kind: Kind) -> Result<Barrier> {
    let p = AppendixBarrierParams::new(spec, kind)?;
    Ok(Barrier::from_profile(
        Arc::new(p),
        kind,
        BarrierParams::Appendix(p),
    ))
}

// ---------------------------------------------------------------------------
// Shrinking paraboloid

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaboloidParams {
    pub m_bound: f64,
    pub h: f64,
    pub eta: f64,
    pub dim: usize,
    pub a: f64,
    pub omega: f64,
    pub t_min: f64,
}

impl ParaboloidParams {
    fn front(&self, t: f64) -> f64 {
        self.h - self.omega * t
    }

    fn outer_slope(&self) -> f64 {
        2.0 * self.m_bound / self.eta
    }
}

impl RadialProfile for ParaboloidParams {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if rho <= r {
            self.a * (rho * rho - r * r)
        } else {
            self.outer_slope() * (rho - r)
        }
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        if rho <= self.front(t) {
            2.0 * self.a * rho
        } else {
            self.outer_slope()
        }
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        if rho <= self.front(t) {
            2.0 * self.a
        } else {
            0.0
        }
    }
    fn laplacian(&self, rho: f64, t: f64) -> f64 {
        if rho <= self.front(t) {
            2.0 * self.a * self.dim as f64
        } else {
            self.outer_slope() * (self.dim as f64 - 1.0) / rho
        }
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if rho <= r {
            2.0 * self.a * r * self.omega
        } else {
            self.outer_slope() * self.omega
        }
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        Some(self.front(t))
    }
    fn front_speed(&self, _t: f64) -> f64 {
        -self.omega
    }
    fn one_sided_slopes(&self, t: f64) -> (f64, f64) {
        (self.outer_slope(), 2.0 * self.a * self.front(t))
    }
    fn validity_times(&self) -> (f64, f64) {
        (self.t_min, 0.0)
    }
    fn validity_radii(&self, _t: f64) -> (f64, f64) {
        (0.0, self.h + self.eta)
    }
}

/// `a(|x|^2 - (h - w t)^2)` inside the shrinking sphere, `(2M/eta)(|x| - h + w t)`
/// outside, with `w = 2 max(2M/eta, n/h)`.
pub fn make_shrinking_paraboloid(m_bound: f64, h: f64, eta: f64, n: usize, a: f64) -> Result<Barrier> {
    if !(m_bound > 0.0 && h > 0.0 && eta > 0.0 && a > 0.0) || n == 0 {
        return Err(Error::BarrierParams(
            "paraboloid needs M, h, eta, a > 0 and n >= 1".into(),
        ));
    }
    let omega = 2.0 * (2.0 * m_bound / eta).max(n as f64 / h);
    let t_min = -0.5 * eta * (eta / (2.0 * m_bound)).min(h / n as f64);
    let p = ParaboloidParams {
        m_bound,
        h,
        eta,
        dim: n,
        a,
        omega,
        t_min,
    };
    Ok(Barrier::from_profile(
        Arc::new(p),
        Kind::Super,
        BarrierParams::Paraboloid(p),
    ))
}

// ---------------------------------------------------------------------------
// Power barrier

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub dim: usize,
    pub omega: f64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
}

impl PowerParams {
    fn front(&self, t: f64) -> f64 {
        self.h - self.omega * t
    }

    fn coef(&self, rho: f64, t: f64) -> f64 {
        if rho >= self.front(t) {
            self.a
        } else {
            self.b
        }
    }

    fn p(&self) -> f64 {
        self.dim as f64 - 2.0
    }
}

impl RadialProfile for PowerParams {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        let e = -self.p();
        self.coef(rho, t) * (-rho.powf(e) + self.front(t).powf(e))
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        self.coef(rho, t) * self.p() * rho.powf(-self.p() - 1.0)
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        -self.coef(rho, t) * self.p() * (self.p() + 1.0) * rho.powf(-self.p() - 2.0)
    }
    fn laplacian(&self, _rho: f64, _t: f64) -> f64 {
        0.0
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        self.coef(rho, t) * self.p() * self.omega * self.front(t).powf(-self.p() - 1.0)
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        Some(self.front(t))
    }
    fn front_speed(&self, _t: f64) -> f64 {
        -self.omega
    }
    fn one_sided_slopes(&self, t: f64) -> (f64, f64) {
        let g = self.p() * self.front(t).powf(-self.p() - 1.0);
        (self.a * g, self.b * g)
    }
    fn validity_times(&self) -> (f64, f64) {
        (-1.0, 0.0)
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        let r = self.front(t);
        (r - 2.0 * self.omega, r + self.omega)
    }
}

/// `c(-|x|^{2-n} + (h - w t)^{2-n})` with `c = a` outside and `c = b` inside the
/// shrinking sphere, `a = w h^{n-1} / (2n - 4)`, on the shell
/// `h - 2w - wt <= |x| <= h + w - wt`, `-1 <= t <= 0`.
pub fn make_power_barrier(n: usize, omega: f64, h: f64, b: f64) -> Result<Barrier> {
    if n < 3 {
        return Err(Error::BarrierParams(
            "power barrier is implemented for n >= 3 only".into(),
        ));
    }
    if !(omega > 0.0 && b > 0.0) {
        return Err(Error::BarrierParams("need omega > 0 and b > 0".into()));
    }
    if !(h > 2.0 * omega) {
        return Err(Error::BarrierParams("need h > 2 omega for a positive shell".into()));
    }
    let a = omega * h.powi(n as i32 - 1) / (2.0 * n as f64 - 4.0);
    let p = PowerParams {
        dim: n,
        omega,
        h,
        a,
        b,
    };
    Ok(Barrier::from_profile(
        Arc::new(p),
        Kind::Super,
        BarrierParams::Power(p),
    ))
}

// ---------------------------------------------------------------------------
// Square-root profile

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtProfileParams {
    pub h: f64,
    pub h_tau: f64,
    pub tau: f64,
    pub dim: usize,
    pub l: f64,
    pub m_bound: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eta: f64,
    pub delta: f64,
    pub omega: f64,
}

impl SqrtProfileParams {
    pub fn g(&self, s: f64) -> f64 {
        -self.k * s + self.a
    }

    /// `f(s) = -(2c/3K) g(s)^{3/2} + b` and its first two derivatives.
    pub fn f(&self, s: f64) -> [f64; 3] {
        let g = self.g(s);
        let r = g.sqrt();
        [
            -2.0 * self.c / (3.0 * self.k) * g * r + self.b,
            self.c * r,
            -self.c * self.k / (2.0 * r),
        ]
    }
}

impl RadialProfile for SqrtProfileParams {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        self.f(rho - self.omega * t)[0]
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        self.f(rho - self.omega * t)[1]
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        self.f(rho - self.omega * t)[2]
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        -self.omega * self.f(rho - self.omega * t)[1]
    }
    fn front_radius(&self, _t: f64) -> Option<f64> {
        None
    }
    fn front_speed(&self, _t: f64) -> f64 {
        0.0
    }
    fn one_sided_slopes(&self, _t: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn validity_times(&self) -> (f64, f64) {
        (-self.tau, 0.0)
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        let r = self.h + self.omega * t;
        (r - self.delta, r + self.eta)
    }
}

/// `f(|x| - w t)` with `f(s) = -(2c/3K)(-Ks + a)^{3/2} + b`: positive and
/// strictly supercaloric on the moving shell, `0 < f(h) < L`, `f(h + eta) > M`.
pub fn make_sqrt_profile_barrier(
    h: f64,
    h_tau: f64,
    tau: f64,
    n: usize,
    l: f64,
    m_bound: f64,
) -> Result<Barrier> {
    if !(h_tau > 0.0 && h_tau <= h && tau > 0.0 && l > 0.0 && m_bound > 0.0) || n == 0 {
        return Err(Error::BarrierParams(
            "need 0 < h_tau <= h, tau > 0, L > 0, M > 0 and n >= 1".into(),
        ));
    }
    let nm1 = n as f64 - 1.0;
    let k = 2.0 * ((h - 0.5 * h_tau) / tau + (2.0 * n as f64 - 2.0) / h_tau);
    let a = k * h + 0.75;
    let mut eta = 0.25 * h_tau;
    let mut found = false;
    for _ in 0..60 {
        let omega = (h - h_tau + eta) / tau;
        let rho_min = h_tau - 2.0 * eta;
        if k * eta < 0.25 && rho_min > 0.0 && omega + nm1 / rho_min <= 0.5 * k {
            found = true;
            break;
        }
        eta *= 0.5;
    }
    if !found {
        return Err(Error::SearchFailed("no admissible eta within 60 halvings".into()));
    }
    let omega = (h - h_tau + eta) / tau;
    let g = |s: f64| -k * s + a;
    let integral = 2.0 / (3.0 * k) * (g(h).powf(1.5) - g(h + eta).powf(1.5));
    let c = 2.0 * (m_bound - 0.5 * l).max(l) / integral;
    let b = 0.5 * l + 2.0 * c / (3.0 * k) * g(h).powf(1.5);
    let mut p = SqrtProfileParams {
        h,
        h_tau,
        tau,
        dim: n,
        l,
        m_bound,
        k,
        a,
        b,
        c,
        eta,
        delta: 0.5 * eta,
        omega,
    };
    let mut ok = false;
    for _ in 0..60 {
        if p.f(h - p.delta)[0] > 0.0 {
            ok = true;
            break;
        }
        p.delta *= 0.5;
    }
    if !ok {
        return Err(Error::SearchFailed("no delta with f(h - delta) > 0".into()));
    }
    Ok(Barrier::from_profile(
        Arc::new(p),
        Kind::Super,
        BarrierParams::SqrtProfile(p),
    ))
}

// ---------------------------------------------------------------------------
// Expansion subsolution

/// Radial profile `f` of the expansion estimate: `rho^{2-n} - 1` for `n >= 3`,
/// `-log rho` for `n = 2`, and `1 - rho` for `n = 1`.
pub fn expansion_profile(n: usize, rho: f64) -> [f64; 3] {
    match n {
        1 => [1.0 - rho, -1.0, 0.0],
        2 => [-rho.ln(), -1.0 / rho, 1.0 / (rho * rho)],
        _ => {
            let p = n as f64 - 2.0;
            [
                rho.powf(-p) - 1.0,
                -p * rho.powf(-p - 1.0),
                p * (p + 1.0) * rho.powf(-p - 2.0),
            ]
        }
    }
}

/// Constants `K = M/|f(2)|`, `v = 8K|f'(1)|/r`, `t_r = r/(2v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConstants {
    pub k: f64,
    pub v: f64,
    pub t_r: f64,
}

pub fn expansion_constants(m_bound: f64, r: f64, n: usize) -> Result<ExpansionConstants> {
    if !(m_bound > 0.0 && r > 0.0) || n == 0 {
        return Err(Error::BarrierParams("need M > 0, r > 0 and n >= 1".into()));
    }
    let k = m_bound / expansion_profile(n, 2.0)[0].abs();
    let v = 8.0 * k * expansion_profile(n, 1.0)[1].abs() / r;
    Ok(ExpansionConstants {
        k,
        v,
        t_r: r / (2.0 * v),
    })
}

/// Ground state of the Dirichlet Laplacian on the unit ball of `R^n`,
/// `psi(s) = Gamma(nu+1) (2/(j s))^nu J_nu(j s)` with `nu = n/2 - 1`, so
/// `psi(0) = 1`, `psi(1) = 0` and `lap psi = -j^2 psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallGroundState {
    pub dim: usize,
    pub j: f64,
    coefs: Vec<f64>,
}

impl BallGroundState {
    const TERMS: usize = 40;

    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let nu = dim as f64 / 2.0 - 1.0;
        // (-1)^k Gamma(nu+1) / (k! Gamma(k+nu+1)) by recurrence
        let mut coefs = Vec::with_capacity(Self::TERMS);
        let mut c = 1.0;
        for k in 0..Self::TERMS {
            coefs.push(c);
            let kk = k as f64 + 1.0;
            c *= -1.0 / (kk * (kk + nu));
        }
        let mut me = Self {
            dim,
            j: 1.0,
            coefs,
        };
        let at = |me: &Self, z: f64| me.series(z)[0];
        let mut lo = 0.5;
        let mut hi = lo + 0.25;
        while at(&me, hi) > 0.0 {
            lo = hi;
            hi += 0.25;
            if hi > 50.0 {
                return Err(Error::SearchFailed("no Bessel zero below 50".into()));
            }
        }
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if at(&me, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        me.j = 0.5 * (lo + hi);
        Ok(me)
    }

    /// Series in `z = j s`: value, d/dz, d2/dz2.
    fn series(&self, z: f64) -> [f64; 3] {
        let w = 0.5 * z;
        let mut out = [0.0; 3];
        for (k, &c) in self.coefs.iter().enumerate() {
            let kf = k as f64;
            let e = 2 * k as i32;
            out[0] += c * w.powi(e);
            if k >= 1 {
                out[1] += c * kf * w.powi(e - 1);
                out[2] += c * kf * (2.0 * kf - 1.0) * 0.5 * w.powi(e - 2);
            }
        }
        out
    }

    pub fn mu(&self) -> f64 {
        self.j * self.j
    }

    /// `psi(s)`, `psi'(s)`, `psi''(s)`.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        let d = self.series(self.j * s);
        [d[0], self.j * d[1], self.j * self.j * d[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionParams {
    pub m_bound: f64,
    pub r: f64,
    pub dim: usize,
    pub constants: ExpansionConstants,
    pub amplitude: f64,
    pub lambda: f64,
    pub mode: BallGroundState,
}

impl ExpansionParams {
    fn front(&self, t: f64) -> f64 {
        0.5 * (self.r - self.constants.v * t)
    }

    fn outer(&self, rho: f64, t: f64) -> bool {
        rho > self.front(t)
    }
}

impl RadialProfile for ExpansionParams {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if self.outer(rho, t) {
            self.constants.k * expansion_profile(self.dim, rho / r)[0]
        } else {
            self.amplitude * (-self.lambda * t).exp() * self.mode.eval(rho / r)[0]
        }
    }
    fn d_rho(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if self.outer(rho, t) {
            self.constants.k * expansion_profile(self.dim, rho / r)[1] / r
        } else {
            self.amplitude * (-self.lambda * t).exp() * self.mode.eval(rho / r)[1] / r
        }
    }
    fn d_rho2(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if self.outer(rho, t) {
            self.constants.k * expansion_profile(self.dim, rho / r)[2] / (r * r)
        } else {
            self.amplitude * (-self.lambda * t).exp() * self.mode.eval(rho / r)[2] / (r * r)
        }
    }
    fn laplacian(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        if self.outer(rho, t) {
            0.0
        } else {
            -self.mode.mu() / (r * r)
                * self.amplitude
                * (-self.lambda * t).exp()
                * self.mode.eval(rho / r)[0]
        }
    }
    fn d_t(&self, rho: f64, t: f64) -> f64 {
        let r = self.front(t);
        let s = rho / r;
        // ds/dt = -s R'/R = s v / (2R)
        let ds = s * self.constants.v / (2.0 * r);
        if self.outer(rho, t) {
            self.constants.k * expansion_profile(self.dim, s)[1] * ds
        } else {
            let e = self.amplitude * (-self.lambda * t).exp();
            let m = self.mode.eval(s);
            e * (-self.lambda * m[0] + m[1] * ds)
        }
    }
    fn front_radius(&self, t: f64) -> Option<f64> {
        Some(self.front(t))
    }
    fn front_speed(&self, _t: f64) -> f64 {
        -0.5 * self.constants.v
    }
    fn one_sided_slopes(&self, t: f64) -> (f64, f64) {
        let r = self.front(t);
        (
            self.constants.k * expansion_profile(self.dim, 1.0)[1] / r,
            self.amplitude * (-self.lambda * t).exp() * self.mode.eval(1.0)[1] / r,
        )
    }
    fn validity_times(&self) -> (f64, f64) {
        (0.0, self.constants.t_r)
    }
    fn validity_radii(&self, t: f64) -> (f64, f64) {
        (0.0, self.r - self.constants.v * t)
    }
}

/// `K f(2|x - x0|/(r - vt))` outside the half radius and a decaying Dirichlet
/// mode `A e^{-lambda t} psi(2|x - x0|/(r - vt))` inside, on the cone
/// `|x - x0| < r - vt`, `0 <= t <= t_r`. `inner_min` is a positive lower bound
/// of the data the inner mode must stay below; `A = inner_min / 2`.
pub fn make_expansion_subsolution(
    m_bound: f64,
    r: f64,
    n: usize,
    center: &[f64],
    inner_min: f64,
) -> Result<Barrier> {
    let constants = expansion_constants(m_bound, r, n)?;
    if !(inner_min > 0.0) {
        return Err(Error::BarrierParams("inner data must be positive".into()));
    }
    let mode = BallGroundState::new(n)?;
    let r_min = 0.25 * r;
    let lambda = 4.0 * mode.mu() / (r_min * r_min);
    let p = ExpansionParams {
        m_bound,
        r,
        dim: n,
        constants,
        amplitude: 0.5 * inner_min,
        lambda,
        mode,
    };
    Ok(Barrier::from_profile(Arc::new(p.clone()), Kind::Sub, BarrierParams::Expansion(p))
        .translated(center))
}

// ---------------------------------------------------------------------------
// Classifier

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Sub,
    Super,
    Neither,
}

impl From<Kind> for Verdict {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Sub => Verdict::Sub,
            Kind::Super => Verdict::Super,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    /// All inequalities of the reported kind hold with margin `STRICT_MARGIN`.
    pub strict: bool,
    /// Range of `(d_t - lap) phi` over samples off the front.
    pub pde_min: f64,
    pub pde_max: f64,
    /// Range of `V_n - (|D phi+| - |D phi-|)` over front samples.
    pub slack_min: f64,
    pub slack_max: f64,
    pub pde_samples: usize,
    pub front_samples: usize,
    pub reason: Option<String>,
}

impl ClassificationReport {
    pub fn is(&self, kind: Kind) -> bool {
        self.verdict == Verdict::from(kind)
    }

    /// Declared kind reported with strict margins.
    pub fn confirms(&self, kind: Kind) -> bool {
        self.is(kind) && self.strict
    }
}

/// Samples the conditions of a classical sub/supersolution: the sign of
/// `(d_t - lap) phi` off the front, the sign structure around the front,
/// nonvanishing one-sided gradients, and the velocity inequality.
pub fn classify_candidate(
    p: &dyn RadialProfile,
    samples: usize,
    requested: Option<Kind>,
) -> ClassificationReport {
    let (t0, t1) = p.validity_times();
    let mut rep = ClassificationReport {
        verdict: Verdict::Neither,
        strict: false,
        pde_min: f64::INFINITY,
        pde_max: f64::NEG_INFINITY,
        slack_min: f64::INFINITY,
        slack_max: f64::NEG_INFINITY,
        pde_samples: 0,
        front_samples: 0,
        reason: None,
    };
    let neither = |mut rep: ClassificationReport, why: String| {
        rep.verdict = Verdict::Neither;
        rep.strict = false;
        rep.reason = Some(why);
        rep
    };

    let mut fixed_sign = 0.0;
    for q in halton(samples, 2) {
        let t = t0 + q[0] * (t1 - t0);
        let (r0, r1) = p.validity_radii(t);
        let rho = r0 + q[1] * (r1 - r0);
        if rho <= 0.0 && p.dim() > 1 {
            continue;
        }
        let v = p.value(rho, t);
        let front = p.front_radius(t);
        if let Some(r) = front {
            if (rho - r).abs() <= 1e-12 * (1.0 + r.abs()) {
                continue;
            }
        }
        if v == 0.0 {
            continue;
        }
        // sign structure: phi changes sign exactly across the front
        let expected = match front {
            Some(r) => {
                let (so, si) = p.one_sided_slopes(t);
                if rho > r {
                    so.signum()
                } else {
                    -si.signum()
                }
            }
            None => {
                if fixed_sign == 0.0 {
                    fixed_sign = v.signum();
                }
                fixed_sign
            }
        };
        if v.signum() != expected {
            return neither(rep, format!("sign structure violated at rho = {rho}, t = {t}"));
        }
        let l = p.d_t(rho, t) - p.laplacian(rho, t);
        rep.pde_min = rep.pde_min.min(l);
        rep.pde_max = rep.pde_max.max(l);
        rep.pde_samples += 1;
    }

    for i in 1..=samples as u64 {
        let t = t0 + radical_inverse(i, 5) * (t1 - t0);
        let Some(r) = p.front_radius(t) else { continue };
        let (r0, r1) = p.validity_radii(t);
        if r < r0 || r > r1 {
            continue;
        }
        let (so, si) = p.one_sided_slopes(t);
        if so == 0.0 || si == 0.0 || so.signum() != si.signum() {
            return neither(rep, "degenerate gradient".into());
        }
        let positive_outside = so > 0.0;
        let (gp, gm, vn) = if positive_outside {
            (so.abs(), si.abs(), -p.front_speed(t))
        } else {
            (si.abs(), so.abs(), p.front_speed(t))
        };
        let sigma = vn - (gp - gm);
        rep.slack_min = rep.slack_min.min(sigma);
        rep.slack_max = rep.slack_max.max(sigma);
        rep.front_samples += 1;
    }

    let super_ok = rep.pde_min > -STRICT_MARGIN && rep.slack_min > -STRICT_MARGIN;
    let sub_ok = rep.pde_max < STRICT_MARGIN && rep.slack_max < STRICT_MARGIN;
    let kind = match (super_ok, sub_ok) {
        (true, true) => requested.unwrap_or(Kind::Super),
        (true, false) => Kind::Super,
        (false, true) => Kind::Sub,
        (false, false) => {
            return neither(
                rep.clone(),
                format!(
                    "PDE range [{:e}, {:e}], velocity slack range [{:e}, {:e}]",
                    rep.pde_min, rep.pde_max, rep.slack_min, rep.slack_max
                ),
            )
        }
    };
    rep.verdict = kind.into();
    rep.strict = match kind {
        Kind::Super => rep.pde_min >= STRICT_MARGIN && rep.slack_min >= STRICT_MARGIN,
        Kind::Sub => rep.pde_max <= -STRICT_MARGIN && rep.slack_max <= -STRICT_MARGIN,
    };
    rep
}

/// Named instances of every constructor, used by the acceptance suite and
/// the CLI gallery.
pub fn gallery() -> Vec<(&'static str, Barrier)> {
    let appendix = |alpha, beta, kind| {
        make_appendix_barrier(
            AppendixSpec {
                alpha,
                beta,
                radius: 1.0,
                speed: 0.0,
                eps: 0.1,
                dim: 2,
            },
            kind,
        )
        .expect("gallery parameters are valid")
    };
    vec![
        ("appendix_super", appendix(1.0, -2.0, Kind::Super)),
        ("appendix_sub", appendix(2.0, -1.0, Kind::Sub)),
        (
            "paraboloid",
            make_shrinking_paraboloid(1.0, 0.5, 0.5, 2, 1.0).expect("valid"),
        ),
        (
            "power",
            make_power_barrier(3, 1.0 / 3.0, 4.0 / 3.0, 0.05).expect("valid"),
        ),
        (
            "sqrt_profile",
            make_sqrt_profile_barrier(1.0, 1.0, 0.1, 2, 1.0, 2.0).expect("valid"),
        ),
        (
            "expansion",
            make_expansion_subsolution(1.0, 0.1, 3, &[], 1.0).expect("valid"),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, beta: f64, m: f64, n: usize) -> AppendixSpec {
        AppendixSpec {
            alpha,
            beta,
            radius: 1.0,
            speed: m,
            eps: 0.1,
            dim: n,
        }
    }

    #[test]
    fn appendix_example_limits() {
        let s = spec(1.0, -2.0, 0.0, 2);
        let (o, i) = appendix_one_sided_limits(&s, 1.0, -2.1);
        assert!((o - 1.1).abs() < 1e-12 && (i - 0.1).abs() < 1e-12);
        let p = AppendixBarrierParams::new(s, Kind::Super).unwrap();
        let (o, i) = appendix_one_sided_limits(&s, 1.0, p.q);
        assert!(o > 0.0 && i > 0.0);
        assert_eq!(p.gradient_jump(), -1.0);
        assert_eq!(p.normal_velocity(), -0.0);
    }

    #[test]
    fn appendix_rejections() {
        let err = |s, k| AppendixBarrierParams::new(s, k).unwrap_err().to_string();
        assert!(err(spec(1.0, 2.0, 0.0, 2), Kind::Super).contains("sign alpha"));
        assert!(err(spec(0.0, -2.0, 0.0, 2), Kind::Super).contains("nonzero"));
        // m sign beta = -1 = alpha + beta
        assert!(err(spec(1.0, -2.0, 1.0, 2), Kind::Super).contains("alpha + beta != m sign beta"));
        assert!(err(spec(2.0, -1.0, 0.0, 2), Kind::Super).contains("supersolution"));
        assert!(err(spec(1.0, -2.0, 0.0, 2), Kind::Sub).contains("subsolution"));
    }

    #[test]
    fn appendix_velocity_sign() {
        let p = AppendixBarrierParams::new(spec(1.0, -2.0, -3.0, 2), Kind::Super).unwrap();
        assert_eq!(p.normal_velocity(), 3.0);
        let p = AppendixBarrierParams::new(spec(-1.0, 2.0, 3.0, 2), Kind::Super).unwrap();
        assert_eq!(p.normal_velocity(), 3.0);
        assert_eq!(p.gradient_jump(), 1.0);
    }

    #[test]
    fn appendix_classifies() {
        for (s, k) in [
            (spec(1.0, -2.0, 0.0, 2), Kind::Super),
            (spec(2.0, -1.0, 0.0, 2), Kind::Sub),
            (spec(1.0, -2.0, -3.0, 3), Kind::Super),
            (spec(-1.0, 2.0, 3.0, 2), Kind::Super),
            (spec(-0.5, 1.5, 0.5, 1), Kind::Sub),
            (spec(0.7, -0.2, 0.1, 3), Kind::Sub),
        ] {
            let b = make_appendix_barrier(s, k).unwrap();
            let rep = b.classify(4000);
            assert!(rep.confirms(k), "{s:?} {k:?} {rep:?}");
            let (eo, ei) = match b.params() {
                BarrierParams::Appendix(p) => p.eps_closeness(2000),
                _ => unreachable!(),
            };
            assert!(eo < s.eps && ei < s.eps);
        }
    }

    #[test]
    fn paraboloid_example() {
        let b = make_shrinking_paraboloid(1.0, 0.5, 0.5, 2, 1.0).unwrap();
        let BarrierParams::Paraboloid(p) = b.params() else {
            unreachable!()
        };
        assert_eq!(p.omega, 8.0);
        // outside: (2M/eta)(omega - (n-1)/|x|)
        let rho = 0.9;
        let l = b.profile().d_t(rho, -0.01) - b.profile().laplacian(rho, -0.01);
        assert!((l - 4.0 * (8.0 - 1.0 / rho)).abs() < 1e-12);
        assert!(b.classify(4000).confirms(Kind::Super));
        assert!(make_shrinking_paraboloid(1.0, 0.5, 0.0, 2, 1.0).is_err());
    }

    #[test]
    fn power_example() {
        let b = make_power_barrier(3, 1.0 / 3.0, 4.0 / 3.0, 0.05).unwrap();
        let BarrierParams::Power(p) = b.params() else {
            unreachable!()
        };
        assert!((p.a - 8.0 / 27.0).abs() < 1e-15);
        for t in [-1.0, -0.5, 0.0] {
            let r = b.front_radius(t).unwrap();
            assert_eq!(b.profile().value(r, t), 0.0);
            // (d_t - lap) phi = c (n-2) w R^{1-n}
            let rho = r + 0.1;
            let expect = p.a * p.omega * r.powi(-2);
            assert!((b.profile().d_t(rho, t) - expect).abs() < 1e-14);
        }
        assert!(b.classify(4000).confirms(Kind::Super));
        assert!(make_power_barrier(2, 1.0 / 3.0, 4.0 / 3.0, 0.05).is_err());
    }

    #[test]
    fn sqrt_profile_recipe() {
        let b = make_sqrt_profile_barrier(1.0, 0.8, 0.1, 2, 1.0, 2.0).unwrap();
        let BarrierParams::SqrtProfile(p) = b.params() else {
            unreachable!()
        };
        assert!((p.g(p.h) - 0.75).abs() < 1e-12);
        assert!(p.f(p.h)[0] > 0.0 && p.f(p.h)[0] < p.l);
        assert!(p.f(p.h + p.eta)[0] > p.m_bound);
        assert!(p.f(p.h - p.delta)[0] > 0.0);
        for k in 0..=100 {
            let s = p.h - p.delta + (p.eta + p.delta) * k as f64 / 100.0;
            assert!(p.g(s) > 0.5 && p.g(s) < 1.0);
            assert!(p.f(s)[1] > 0.0);
        }
        assert!(b.classify(4000).confirms(Kind::Super));
        assert!(make_sqrt_profile_barrier(1.0, 1.2, 0.1, 2, 1.0, 2.0).is_err());
    }

    #[test]
    fn ground_states() {
        let pi = std::f64::consts::PI;
        let g1 = BallGroundState::new(1).unwrap();
        assert!((g1.j - pi / 2.0).abs() < 1e-12);
        assert!((g1.eval(0.3)[0] - (pi / 2.0 * 0.3).cos()).abs() < 1e-13);
        let g3 = BallGroundState::new(3).unwrap();
        assert!((g3.j - pi).abs() < 1e-12);
        // sin(pi s)/(pi s)
        let s = 0.4;
        assert!((g3.eval(s)[0] - (pi * s).sin() / (pi * s)).abs() < 1e-13);
        let g2 = BallGroundState::new(2).unwrap();
        assert!((g2.j - 2.404_825_557_695_773).abs() < 1e-10);
        // eigen relation psi'' + (n-1)/s psi' = -mu psi
        for g in [&g1, &g2, &g3] {
            let s = 0.6;
            let e = g.eval(s);
            let lap = e[2] + (g.dim as f64 - 1.0) / s * e[1];
            assert!((lap + g.mu() * e[0]).abs() < 1e-11);
            assert_eq!(g.eval(0.0)[0], 1.0);
        }
    }

    #[test]
    fn expansion_example() {
        let c = expansion_constants(1.0, 0.1, 3).unwrap();
        assert!((c.k - 2.0).abs() < 1e-15);
        assert!((c.v - 160.0).abs() < 1e-9);
        assert!((c.t_r - 3.125e-4).abs() < 1e-15);
        let c2 = expansion_constants(1.0, 0.2, 3).unwrap();
        assert!((c2.t_r / c.t_r - 4.0).abs() < 1e-12);
        let b = make_expansion_subsolution(1.0, 0.1, 3, &[], 1.0).unwrap();
        for t in [0.0, 1e-4, 3e-4] {
            let (so, _) = b.profile().one_sided_slopes(t);
            let r = b.front_radius(t).unwrap();
            assert!((so.abs() - 2.0 * c.k / (2.0 * r)).abs() < 1e-9);
            assert!(so.abs() <= c.v / 2.0 + 1e-9);
        }
        assert!(b.classify(4000).confirms(Kind::Sub));
        for n in [1, 2] {
            let b = make_expansion_subsolution(1.0, 0.1, n, &[], 1.0).unwrap();
            assert!(b.classify(4000).confirms(Kind::Sub), "n = {n}");
        }
    }

    #[test]
    fn negation_swaps_kind() {
        let b = make_appendix_barrier(spec(1.0, -2.0, 0.0, 2), Kind::Super).unwrap();
        let nb = b.negated();
        assert_eq!(nb.kind(), Kind::Sub);
        assert!(nb.classify(2000).confirms(Kind::Sub));
    }

    #[derive(Debug)]
    struct Cone;
    impl RadialProfile for Cone {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, rho: f64, _t: f64) -> f64 {
            rho - 1.0
        }
        fn d_rho(&self, _rho: f64, _t: f64) -> f64 {
            1.0
        }
        fn d_rho2(&self, _rho: f64, _t: f64) -> f64 {
            0.0
        }
        fn d_t(&self, _rho: f64, _t: f64) -> f64 {
            0.0
        }
        fn front_radius(&self, _t: f64) -> Option<f64> {
            Some(1.0)
        }
        fn front_speed(&self, _t: f64) -> f64 {
            0.0
        }
        fn one_sided_slopes(&self, _t: f64) -> (f64, f64) {
            (1.0, 1.0)
        }
        fn validity_times(&self) -> (f64, f64) {
            (-1.0, 0.0)
        }
        fn validity_radii(&self, _t: f64) -> (f64, f64) {
            (0.5, 1.5)
        }
    }

    #[test]
    fn tie_rule() {
        let rep = classify_candidate(&Cone, 1000, None);
        assert_eq!(rep.verdict, Verdict::Super);
        assert!(!rep.strict);
        let rep = classify_candidate(&Cone, 1000, Some(Kind::Sub));
        assert_eq!(rep.verdict, Verdict::Sub);
    }

    #[derive(Debug)]
    struct Flat;
    impl RadialProfile for Flat {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, rho: f64, _t: f64) -> f64 {
            (rho - 1.0).max(0.0).powi(2)
        }
        fn d_rho(&self, rho: f64, _t: f64) -> f64 {
            2.0 * (rho - 1.0).max(0.0)
        }
        fn d_rho2(&self, rho: f64, _t: f64) -> f64 {
            if rho > 1.0 {
                2.0
            } else {
                0.0
            }
        }
        fn d_t(&self, _rho: f64, _t: f64) -> f64 {
            0.0
        }
        fn front_radius(&self, _t: f64) -> Option<f64> {
            Some(1.0)
        }
        fn front_speed(&self, _t: f64) -> f64 {
            0.0
        }
        fn one_sided_slopes(&self, _t: f64) -> (f64, f64) {
            (0.0, 0.0)
        }
        fn validity_times(&self) -> (f64, f64) {
            (-1.0, 0.0)
        }
        fn validity_radii(&self, _t: f64) -> (f64, f64) {
            (1.0, 1.5)
        }
    }

    #[test]
    fn degenerate_gradient_is_neither() {
        let rep = classify_candidate(&Flat, 500, Some(Kind::Super));
        assert_eq!(rep.verdict, Verdict::Neither);
        assert_eq!(rep.reason.as_deref(), Some("degenerate gradient"));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (name, b) in gallery() {
            let p = b.profile();
            let (t0, t1) = p.validity_times();
            let t = t0 + 0.37 * (t1 - t0);
            let (r0, r1) = p.validity_radii(t);
            let mut rho = r0 + 0.31 * (r1 - r0);
            if let Some(r) = p.front_radius(t) {
                if (rho - r).abs() < 0.1 * (r1 - r0) {
                    rho = r + 0.2 * (r1 - r0);
                }
            }
            let err = |e: f64| {
                let fd = (p.value(rho + e, t) - p.value(rho - e, t)) / (2.0 * e);
                (fd - p.d_rho(rho, t)).abs()
            };
            let e = 1e-3 * (r1 - r0);
            let (a, c) = (err(e), err(0.5 * e));
            assert!(
                a < 1e-12 * p.d_rho(rho, t).abs().max(1.0) || (a / c > 3.0 && a / c < 5.0),
                "{name}: {a} {c}"
            );
            let et = 1e-3 * (t1 - t0);
            let errt = |e: f64| {
                let fd = (p.value(rho, t + e) - p.value(rho, t - e)) / (2.0 * e);
                (fd - p.d_t(rho, t)).abs()
            };
            let (a, c) = (errt(et), errt(0.5 * et));
            assert!(
                a < 1e-9 * p.d_t(rho, t).abs().max(1.0) || (a / c > 3.0 && a / c < 5.0),
                "{name} time: {a} {c}"
            );
        }
    }

    #[test]
    fn gallery_kinds() {
        for (name, b) in gallery() {
            let rep = b.classify(2000);
            assert!(rep.confirms(b.kind()), "{name}: {rep:?}");
        }
    }

    #[test]
    fn scaling_with_unit_amplitude_is_exact() {
        for (name, b) in gallery() {
            let (t0, t1) = b.validity_times();
            for (bb, c) in [(0.5, 0.0), (2.0, 0.3 * (t1 - t0))] {
                let s = b.scaled(1.0, bb, c).unwrap();
                assert!(s.classify(2000).confirms(b.kind()), "{name} b={bb}");
            }
        }
    }

    #[test]
    fn amplitude_scaling_is_not_closed_in_general() {
        // the heat operator picks up a factor a on d_t only
        let b = make_shrinking_paraboloid(1.0, 0.5, 0.5, 2, 1.0).unwrap();
        let rep = b.scaled(0.3, 1.0, 0.0).unwrap().classify(4000);
        assert_eq!(rep.verdict, Verdict::Neither);
        assert!(b.scaled(0.5, 1.0, 0.0).unwrap().classify(4000).is(Kind::Super));
    }
}
