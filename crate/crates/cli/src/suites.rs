//! `verify <suite>`: each suite writes `verdicts.csv`
//! (`case,metric,value,bound,pass`) plus suite-specific tables into its own
//! directory and reports whether every row passed.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stefan_core::barriers::{gallery, BarrierParams, RadialProfile};
use stefan_core::interface::{
    analyze_trajectory, expansion_bound_check, two_phase_residuals, write_interface_csv,
    AnalysisOptions,
};
use stefan_core::oracles::{l1_errors, oracle_problem, AheadState, ExactSolution, Neumann, TravellingWave};
use stefan_core::viscosity::{
    barrier_fixture, comparison_harness, crossing_test, envelopes, inject_violation, CrossingVerdict,
};
use stefan_core::weakform::{basis_residuals, default_test_basis};
use stefan_core::{
    chi, solve, BoundaryData, Domain, EnthalpyField, Grid, ProblemSpec, Selection, SolveOptions,
};

use crate::export::create;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Weakform,
    Comparison,
    Crossing,
    Envelopes,
    Interface,
    Oracles,
    Barriers,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Weakform,
        Suite::Comparison,
        Suite::Crossing,
        Suite::Envelopes,
        Suite::Interface,
        Suite::Oracles,
        Suite::Barriers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Weakform => "weakform",
            Suite::Comparison => "comparison",
            Suite::Crossing => "crossing",
            Suite::Envelopes => "envelopes",
            Suite::Interface => "interface",
            Suite::Oracles => "oracles",
            Suite::Barriers => "barriers",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|k| k.name()).collect();
            format!("unknown suite `{s}`, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuiteOptions {
    /// Finest resolution; each suite has its own default.
    pub cells: Option<usize>,
    pub cfl: Option<f64>,
    pub seed: u64,
}

impl SuiteOptions {
    fn solver(&self) -> SolveOptions {
        let mut o = SolveOptions::explicit();
        if let Some(c) = self.cfl {
            o.cfl = c;
        }
        o
    }

    fn cells(&self, default: usize) -> usize {
        self.cells.unwrap_or(default)
    }

    /// Three resolutions halving down from the finest.
    fn ladder(&self, finest: usize) -> [usize; 3] {
        let n = self.cells(finest).max(16);
        [n / 4, n / 2, n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub case: String,
    pub metric: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Row {
    fn at_most(case: impl Into<String>, metric: &'static str, value: f64, bound: f64) -> Self {
        Self {
            case: case.into(),
            metric,
            value,
            bound,
            pass: value <= bound,
        }
    }

    fn at_least(case: impl Into<String>, metric: &'static str, value: f64, bound: f64) -> Self {
        Self {
            case: case.into(),
            metric,
            value,
            bound,
            pass: value >= bound,
        }
    }

    fn flag(case: impl Into<String>, metric: &'static str, ok: bool) -> Self {
        Self {
            case: case.into(),
            metric,
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub rows: Vec<Row>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

fn write_verdicts(rows: &[Row], dir: &Path) -> Result<()> {
    let mut w = create(&dir.join("verdicts.csv"))?;
    writeln!(w, "case,metric,value,bound,pass")?;
    for r in rows {
        writeln!(w, "{},{},{:e},{:e},{}", r.case, r.metric, r.value, r.bound, r.pass)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `suite`, writing into `dir`.
pub fn run_suite(suite: Suite, opts: &SuiteOptions, dir: &Path) -> Result<SuiteReport> {
    std::fs::create_dir_all(dir)?;
    let rows = match suite {
        Suite::Weakform => weakform(opts, dir)?,
        Suite::Comparison => comparison(opts)?,
        Suite::Crossing => crossing(opts)?,
        Suite::Envelopes => envelope_suite(opts)?,
        Suite::Interface => interface(opts, dir)?,
        Suite::Oracles => oracles(opts)?,
        Suite::Barriers => barriers()?,
    };
    write_verdicts(&rows, dir)?;
    Ok(SuiteReport { suite, rows })
}

fn interval(cells: usize) -> Result<Arc<Grid>> {
    Ok(Grid::new(Domain::interval(0.0, 1.0)?, &[cells])?.shared())
}

fn wave() -> Result<Arc<dyn ExactSolution>> {
    Ok(Arc::new(TravellingWave::with(1.0, 0.2, AheadState::Bottom)?))
}

fn neumann() -> Result<Arc<dyn ExactSolution>> {
    Ok(Arc::new(Neumann::new(1.0, -0.5)?))
}

fn weakform(opts: &SuiteOptions, dir: &Path) -> Result<Vec<Row>> {
    let sol = wave()?;
    let t_end = 0.5;
    let mut table = create(&dir.join("weak_residuals.csv"))?;
    writeln!(table, "phi_id,resolution,residual")?;
    let mut maxima = Vec::new();
    let ladder = opts.ladder(400);
    for n in ladder {
        let g = interval(n)?;
        let spec = oracle_problem(sol.clone(), g.clone(), 0.0, t_end)?;
        let traj = solve(&spec, &opts.solver().with_snapshot_every(n))?;
        let basis = default_test_basis(&g, 12, t_end)?;
        let res = basis_residuals(&traj, &basis)?;
        for (i, r) in res.iter().enumerate() {
            writeln!(table, "{i},{n},{r:e}")?;
        }
        maxima.push(res.iter().map(|r| r.abs()).fold(0.0, f64::max));
    }
    table.flush()?;
    let mut rows: Vec<Row> = ladder
        .iter()
        .zip(&maxima)
        .map(|(n, m)| Row::at_most(format!("wave {n} cells"), "max_abs_residual", *m, 1e-2))
        .collect();
    for (k, w) in maxima.windows(2).enumerate() {
        rows.push(Row::at_least(
            format!("wave {} -> {} cells", ladder[k], ladder[k + 1]),
            "residual_ratio",
            w[0] / w[1],
            1.5,
        ));
    }
    Ok(rows)
}

type Profile = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn random_profile(rng: &mut ChaCha8Rng) -> Profile {
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            (
                rng.gen_range(-1.0..1.0) / (k + 1) as f64,
                (k + 1) as f64 * std::f64::consts::PI,
                rng.gen_range(0.0..6.3),
            )
        })
        .collect();
    let clip: f64 = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.3) } else { 0.0 };
    Arc::new(move |x: &[f64]| {
        let s: f64 = modes.iter().map(|&(a, k, p)| a * (k * x[0] + p).sin()).sum();
        s.signum() * (s.abs() - clip).max(0.0)
    })
}

fn comparison(opts: &SuiteOptions) -> Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let g = interval(opts.cells(200))?;
    let t_end = 0.05;
    let mut rows = Vec::new();
    for case in 0..10 {
        let u0 = random_profile(&mut rng);
        let bump = random_profile(&mut rng);
        let gap: f64 = rng.gen_range(1e-3..0.2);
        let wobble: f64 = rng.gen_range(0.0..0.5);
        let freq: f64 = rng.gen_range(1.0..20.0);
        let v0: Profile = {
            let u0 = u0.clone();
            Arc::new(move |x: &[f64]| u0(x) + gap + bump(x).abs())
        };
        let spec = |f: Profile| -> Result<ProblemSpec> {
            let h0 = EnthalpyField::from_temperature_fn(g.clone(), 0.0, Selection::Maximal, |x| f(x))?;
            let theta = BoundaryData::new(move |x, t| f(x) + wobble * (freq * t).sin());
            Ok(ProblemSpec::new(h0, theta, t_end)?)
        };
        let rep = comparison_harness(&spec(u0)?, &spec(v0)?, &opts.solver())?;
        rows.push(Row::at_least(format!("pair {case}"), "initial_gap", rep.initial_gap, f64::MIN_POSITIVE));
        rows.push(Row::at_most(format!("pair {case}"), "max_violation", rep.max_violation, 0.0));
    }
    Ok(rows)
}

fn crossing(opts: &SuiteOptions) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (name, b) in gallery() {
        let f = barrier_fixture(&b, 0.01, opts.cells(200), &opts.solver())?;
        let rep = f.run()?;
        rows.push(Row::at_least(name, "boundary_margin", rep.boundary_margin, f64::MIN_POSITIVE));
        rows.push(Row::at_least(name, "min_gap_plus_tol", rep.min_gap + rep.tol, 0.0));
        rows.push(Row::flag(name, "no_crossing", rep.verdict == CrossingVerdict::NoCrossing));
        let (bad, x, t) = inject_violation(&f, 10.0 * rep.tol)?;
        let hit = crossing_test(&bad, &f.barrier, &f.neighborhood, f.side, f.options)?;
        rows.push(Row::flag(
            format!("{name} injected"),
            "detected_at_witness",
            hit.verdict == CrossingVerdict::Crossing && hit.witness == (x, t),
        ));
    }
    Ok(rows)
}

fn envelope_suite(opts: &SuiteOptions) -> Result<Vec<Row>> {
    let fat = |x: &[f64]| {
        let x = x[0];
        if x < 1.0 / 3.0 {
            1.0 - 3.0 * x
        } else if x > 2.0 / 3.0 {
            -1.5 * (x - 2.0 / 3.0)
        } else {
            0.0
        }
    };
    let theta = BoundaryData::new(|x, _| if x[0] < 0.5 { 1.0 } else { -0.5 });
    let g = interval(opts.cells(300))?;
    let env = envelopes(g.clone(), &fat, &theta, 0.1, &opts.solver())?;
    let dx = g.max_spacing();
    let (a, b) = (env.upper.last(), env.lower.last());
    let interior = (0..g.node_count())
        .filter(|&k| {
            let x = g.point(k)[0];
            x > 1.0 / 3.0 + dx && x < 2.0 / 3.0 - dx
        })
        .map(|k| chi(a.values()[k]) - chi(b.values()[k]))
        .fold(f64::INFINITY, f64::min);
    let g2 = interval(opts.cells(300) + 1)?;
    let u0 = |x: &[f64]| 0.4 - x[0] + 1e-3;
    let unique = envelopes(g2, &u0, &BoundaryData::new(move |x, _| u0(x)), 0.1, &opts.solver())?.identical();
    Ok(vec![
        Row::at_most("fat zero band", "order_violation", env.order_violation(), 0.0),
        Row::at_least("fat zero band", "interior_gap", interior, f64::MIN_POSITIVE),
        Row::flag("no zero set", "envelopes_identical", unique),
    ])
}

fn interface(opts: &SuiteOptions, dir: &Path) -> Result<Vec<Row>> {
    let n = opts.cells(800);
    let (t0, t_end, half) = (0.05, 0.1, 0.008);
    let spec = oracle_problem(neumann()?, interval(n)?, t0, t_end)?;
    let traj = solve(&spec, &opts.solver().with_snapshot_every((n / 50).max(1)))?;
    let samples = analyze_trajectory(&traj, &AnalysisOptions::with_half_window(half));
    let mut w = create(&dir.join("interface.csv"))?;
    write_interface_csv(&samples, 1, &mut w)?;
    w.flush()?;
    let rel: Vec<f64> = two_phase_residuals(&samples)
        .into_iter()
        .filter(|(t, _, _)| *t >= half && *t <= t_end - half)
        .map(|(_, v, r)| r.abs() / v.abs())
        .collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let mut rows = vec![
        Row::at_least(format!("neumann {n} cells"), "two_phase_samples", rel.len() as f64, 1.0),
        Row::at_most(format!("neumann {n} cells"), "max_relative_residual", worst, 0.1),
    ];

    let m = opts.cells(800).min(100);
    let g = Grid::new(Domain::rectangle([-1.0, -1.0], [1.0, 1.0])?, &[m, m])?.shared();
    let r = 5.0 * g.max_spacing();
    let t_r = stefan_core::barriers::expansion_constants(1.0, r, 2)?.t_r;
    let h0 = EnthalpyField::from_temperature_fn(g, 0.0, Selection::Maximal, |x| {
        if x[0].hypot(x[1]) < 0.5 {
            1.0
        } else {
            -1.0
        }
    })?;
    let spec = ProblemSpec::new(h0, BoundaryData::constant(-1.0), t_r)?;
    let traj = solve(&spec, &opts.solver().with_snapshot_every(1))?;
    let rep = expansion_bound_check(&traj, r)?;
    rows.push(Row::flag(format!("warm disk {m}^2, r = 5dx"), "expansion_bound", rep.holds));
    Ok(rows)
}

fn oracles(opts: &SuiteOptions) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let ladder = opts.ladder(400);
    for (name, sol, t0, dur) in [("wave", wave()?, 0.0, 0.3), ("neumann", neumann()?, 0.05, 0.2)] {
        let mut errs = Vec::new();
        for n in ladder {
            let spec = oracle_problem(sol.clone(), interval(n)?, t0, dur)?;
            let traj = solve(&spec, &opts.solver())?;
            errs.push(l1_errors(traj.last(), sol.as_ref(), t0 + dur).0);
        }
        for (k, w) in errs.windows(2).enumerate() {
            rows.push(Row::at_least(
                format!("{name} {} -> {} cells", ladder[k], ladder[k + 1]),
                "l1_order",
                (w[0] / w[1]).log2(),
                0.8,
            ));
        }
    }
    Ok(rows)
}

fn barriers() -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (name, b) in gallery() {
        let rep = b.classify(10_000);
        rows.push(Row::flag(name, "confirms_kind", rep.confirms(b.kind())));
        if let BarrierParams::Appendix(p) = b.params() {
            let (plus, minus) = p.eps_closeness(10_000);
            rows.push(Row::at_most(name, "eps_closeness", plus.max(minus), p.spec.eps));
            let (outer, inner) = p.one_sided_slopes(0.0);
            rows.push(Row::flag(
                name,
                "gradient_identity",
                outer.abs() - inner.abs() == p.gradient_jump() && p.gradient_jump() == p.spec.alpha + p.spec.beta,
            ));
        }
    }
    if rows.is_empty() {
        return Err(anyhow!("empty barrier gallery"));
    }
    Ok(rows)
}
