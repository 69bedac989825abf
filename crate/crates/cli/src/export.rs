//! CSV writers behind `run`, `barriers gallery`, `oracle dump` and
//! `analyze interface`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use stefan_core::barriers::{gallery, Barrier};
use stefan_core::enthalpy::mushy_measure;
use stefan_core::interface::{analyze_trajectory, write_interface_csv, AnalysisOptions};
use stefan_core::oracles::{AheadState, ExactSolution, Neumann, TravellingWave};
use stefan_core::{chi, Trajectory};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Trajectory directory plus `summary.csv` and `interface.csv`.
pub fn write_run(traj: &Trajectory, dir: &Path, vtk: bool) -> Result<()> {
    traj.write_dir(dir)?;
    let mut w = create(&dir.join("summary.csv"))?;
    writeln!(w, "step,t,mushy_measure")?;
    for s in traj.snapshots() {
        writeln!(w, "{},{:e},{:e}", s.step, s.time(), mushy_measure(&s.h) + 0.0)?;
    }
    w.flush()?;
    write_interface(traj, &dir.join("interface.csv"))?;
    if vtk {
        traj.write_vtk(&dir.join("vtk"))?;
    }
    Ok(())
}

pub fn write_interface(traj: &Trajectory, path: &Path) -> Result<()> {
    let samples = analyze_trajectory(traj, &AnalysisOptions::default());
    let mut w = create(path)?;
    write_interface_csv(&samples, traj.grid().axes(), &mut w)?;
    w.flush()?;
    Ok(())
}

/// Closed sampling window of a barrier: validity times and radii, with
/// unbounded ends cut off.
fn window(b: &Barrier) -> ((f64, f64), (f64, f64)) {
    let (t0, t1) = b.validity_times();
    let t1 = if t1.is_finite() { t1 } else { t0 + 1.0 };
    let tm = 0.5 * (t0 + t1);
    let (r0, r1) = b.validity_radii(tm);
    let r1 = if r1.is_finite() {
        r1
    } else {
        2.0 * b.front_radius(tm).unwrap_or(1.0).max(r0 + 1.0)
    };
    ((t0, t1), (r0, r1))
}

/// Writes `<name>.csv` (`t,rho,phi`) for each gallery barrier on a 21 x 101
/// grid of its validity window, and `classification.csv`. Returns whether
/// every barrier confirmed its declared kind.
pub fn barrier_gallery(dir: &Path, samples: usize) -> Result<bool> {
    fs::create_dir_all(dir)?;
    let mut report = create(&dir.join("classification.csv"))?;
    writeln!(
        report,
        "name,kind,verdict,strict,pde_min,pde_max,slack_min,slack_max,pde_samples,front_samples"
    )?;
    let mut all = true;
    for (name, b) in gallery() {
        let ((t0, t1), (r0, r1)) = window(&b);
        let mut w = create(&dir.join(format!("{name}.csv")))?;
        writeln!(w, "t,rho,phi")?;
        for i in 0..=20 {
            let t = t0 + (t1 - t0) * i as f64 / 20.0;
            let (lo, hi) = b.validity_radii(t);
            let lo = lo.max(r0);
            let hi = if hi.is_finite() { hi.min(r1) } else { r1 };
            for j in 0..=100 {
                let rho = lo + (hi - lo) * j as f64 / 100.0;
                writeln!(w, "{t:e},{rho:e},{:e}", b.profile().value(rho, t))?;
            }
        }
        w.flush()?;
        let rep = b.classify(samples);
        let ok = rep.confirms(b.kind());
        all &= ok;
        writeln!(
            report,
            "{name},{:?},{:?},{},{:e},{:e},{:e},{:e},{},{}",
            b.kind(),
            rep.verdict,
            rep.strict,
            rep.pde_min,
            rep.pde_max,
            rep.slack_min,
            rep.slack_max,
            rep.pde_samples,
            rep.front_samples
        )?;
    }
    report.flush()?;
    Ok(all)
}

/// `wave.csv` and `neumann.csv` with columns `t,x,u,h`: `cells + 1` points
/// of `[0, 1]` at 11 times.
pub fn oracle_dump(dir: &Path, cells: usize) -> Result<()> {
    let wave = TravellingWave::with(1.0, 0.2, AheadState::Bottom)?;
    let neumann = Neumann::new(1.0, -0.5)?;
    let sols: [(&str, &dyn ExactSolution, f64, f64); 2] =
        [("wave", &wave, 0.0, 0.5), ("neumann", &neumann, 0.05, 0.25)];
    for (name, sol, t0, t1) in sols {
        let mut w = create(&dir.join(format!("{name}.csv")))?;
        writeln!(w, "t,x,u,h")?;
        for i in 0..=10 {
            let t = t0 + (t1 - t0) * i as f64 / 10.0;
            for j in 0..=cells {
                let x = j as f64 / cells as f64;
                let h = sol.h(x, t);
                debug_assert!((chi(h) - sol.u(x, t)).abs() < 1e-12);
                writeln!(w, "{t:e},{x:e},{:e},{h:e}", sol.u(x, t))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
