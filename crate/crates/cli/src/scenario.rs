//! Scenario files: TOML (or JSON with the same keys) describing one solve.
//!
//! Every table rejects unknown keys. Omitted tables take these defaults:
//!
//! * `[domain]`: `kind = "interval"`, `lower = 0`, `upper = 1`, `cells = 100`
//! * `[boundary]`: `mode = "initial"` (the initial temperature, frozen in
//!   time), or `mode = "oracle"` for oracle-seeded data
//! * `[solver]`: `scheme = "explicit"`, `cfl = 0.9`, `final_time = 0.1`,
//!   about 100 snapshots
//! * `[output]`: `dir` = scenario name or file stem, `vtk = false`
//! * `selection = "maximal"`: enthalpy picked where the temperature is 0

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use stefan_core::oracles::{AheadState, ExactSolution, Neumann, TravellingWave};
use stefan_core::{
    chi, chi_inverse, BoundaryData, Domain, EnthalpyField, Grid, ProblemSpec, ScalarField,
    Selection, SolveOptions,
};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] stefan_core::Error),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub selection: SelectionSpec,
    #[serde(default)]
    pub domain: DomainSpec,
    pub initial: InitialData,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionSpec {
    #[default]
    Maximal,
    Minimal,
}

impl From<SelectionSpec> for Selection {
    fn from(s: SelectionSpec) -> Self {
        match s {
            SelectionSpec::Maximal => Selection::Maximal,
            SelectionSpec::Minimal => Selection::Minimal,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval {
        lower: f64,
        upper: f64,
        cells: usize,
    },
    Rectangle {
        lower: [f64; 2],
        upper: [f64; 2],
        cells: [usize; 2],
    },
    Radial {
        inner: f64,
        outer: f64,
        dim: usize,
        cells: usize,
    },
    Ball {
        outer: f64,
        dim: usize,
        cells: usize,
    },
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self::Interval {
            lower: 0.0,
            upper: 1.0,
            cells: 100,
        }
    }
}

impl DomainSpec {
    fn set_cells(&mut self, n: usize) {
        match self {
            Self::Interval { cells, .. } | Self::Radial { cells, .. } | Self::Ball { cells, .. } => *cells = n,
            Self::Rectangle { cells, .. } => *cells = [n, n],
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ScenarioError> {
        let (domain, cells) = match *self {
            Self::Interval { lower, upper, cells } => (Domain::interval(lower, upper)?, vec![cells]),
            Self::Rectangle { lower, upper, cells } => (Domain::rectangle(lower, upper)?, cells.to_vec()),
            Self::Radial {
                inner,
                outer,
                dim,
                cells,
            } => (Domain::radial(inner, outer, dim)?, vec![cells]),
            Self::Ball { outer, dim, cells } => (Domain::ball(outer, dim)?, vec![cells]),
        };
        Ok(Grid::new(domain, &cells)?.shared())
    }

    fn is_radial(&self) -> bool {
        matches!(self, Self::Radial { .. } | Self::Ball { .. })
    }
}

/// Named initial-data presets. Temperatures unless stated otherwise.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Uniform {
        value: f64,
    },
    /// `left` below `at` along the first axis, `right` above.
    Step {
        left: f64,
        right: f64,
        at: f64,
    },
    /// `inside` within `radius` of `center` (of the origin on radial grids).
    WarmDisk {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
        inside: f64,
        outside: f64,
    },
    /// `left` below `from`, `right` above `to`, and enthalpy `band_enthalpy`
    /// in `[-1, 0]` (zero temperature) in between.
    FatZeroBand {
        from: f64,
        to: f64,
        left: f64,
        right: f64,
        #[serde(default = "default_band_enthalpy")]
        band_enthalpy: f64,
    },
    /// Exact solution sampled at `t0`; `oracle` is `"wave"` or `"neumann"`.
    OracleSeeded {
        oracle: String,
        #[serde(default = "one")]
        speed: f64,
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default = "one")]
        u_hot: f64,
        #[serde(default = "default_u_cold")]
        u_cold: f64,
        #[serde(default = "default_t0")]
        t0: f64,
    },
}

fn default_band_enthalpy() -> f64 {
    -0.5
}
fn one() -> f64 {
    1.0
}
fn default_offset() -> f64 {
    0.2
}
fn default_u_cold() -> f64 {
    -0.5
}
fn default_t0() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    Initial,
    Constant { value: f64 },
    Oracle,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    #[default]
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_final_time() -> f64 {
    0.1
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            scheme: SchemeSpec::Explicit,
            dt: None,
            cfl: default_cfl(),
            final_time: default_final_time(),
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub vtk: bool,
}

type InitialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Seed = (Arc<dyn ExactSolution>, f64);

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub cells: Option<usize>,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
}

/// A scenario turned into solver inputs.
pub struct Prepared {
    pub spec: ProblemSpec,
    pub options: SolveOptions,
    pub output_name: String,
    pub vtk: bool,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_str(&text, json).map_err(|message| ScenarioError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_str(text: &str, json: bool) -> Result<Scenario, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

impl Scenario {
    pub fn prepare(&self, fallback_name: &str, ov: &Overrides) -> Result<Prepared, ScenarioError> {
        let mut domain = self.domain.clone();
        if let Some(n) = ov.cells {
            domain.set_cells(n);
        }
        let grid = domain.grid()?;
        let sel = Selection::from(self.selection);
        let radial = domain.is_radial();
        let axes = grid.axes();
        let (h0, oracle): (InitialFn, Option<Seed>) =
            match self.initial.clone() {
                InitialData::Uniform { value } => (Arc::new(move |_: &[f64]| chi_inverse(value, sel)), None),
                InitialData::Step { left, right, at } => (
                    Arc::new(move |x: &[f64]| chi_inverse(if x[0] < at { left } else { right }, sel)),
                    None,
                ),
                InitialData::WarmDisk {
                    center,
                    radius,
                    inside,
                    outside,
                } => {
                    let c = center.unwrap_or_else(|| vec![0.0; axes]);
                    if !radial && c.len() != axes {
                        return Err(ScenarioError::Invalid(format!(
                            "warm-disk center has {} coordinates, the domain has {axes}",
                            c.len()
                        )));
                    }
                    (
                        Arc::new(move |x: &[f64]| {
                            let d = if radial {
                                x[0]
                            } else {
                                x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                            };
                            chi_inverse(if d < radius { inside } else { outside }, sel)
                        }),
                        None,
                    )
                }
                InitialData::FatZeroBand {
                    from,
                    to,
                    left,
                    right,
                    band_enthalpy,
                } => {
                    if !(-1.0..=0.0).contains(&band_enthalpy) || from >= to {
                        return Err(ScenarioError::Invalid(
                            "fat-zero-band needs from < to and band_enthalpy in [-1, 0]".into(),
                        ));
                    }
                    (
                        Arc::new(move |x: &[f64]| {
                            if x[0] < from {
                                chi_inverse(left, sel)
                            } else if x[0] > to {
                                chi_inverse(right, sel)
                            } else {
                                band_enthalpy
                            }
                        }),
                        None,
                    )
                }
                InitialData::OracleSeeded {
                    oracle,
                    speed,
                    offset,
                    u_hot,
                    u_cold,
                    t0,
                } => {
                    if !matches!(domain, DomainSpec::Interval { .. }) {
                        return Err(ScenarioError::Invalid("oracle-seeded data need an interval domain".into()));
                    }
                    let sol: Arc<dyn ExactSolution> = match oracle.as_str() {
                        "wave" => Arc::new(TravellingWave::with(speed, offset, AheadState::Bottom)?),
                        "neumann" => Arc::new(Neumann::new(u_hot, u_cold)?),
                        other => {
                            return Err(ScenarioError::Invalid(format!(
                                "unknown oracle `{other}`, expected `wave` or `neumann`"
                            )))
                        }
                    };
                    let s = sol.clone();
                    (Arc::new(move |x: &[f64]| s.h(x[0], t0)), Some((sol, t0)))
                }
            };
        let field = ScalarField::from_fn(grid.clone(), 0.0, |x| h0(x))?;
        let h0_field = EnthalpyField::new(field);
        let boundary = self.boundary.clone().unwrap_or(if oracle.is_some() {
            BoundarySpec::Oracle
        } else {
            BoundarySpec::Initial
        });
        let (theta, boundary_sel) = match boundary {
            BoundarySpec::Initial => {
                let f = h0.clone();
                (BoundaryData::new(move |x, _| chi(f(x))), sel)
            }
            BoundarySpec::Constant { value } => (BoundaryData::constant(value), sel),
            BoundarySpec::Oracle => {
                let Some((sol, t0)) = oracle else {
                    return Err(ScenarioError::Invalid(
                        "boundary mode `oracle` needs the oracle-seeded preset".into(),
                    ));
                };
                let sel = sol.selection();
                (BoundaryData::new(move |x, t| sol.u(x[0], t0 + t)), sel)
            }
        };
        let spec = ProblemSpec::new(h0_field, theta, self.solver.final_time)?.with_boundary_selection(boundary_sel);
        let mut options = match self.solver.scheme {
            SchemeSpec::Explicit => SolveOptions::explicit(),
            SchemeSpec::Implicit => {
                let dt = ov.dt.or(self.solver.dt).ok_or_else(|| {
                    ScenarioError::Invalid("the implicit scheme needs `dt` in [solver] or --dt".into())
                })?;
                SolveOptions::implicit(dt)
            }
        };
        if let Some(dt) = ov.dt.or(self.solver.dt) {
            options = options.with_dt(dt);
        }
        options.cfl = ov.cfl.unwrap_or(self.solver.cfl);
        if let Some(k) = self.solver.snapshot_every {
            options = options.with_snapshot_every(k);
        }
        let output_name = self
            .output
            .dir
            .clone()
            .or_else(|| self.name.clone())
            .unwrap_or_else(|| fallback_name.to_string());
        Ok(Prepared {
            spec,
            options,
            output_name,
            vtk: self.output.vtk,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let s = parse_str("[initial]\npreset = \"uniform\"\nvalue = 1.0\n", false).unwrap();
        assert_eq!(s.domain, DomainSpec::default());
        assert_eq!(s.solver, SolverSpec::default());
        assert_eq!(s.selection, SelectionSpec::Maximal);
        assert_eq!(s.boundary, None);
        let p = s.prepare("minimal", &Overrides::default()).unwrap();
        assert_eq!(p.output_name, "minimal");
        assert_eq!(p.spec.final_time(), 0.1);
        assert_eq!(p.spec.grid().cells(), &[100]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_str(
            "[initial]\npreset = \"uniform\"\nvalue = 1.0\n[solver]\nviscocity = 2.0\n",
            false,
        )
        .unwrap_err();
        assert!(err.contains("unknown field `viscocity`"), "{err}");
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn json_front_end() {
        let s = parse_str(
            r#"{"initial": {"preset": "step", "left": 1.0, "right": -1.0, "at": 0.5}, "solver": {"final_time": 0.01}}"#,
            true,
        )
        .unwrap();
        let t = parse_str(
            "[initial]\npreset = \"step\"\nleft = 1.0\nright = -1.0\nat = 0.5\n[solver]\nfinal_time = 0.01\n",
            false,
        )
        .unwrap();
        assert_eq!(s, t);
        let err = parse_str(r#"{"initial": {"preset": "uniform", "value": 1, "viscocity": 0}}"#, true).unwrap_err();
        assert!(err.contains("viscocity"), "{err}");
    }

    #[test]
    fn incompatible_boundary_names_the_node() {
        let s = parse_str(
            "[initial]\npreset = \"uniform\"\nvalue = 1.0\n[boundary]\nmode = \"constant\"\nvalue = 0.5\n",
            false,
        )
        .unwrap();
        let err = s.prepare("x", &Overrides::default()).err().unwrap().to_string();
        assert!(err.contains("node 0") && err.contains("x = [0.0]"), "{err}");
    }

    #[test]
    fn presets_build() {
        let files = [
            "[initial]\npreset = \"warm-disk\"\nradius = 0.3\ninside = 1.0\noutside = -1.0\n[domain]\nkind = \"rectangle\"\nlower = [-1.0, -1.0]\nupper = [1.0, 1.0]\ncells = [20, 20]\n",
            "[initial]\npreset = \"warm-disk\"\nradius = 0.3\ninside = 1.0\noutside = -1.0\n[domain]\nkind = \"ball\"\nouter = 1.0\ndim = 3\ncells = 40\n",
            "[initial]\npreset = \"fat-zero-band\"\nfrom = 0.3\nto = 0.6\nleft = 1.0\nright = -0.5\n",
            "[initial]\npreset = \"oracle-seeded\"\noracle = \"neumann\"\n",
            "[initial]\npreset = \"oracle-seeded\"\noracle = \"wave\"\nspeed = 2.0\n",
        ];
        for f in files {
            let s = parse_str(f, false).unwrap();
            s.prepare("p", &Overrides { cells: None, dt: None, cfl: Some(0.5) }).unwrap();
        }
        let bad = parse_str("[initial]\npreset = \"oracle-seeded\"\noracle = \"tsunami\"\n", false).unwrap();
        assert!(bad.prepare("p", &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_apply() {
        let s = parse_str("[initial]\npreset = \"uniform\"\nvalue = 1.0\n", false).unwrap();
        let p = s
            .prepare(
                "m",
                &Overrides {
                    cells: Some(40),
                    dt: Some(1e-4),
                    cfl: Some(0.5),
                },
            )
            .unwrap();
        assert_eq!(p.spec.grid().cells(), &[40]);
        assert_eq!(p.options.dt, Some(1e-4));
        assert_eq!(p.options.cfl, 0.5);
    }
}
