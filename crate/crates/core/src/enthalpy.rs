//! The enthalpy-temperature graph with unit latent heat, its two inverse
//! selections, and phase diagnostics.

use std::sync::Arc;

use crate::error::Result;
use crate::mesh::{Grid, ScalarField};

/// Temperature as a function of enthalpy. Flat (zero) on `[-1, 0]`.
#[inline]
pub fn chi(h: f64) -> f64 {
    if h > 0.0 {
        h
    } else if h >= -1.0 {
        0.0
    } else {
        h + 1.0
    }
}

/// Which enthalpy to assign to zero temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// `u = 0` maps to `h = 0` (fully liquid at the melting point).
    #[default]
    Maximal,
    /// `u = 0` maps to `h = -1` (fully solid at the melting point).
    Minimal,
}

#[inline]
pub fn chi_inverse(u: f64, selection: Selection) -> f64 {
    match selection {
        Selection::Maximal if u >= 0.0 => u,
        Selection::Minimal if u > 0.0 => u,
        _ => u - 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Liquid,
    Mushy,
    Solid,
}

#[inline]
pub fn phase(h: f64) -> Phase {
    if h > 0.0 {
        Phase::Liquid
    } else if h >= -1.0 {
        Phase::Mushy
    } else {
        Phase::Solid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    pub labels: Vec<Phase>,
}

impl PhaseMask {
    pub fn count(&self, p: Phase) -> usize {
        self.labels.iter().filter(|&&l| l == p).count()
    }
}

/// Grid-sampled enthalpy at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnthalpyField {
    h: ScalarField,
}

impl EnthalpyField {
    pub fn new(h: ScalarField) -> Self {
        Self { h }
    }

    /// Enthalpy from temperature samples using the given selection at `u = 0`.
    pub fn from_temperature(u: &ScalarField, selection: Selection) -> Self {
        Self {
            h: u.map(|v| chi_inverse(v, selection)),
        }
    }

    pub fn from_temperature_fn(
        grid: Arc<Grid>,
        t: f64,
        selection: Selection,
        u: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let u = ScalarField::from_fn(grid, t, u)?;
        Ok(Self::from_temperature(&u, selection))
    }

    pub fn field(&self) -> &ScalarField {
        &self.h
    }

    pub fn field_mut(&mut self) -> &mut ScalarField {
        &mut self.h
    }

    pub fn into_field(self) -> ScalarField {
        self.h
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.h.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.h.values()
    }

    pub fn time(&self) -> f64 {
        self.h.time()
    }

    pub fn temperature(&self) -> ScalarField {
        self.h.map(chi)
    }

    pub fn classify(&self) -> PhaseMask {
        classify(self)
    }

    pub fn mushy_measure(&self) -> f64 {
        mushy_measure(self)
    }
}

pub fn classify(h: &EnthalpyField) -> PhaseMask {
    PhaseMask {
        labels: h.values().iter().map(|&v| phase(v)).collect(),
    }
}

/// Volume of `{-1 <= h <= 0}` by node counting with trapezoid weights.
pub fn mushy_measure(h: &EnthalpyField) -> f64 {
    let grid = h.grid();
    h.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| (-1.0..=0.0).contains(&v))
        .map(|(k, _)| grid.node_weight(k))
        .sum()
}
