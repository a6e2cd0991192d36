//! Ancilla–system state `ρ_as(t)` by three independent routes.

mod active;
mod closed_form;
mod oracle;

pub use active::{apply_slice, assemble_rho_as, fast_propagate, propagate_active, slice_unitary_active, ActiveUnitary};
pub use closed_form::{
    closed_form_params, closed_form_rho_as, closed_form_rho_as_between, lambda_closed_form, lambda_from_phase, omega_phase,
    omega_phase_between, omega_phase_quadrature, rho_from_phase, ClosedFormParams,
};
pub use oracle::{brute_force_propagate, brute_force_propagate_with, OracleExponential, OracleOptions};

use serde::{Deserialize, Serialize};

use crate::densemath::ComplexMatrix;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::Complex64;

/// Uniform sample times, each interval split into equal Trotter slices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub slices_per_sample: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, samples: usize, slices_per_sample: usize) -> Result<Self> {
        let grid = Self { t_start, t_end, samples, slices_per_sample };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_start < 0.0 {
            return Err(Error::Config("grid times must be finite with t_start ≥ 0".into()));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!("t_end = {} must exceed t_start = {}", self.t_end, self.t_start)));
        }
        if self.samples < 2 {
            return Err(Error::Config("a grid needs at least 2 samples".into()));
        }
        if self.slices_per_sample == 0 {
            return Err(Error::Config("slices per sample must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Also checks the grid starts inside the coupling's domain.
    pub fn validate_for(&self, config: &ModelConfig) -> Result<()> {
        self.validate()?;
        let t0 = config.coupling.start_time();
        if self.t_start < t0 {
            return Err(Error::Config(format!(
                "{} coupling starts at t0 = {t0}; grid starts at {}",
                config.coupling.family_name(),
                self.t_start
            )));
        }
        Ok(())
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.samples {
            return self.t_end;
        }
        self.t_start + (self.t_end - self.t_start) * k as f64 / (self.samples - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|k| self.time(k)).collect()
    }

    pub fn total_slices(&self) -> usize {
        (self.samples - 1) * self.slices_per_sample
    }

    pub fn with_slices(&self, slices_per_sample: usize) -> Self {
        Self { slices_per_sample, ..*self }
    }

    /// Stretches the span by `factor` at the same sample spacing.
    pub fn extended(&self, factor: f64) -> Self {
        let intervals = ((self.samples - 1) as f64 * factor).ceil() as usize;
        let dt = (self.t_end - self.t_start) / (self.samples - 1) as f64;
        Self { t_end: self.t_start + dt * intervals as f64, samples: intervals + 1, ..*self }
    }

    /// Slice boundaries inside sample interval `k`.
    pub(crate) fn slice_bounds(&self, k: usize) -> impl Iterator<Item = (f64, f64)> {
        let (a, b) = (self.time(k), self.time(k + 1));
        let m = self.slices_per_sample;
        (0..m).map(move |j| {
            let lo = a + (b - a) * j as f64 / m as f64;
            let hi = if j + 1 == m { b } else { a + (b - a) * (j + 1) as f64 / m as f64 };
            (lo, hi)
        })
    }
}

/// Sampled 4×4 ancilla ⊗ system states.
#[derive(Debug, Clone)]
pub struct StateSeries {
    pub grid: TimeGrid,
    pub states: Vec<ComplexMatrix>,
}

impl StateSeries {
    /// Largest entrywise deviation from another series on the same grid.
    pub fn max_deviation(&self, other: &StateSeries) -> Result<f64> {
        if self.states.len() != other.states.len() {
            return Err(Error::Dimension("series lengths differ".into()));
        }
        self.states.iter().zip(&other.states).try_fold(0.0f64, |acc, (a, b)| Ok(acc.max(a.max_abs_diff(b)?)))
    }
}

/// `|Φ⟩⟨Φ|` with `|Φ⟩ = (|00⟩ + |11⟩)/√2`, ancilla first.
pub fn bell_state() -> ComplexMatrix {
    let h = Complex64::new(0.5, 0.0);
    let mut rho = ComplexMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        rho[(i, j)] = h;
    }
    rho
}
