//! Reference engine: the full ancilla ⊗ system ⊗ bath density matrix,
//! propagated slice by slice and partially traced at every sample.

use serde::{Deserialize, Serialize};

use super::{bell_state, StateSeries, TimeGrid};
use crate::densemath::{kron_with_cap, partial_trace, unitary_from_generator, SupportedUnitary};
use crate::error::{Error, Result};
use crate::model::{basis_env_state_full, exchange_operator, spectrum_of, thermal_env_state_full, Environment, ModelConfig};
use crate::tolerances::DEFAULT_ORACLE_DIM_CAP;

/// How each slice propagator `exp(−i∫H)` is formed on system ⊗ bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleExponential {
    /// Sum over the explicit eigenbasis (Gram–Schmidt null space included).
    #[default]
    Eigenbasis,
    /// Numerical diagonalization of the dense slice generator.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub exponential: OracleExponential,
    /// Cap on the full dimension `2^(N+2)`.
    pub dim_cap: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { exponential: OracleExponential::default(), dim_cap: DEFAULT_ORACLE_DIM_CAP }
    }
}

pub fn brute_force_propagate(config: &ModelConfig, grid: &TimeGrid) -> Result<StateSeries> {
    brute_force_propagate_with(config, grid, &OracleOptions::default())
}

pub fn brute_force_propagate_with(config: &ModelConfig, grid: &TimeGrid, opts: &OracleOptions) -> Result<StateSeries> {
    grid.validate_for(config)?;
    let n = config.n;
    let dim = if n + 2 < usize::BITS as usize { 1usize << (n + 2) } else { usize::MAX };
    if dim > opts.dim_cap {
        return Err(Error::CapExceeded { dim, cap: opts.dim_cap });
    }
    let rho_env = match &config.environment {
        Environment::Thermal { p } => thermal_env_state_full(*p, n)?,
        Environment::BasisState { excited } => basis_env_state_full(n, excited)?,
    };
    let mut rho = kron_with_cap(&bell_state(), &rho_env, opts.dim_cap)?;
    drop(rho_env);

    // ancilla, system, then one factor per bath site
    let dims = vec![2usize; n + 2];
    let reduce = |rho: &crate::densemath::ComplexMatrix| partial_trace(rho, &dims, &[0, 1]);

    let mut states = Vec::with_capacity(grid.samples);
    states.push(reduce(&rho)?);
    for k in 0..grid.samples - 1 {
        for (t1, t2) in grid.slice_bounds(k) {
            let g = config.slice_integrals(t1, t2)?;
            let u = match opts.exponential {
                OracleExponential::Eigenbasis => spectrum_of(n, config.alpha, &g)?.supported_propagator()?,
                OracleExponential::Dense => SupportedUnitary::from_dense(&unitary_from_generator(
                    &exchange_operator(n, config.alpha, &g, opts.dim_cap)?,
                    1.0,
                )?)?,
            };
            u.conjugate_embedded(&mut rho, 2)?;
        }
        states.push(reduce(&rho)?);
    }
    Ok(StateSeries { grid: *grid, states })
}
