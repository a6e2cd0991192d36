//! Fast path: the dynamics restricted to the `(N+1)`-dimensional span of
//! `|1,vac⟩` (index 0) and `|0,e_n⟩` (index n).

use num_complex::Complex64;

use super::{StateSeries, TimeGrid};
use crate::densemath::ComplexMatrix;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, SectorWeights};
use crate::tolerances::Tolerances;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveUnitary(ComplexMatrix);

impl ActiveUnitary {
    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n + 1))
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() < 2 {
            return Err(Error::Dimension("active unitary must be square with dimension ≥ 2".into()));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Number of bath sites.
    pub fn sites(&self) -> usize {
        self.0.rows() - 1
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }
}

/// Unit direction and rotation angle of the slice generator
/// `K = α(|0⟩⟨G| + |G⟩⟨0|)`; `None` when every amplitude vanishes.
fn rotation(alpha: f64, g: &[Complex64]) -> Option<(Vec<Complex64>, f64)> {
    let len = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if len == 0.0 {
        return None;
    }
    Some((g.iter().map(|z| z / len).collect(), alpha * len))
}

/// `exp(−iK)` for the slice `[t1, t2]`, using the exact integrals `G_n`.
///
/// On span{|0⟩, |b⟩} with `b = G/‖G‖`, `K` acts as `θσ_x` with `θ = α‖G‖`.
pub fn slice_unitary_active(config: &ModelConfig, t1: f64, t2: f64) -> Result<ActiveUnitary> {
    let g = config.slice_integrals(t1, t2)?;
    let n = config.n;
    let Some((b, theta)) = rotation(config.alpha, &g) else {
        return Ok(ActiveUnitary::identity(n));
    };
    let (c, s) = (theta.cos(), theta.sin());
    let mut u = ComplexMatrix::identity(n + 1);
    u[(0, 0)] = Complex64::new(c, 0.0);
    for i in 0..n {
        u[(i + 1, 0)] = -I * s * b[i];
        u[(0, i + 1)] = -I * s * b[i].conj();
        for j in 0..n {
            u[(i + 1, j + 1)] += (c - 1.0) * b[i] * b[j].conj();
        }
    }
    Ok(ActiveUnitary(u))
}

/// `M ← exp(−iK) M` for the slice generator with amplitudes `g`, in `O(N²)`.
pub fn apply_slice(m: &mut ComplexMatrix, alpha: f64, g: &[Complex64]) -> Result<()> {
    let n = g.len();
    if m.rows() != n + 1 {
        return Err(Error::Dimension(format!("{} rows for {n} sites", m.rows())));
    }
    let Some((b, theta)) = rotation(alpha, g) else {
        return Ok(());
    };
    let (c, s) = (theta.cos() - 1.0, theta.sin());
    let cols = m.cols();
    for col in 0..cols {
        let r0 = m[(0, col)];
        let rb: Complex64 = (0..n).map(|i| b[i].conj() * m[(i + 1, col)]).sum();
        let top = c * r0 - I * s * rb;
        let along = c * rb - I * s * r0;
        m[(0, col)] += top;
        for i in 0..n {
            m[(i + 1, col)] += along * b[i];
        }
    }
    Ok(())
}

/// Cumulative `U(t_k, t_start)` for every sample; `U(t_0) = I`.
pub fn propagate_active(config: &ModelConfig, grid: &TimeGrid) -> Result<Vec<ActiveUnitary>> {
    grid.validate_for(config)?;
    let mut u = ComplexMatrix::identity(config.n + 1);
    let mut out = Vec::with_capacity(grid.samples);
    out.push(ActiveUnitary(u.clone()));
    for k in 0..grid.samples - 1 {
        for (t1, t2) in grid.slice_bounds(k) {
            apply_slice(&mut u, config.alpha, &config.slice_integrals(t1, t2)?)?;
        }
        out.push(ActiveUnitary(u.clone()));
    }
    Ok(out)
}

/// Reduced ancilla–system state from the active-subspace unitary.
///
/// The initial bath is a mixture over basis states, so `ρ_as` is a weighted
/// sum of three kinds of pure-branch contributions:
/// * vacuum: `|0⟩_a|0,vac⟩ + |1⟩_a U|1,vac⟩`;
/// * site `m` excited: `|0⟩_a U|0,e_m⟩ + |1⟩_a |1,e_m⟩`;
/// * everything else is frozen and contributes `|Φ⟩⟨Φ|`.
pub fn assemble_rho_as(u: &ActiveUnitary, weights: &SectorWeights) -> Result<ComplexMatrix> {
    let n = u.sites();
    if weights.single.len() != n {
        return Err(Error::Contract(format!("{} single-excitation weights for {n} sites", weights.single.len())));
    }
    let total = weights.total();
    if (total - 1.0).abs() > Tolerances::DEFAULT.weights {
        return Err(Error::Contract(format!("sector weights sum to {total}, not 1")));
    }
    let u = u.matrix();
    let mut rho = ComplexMatrix::zeros(4, 4);
    let (d00, d01, d10, d11) = ((0, 0), (1, 1), (2, 2), (3, 3));

    let w = weights.vacuum * 0.5;
    if w != 0.0 {
        let u00 = u[(0, 0)];
        let leaked: f64 = (1..=n).map(|i| u[(i, 0)].norm_sqr()).sum();
        rho[d00] += w;
        rho[(0, 3)] += u00.conj() * w;
        rho[(3, 0)] += u00 * w;
        rho[d11] += u00.norm_sqr() * w;
        rho[d10] += leaked * w;
    }

    for m in 1..=n {
        let w = weights.single[m - 1] * 0.5;
        if w == 0.0 {
            continue;
        }
        let stayed: f64 = (1..=n).map(|i| u[(i, m)].norm_sqr()).sum();
        let umm = u[(m, m)];
        rho[d01] += u[(0, m)].norm_sqr() * w;
        rho[d00] += stayed * w;
        rho[(0, 3)] += umm * w;
        rho[(3, 0)] += umm.conj() * w;
        rho[d11] += w;
    }

    let w = Complex64::new(weights.frozen * 0.5, 0.0);
    for idx in [d00, (0, 3), (3, 0), d11] {
        rho[idx] += w;
    }
    Ok(rho)
}

/// `ρ_as` at every grid sample via the active subspace.
pub fn fast_propagate(config: &ModelConfig, grid: &TimeGrid) -> Result<StateSeries> {
    let weights = SectorWeights::for_environment(config.n, &config.environment)?;
    let states = propagate_active(config, grid)?
        .iter()
        .map(|u| assemble_rho_as(u, &weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateSeries { grid: *grid, states })
}
