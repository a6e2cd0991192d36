//! Problem definition: bath size, interaction scale, bath preparation and
//! coupling profile, plus the operators built from them.
//!
//! Flat index of a system ⊗ bath basis state is `s·2^N + x`, where bit
//! `N − n` of `x` is the excitation of site `n` (site 1 is most significant).

pub(crate) mod coupling;
mod eigen;

pub use coupling::{Coupling, DEFAULT_POWER_T0};
pub use eigen::{spectrum_of, structured_eigensystem, Spectrum, StructuredEigensystem};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densemath::ComplexMatrix;
use crate::error::{Error, Result};
use crate::tolerances::DEFAULT_DIM_CAP;

/// Temperature as given by the user; canonicalized to the ground-state
/// population `p` of each bath qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Beta(f64),
    P(f64),
    Zero,
}

impl Temperature {
    pub fn to_p(self) -> Result<f64> {
        let p = match self {
            Temperature::Beta(b) => excitation_probability(b)?,
            Temperature::P(p) => p,
            Temperature::Zero => 1.0,
        };
        if !(0.5..=1.0).contains(&p) {
            return Err(Error::Config(format!("ground-state population p = {p} must lie in [1/2, 1]")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Environment {
    /// `[p|0⟩⟨0| + (1−p)|1⟩⟨1|]^⊗N`.
    Thermal { p: f64 },
    /// A computational basis state with the listed (1-based) sites excited.
    BasisState { excited: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub alpha: f64,
    pub environment: Environment,
    pub coupling: Coupling,
}

impl ModelConfig {
    pub fn new(n: usize, alpha: f64, temperature: Temperature, coupling: Coupling) -> Result<Self> {
        let cfg = Self { n, alpha, environment: Environment::Thermal { p: temperature.to_p()? }, coupling };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_basis_environment(n: usize, alpha: f64, excited: Vec<usize>, coupling: Coupling) -> Result<Self> {
        let cfg = Self { n, alpha, environment: Environment::BasisState { excited }, coupling };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("bath must contain at least one qubit".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha = {} must be positive and finite", self.alpha)));
        }
        match &self.environment {
            Environment::Thermal { p } => {
                if !(0.5..=1.0).contains(p) {
                    return Err(Error::Config(format!("ground-state population p = {p} must lie in [1/2, 1]")));
                }
            }
            Environment::BasisState { excited } => {
                let mut seen = vec![false; self.n + 1];
                for &s in excited {
                    if s == 0 || s > self.n {
                        return Err(Error::Config(format!("excited site {s} out of range 1..={}", self.n)));
                    }
                    if std::mem::replace(&mut seen[s], true) {
                        return Err(Error::Config(format!("site {s} listed twice")));
                    }
                }
            }
        }
        self.coupling.validate(self.n)
    }

    /// Thermal population `p`, if the bath is thermal.
    pub fn p(&self) -> Option<f64> {
        match self.environment {
            Environment::Thermal { p } => Some(p),
            Environment::BasisState { .. } => None,
        }
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        let cfg = Self { n, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        let cfg = Self { environment: Environment::Thermal { p }, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_coupling(&self, coupling: Coupling) -> Result<Self> {
        let cfg = Self { coupling, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All `g_n(t)`, sites in order.
    pub fn couplings_at(&self, t: f64) -> Result<Vec<Complex64>> {
        (1..=self.n).map(|site| self.coupling.value(site, t)).collect()
    }

    /// All `G_n = ∫_{t1}^{t2} g_n`, sites in order.
    pub fn slice_integrals(&self, t1: f64, t2: f64) -> Result<Vec<Complex64>> {
        (1..=self.n).map(|site| self.coupling.slice_integral(site, t1, t2)).collect()
    }
}

/// Ground-state population `1/(1 + e^(−β))`; `β = +∞` gives exactly 1.
pub fn excitation_probability(beta: f64) -> Result<f64> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Domain(format!("inverse temperature β = {beta} must be ≥ 0")));
    }
    if beta == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + (-beta).exp()))
}

/// `E(t) = α √(Σ_n |g_n(t)|²)` (ħ = 1).
pub fn coupling_norm_energy(config: &ModelConfig, t: f64) -> Result<f64> {
    let sum: f64 = config.couplings_at(t)?.iter().map(|g| g.norm_sqr()).sum();
    Ok(config.alpha * sum.sqrt())
}

/// Flat index of `|s⟩ ⊗ |x⟩` in the system ⊗ bath space.
pub fn se_index(n: usize, system: usize, env: usize) -> usize {
    (system << n) | env
}

/// Bath basis index with only `site` excited.
pub fn site_excitation(n: usize, site: usize) -> usize {
    1usize << (n - site)
}

/// Exchange operator on system ⊗ bath with amplitudes `c_n`:
/// `α Σ_n (c_n* |1,vac⟩⟨0,e_n| + c_n |0,e_n⟩⟨1,vac|)`.
///
/// With `c_n = g_n(t)` it is the Hamiltonian; with `c_n = G_n` it is the
/// integrated generator of one time slice.
pub fn exchange_operator(n: usize, alpha: f64, c: &[Complex64], cap: usize) -> Result<ComplexMatrix> {
    if c.len() != n {
        return Err(Error::Dimension(format!("{} amplitudes for {n} sites", c.len())));
    }
    let dim = 1usize.checked_shl(n as u32 + 1).filter(|_| n < 62).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::CapExceeded { dim, cap });
    }
    let mut h = ComplexMatrix::zeros(dim, dim);
    let top = se_index(n, 1, 0);
    for (k, &g) in c.iter().enumerate() {
        let low = se_index(n, 0, site_excitation(n, k + 1));
        h[(top, low)] = g.conj() * alpha;
        h[(low, top)] = g * alpha;
    }
    Ok(h)
}

pub fn build_hamiltonian_full(config: &ModelConfig, t: f64) -> Result<ComplexMatrix> {
    exchange_operator(config.n, config.alpha, &config.couplings_at(t)?, DEFAULT_DIM_CAP)
}

fn check_p(p: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [1/2, 1]")));
    }
    Ok(())
}

fn env_dim(n: usize, cap: usize) -> Result<usize> {
    let dim = 1usize.checked_shl(n as u32).filter(|_| n < 63).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::CapExceeded { dim, cap });
    }
    Ok(dim)
}

/// Diagonal product state `[p|0⟩⟨0| + (1−p)|1⟩⟨1|]^⊗N`.
pub fn thermal_env_state_full(p: f64, n: usize) -> Result<ComplexMatrix> {
    check_p(p)?;
    let dim = env_dim(n, DEFAULT_DIM_CAP)?;
    let diag: Vec<f64> = (0..dim)
        .map(|x| {
            let k = (x as u64).count_ones() as i32;
            p.powi(n as i32 - k) * (1.0 - p).powi(k)
        })
        .collect();
    Ok(ComplexMatrix::from_real_diagonal(&diag))
}

/// Projector onto a bath basis state with the given sites excited.
pub fn basis_env_state_full(n: usize, excited: &[usize]) -> Result<ComplexMatrix> {
    let dim = env_dim(n, DEFAULT_DIM_CAP)?;
    let x = excited.iter().fold(0usize, |acc, &s| acc | site_excitation(n, s));
    let mut diag = vec![0.0; dim];
    diag[x] = 1.0;
    Ok(ComplexMatrix::from_real_diagonal(&diag))
}

/// Weights of the initial bath state on the sectors the dynamics treats
/// differently: the vacuum, each single excitation, and everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorWeights {
    pub vacuum: f64,
    /// One entry per site, in site order.
    pub single: Vec<f64>,
    pub frozen: f64,
}

impl SectorWeights {
    pub fn total(&self) -> f64 {
        self.vacuum + self.single.iter().sum::<f64>() + self.frozen
    }

    pub fn for_environment(n: usize, env: &Environment) -> Result<Self> {
        match env {
            Environment::Thermal { p } => thermal_sector_weights(*p, n),
            Environment::BasisState { excited } => {
                let mut w = SectorWeights { vacuum: 0.0, single: vec![0.0; n], frozen: 0.0 };
                match excited.as_slice() {
                    [] => w.vacuum = 1.0,
                    [site] => w.single[site - 1] = 1.0,
                    _ => w.frozen = 1.0,
                }
                Ok(w)
            }
        }
    }
}

pub fn thermal_sector_weights(p: f64, n: usize) -> Result<SectorWeights> {
    check_p(p)?;
    let vacuum = p.powi(n as i32);
    let single = p.powi(n as i32 - 1) * (1.0 - p);
    let frozen = (1.0 - vacuum - n as f64 * single).max(0.0);
    Ok(SectorWeights { vacuum, single: vec![single; n], frozen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemath::{hermitian_eigensystem, kron};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn uniform(n: usize, alpha: f64, p: f64) -> ModelConfig {
        ModelConfig::new(n, alpha, Temperature::P(p), Coupling::SitesConstant { g: vec![c(1.0); n] }).unwrap()
    }

    #[test]
    fn excitation_probability_values() {
        assert_eq!(excitation_probability(0.0).unwrap(), 0.5);
        assert_eq!(excitation_probability(f64::INFINITY).unwrap(), 1.0);
        assert_abs_diff_eq!(excitation_probability(3f64.ln()).unwrap(), 0.75, epsilon = 1e-15);
        assert!(matches!(excitation_probability(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn norm_energy_values() {
        assert_abs_diff_eq!(coupling_norm_energy(&uniform(6, 1.0, 0.6), 0.3).unwrap(), 6f64.sqrt(), epsilon = 1e-15);
        let zero = ModelConfig::new(3, 1.0, Temperature::Zero, Coupling::SitesConstant { g: vec![c(0.0); 3] }).unwrap();
        assert_eq!(coupling_norm_energy(&zero, 1.0).unwrap(), 0.0);
        let g12 = ModelConfig::new(2, 1.0, Temperature::Zero, Coupling::SitesConstant { g: vec![c(1.0), c(2.0)] }).unwrap();
        assert_abs_diff_eq!(coupling_norm_energy(&g12, 0.0).unwrap(), 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn single_site_hamiltonian_layout() {
        let g = Complex64::new(0.3, -0.8);
        let cfg = ModelConfig::new(1, 1.5, Temperature::Zero, Coupling::SitesConstant { g: vec![g] }).unwrap();
        let h = build_hamiltonian_full(&cfg, 0.0).unwrap();
        assert_eq!(h.rows(), 4);
        // |0_s 1_e⟩ = index 1, |1_s 0_e⟩ = index 2
        assert_eq!(h[(1, 2)], g * 1.5);
        assert_eq!(h[(2, 1)], g.conj() * 1.5);
        let nonzero = h.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn hamiltonian_is_hermitian_rank_two() {
        let cfg = ModelConfig::new(
            3,
            1.0,
            Temperature::P(0.7),
            Coupling::SitesConstant { g: vec![Complex64::new(1.0, 1.0), c(-0.5), c(0.2)] },
        )
        .unwrap();
        let h = build_hamiltonian_full(&cfg, 0.0).unwrap();
        assert!(h.hermiticity_residual() <= 1e-14);
        let eig = hermitian_eigensystem(&h).unwrap();
        let nonzero = eig.eigenvalues.iter().filter(|l| l.abs() > 1e-12).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn two_site_uniform_eigenvalues() {
        let h = build_hamiltonian_full(&uniform(2, 1.0, 1.0), 0.0).unwrap();
        let eig = hermitian_eigensystem(&h).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(eig.eigenvalues[7], 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn thermal_state_cases() {
        let z = thermal_env_state_full(1.0, 3).unwrap();
        assert_eq!(z[(0, 0)], c(1.0));
        assert_abs_diff_eq!(z.trace().re, 1.0, epsilon = 1e-15);

        let quarter = thermal_env_state_full(0.5, 2).unwrap();
        assert!(quarter.max_abs_diff(&ComplexMatrix::identity(4).scale(c(0.25))).unwrap() < 1e-15);

        let p = 0.8;
        let one = ComplexMatrix::from_real_diagonal(&[p, 1.0 - p]);
        let by_kron = kron(&kron(&one, &one).unwrap(), &one).unwrap();
        let direct = thermal_env_state_full(p, 3).unwrap();
        assert!(direct.max_abs_diff(&by_kron).unwrap() < 1e-15);
        // |011⟩ has two excitations
        assert_abs_diff_eq!(direct[(3, 3)].re, p * (1.0 - p) * (1.0 - p), epsilon = 1e-15);
    }

    #[test]
    fn sector_weight_cases() {
        let w = thermal_sector_weights(0.5, 2).unwrap();
        assert_eq!((w.vacuum, w.single.clone(), w.frozen), (0.25, vec![0.25, 0.25], 0.25));
        let w = thermal_sector_weights(1.0, 5).unwrap();
        assert_eq!((w.vacuum, w.frozen), (1.0, 0.0));
        assert!(w.single.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sector_weights_match_grouped_diagonal() {
        for n in 1..=10 {
            for p in [0.5, 0.6, 0.8, 0.95, 1.0] {
                let rho = thermal_env_state_full(p, n).unwrap();
                let w = thermal_sector_weights(p, n).unwrap();
                let dim = 1usize << n;
                let mut vac = 0.0;
                let mut single = vec![0.0; n];
                let mut rest = 0.0;
                for x in 0..dim {
                    let d = rho[(x, x)].re;
                    match x.count_ones() {
                        0 => vac += d,
                        1 => single[n - 1 - x.trailing_zeros() as usize] += d,
                        _ => rest += d,
                    }
                }
                assert_abs_diff_eq!(w.vacuum, vac, epsilon = 1e-12);
                for s in 0..n {
                    assert_abs_diff_eq!(w.single[s], single[s], epsilon = 1e-12);
                }
                assert_abs_diff_eq!(w.frozen, rest, epsilon = 1e-12);
                assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-12);
            }
        }
        // the Fig. 2 regime
        let w = thermal_sector_weights(0.6, 6).unwrap();
        assert_abs_diff_eq!(w.vacuum, 0.6f64.powi(6), epsilon = 1e-15);
        assert_abs_diff_eq!(w.single[0], 0.6f64.powi(5) * 0.4, epsilon = 1e-15);
    }

    #[test]
    fn basis_environment_sectors() {
        let g = Coupling::SiteTimeExponential { gamma1: 0.3 };
        let cases: [(Vec<usize>, &str); 3] = [(vec![], "vac"), (vec![2], "single"), (vec![1, 3], "frozen")];
        for (excited, kind) in cases {
            let w = SectorWeights::for_environment(3, &Environment::BasisState { excited: excited.clone() }).unwrap();
            match kind {
                "vac" => assert_eq!(w.vacuum, 1.0),
                "single" => assert_eq!(w.single[1], 1.0),
                _ => assert_eq!(w.frozen, 1.0),
            }
            ModelConfig::with_basis_environment(3, 1.0, excited, g.clone()).unwrap();
        }
        assert!(ModelConfig::with_basis_environment(3, 1.0, vec![4], g.clone()).is_err());
        assert!(ModelConfig::with_basis_environment(3, 1.0, vec![2, 2], g).is_err());
    }

    #[test]
    fn temperature_canonicalization() {
        assert_eq!(Temperature::Zero.to_p().unwrap(), 1.0);
        assert_eq!(Temperature::Beta(0.0).to_p().unwrap(), 0.5);
        assert!(Temperature::P(0.3).to_p().is_err());
    }
}
