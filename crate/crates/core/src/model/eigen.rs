//! Explicit eigenbasis of the exchange operator.
//!
//! Two eigenvectors carry the nonzero energies `±α‖c‖`:
//! `χ± = (|1,vac⟩ ± |0⟩⊗|β₀⟩)/√2` with `β₀ = Σ c_n|e_n⟩/‖c‖`. The zero
//! eigenspace is spanned by `|0,vac⟩`, `|0⟩⊗|β_q⟩` for the Gram–Schmidt
//! completion `β₁..β_{N−1}` of `β₀` inside the single-excitation space, and
//! every remaining computational basis state.

use num_complex::Complex64;

use super::{se_index, site_excitation, ModelConfig};
use crate::densemath::{ComplexMatrix, SupportedUnitary};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub enum Spectrum {
    /// All amplitudes vanish: the operator is zero and every vector is an
    /// eigenvector with eigenvalue 0.
    ZeroHamiltonian { n: usize },
    Rank2(StructuredEigensystem),
}

impl Spectrum {
    /// `exp(−iH)` for the operator this spectrum describes.
    pub fn propagator(&self) -> ComplexMatrix {
        match self {
            Spectrum::ZeroHamiltonian { n } => ComplexMatrix::identity(1 << (n + 1)),
            Spectrum::Rank2(s) => s.propagator(),
        }
    }

    /// `exp(−iH)` stored on the indices where it differs from the identity.
    pub fn supported_propagator(&self) -> Result<SupportedUnitary> {
        match self {
            Spectrum::ZeroHamiltonian { n } => SupportedUnitary::new(1 << (n + 1), Vec::new(), Vec::new()),
            Spectrum::Rank2(s) => s.supported_propagator(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuredEigensystem {
    n: usize,
    energy: f64,
    /// `β_0..β_{N−1}` in site coordinates.
    beta: Vec<Vec<Complex64>>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Completes the unit vector `b0` to an orthonormal basis of `C^n` by
/// eliminating it from the standard basis vectors, most orthogonal first.
fn complete_basis(b0: Vec<Complex64>) -> Result<Vec<Vec<Complex64>>> {
    let n = b0.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b0[i].norm().total_cmp(&b0[j].norm()));
    let mut basis = vec![b0];
    for k in order {
        if basis.len() == n {
            break;
        }
        let mut v = vec![ZERO; n];
        v[k] = Complex64::new(1.0, 0.0);
        // two modified Gram–Schmidt passes
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let len = norm(&v);
        if len > 1e-8 {
            basis.push(v.into_iter().map(|z| z / len).collect());
        }
    }
    if basis.len() != n {
        return Err(Error::Contract(format!("Gram–Schmidt produced {} of {n} vectors", basis.len())));
    }
    Ok(basis)
}

/// Eigensystem of the exchange operator with amplitudes `c`.
pub fn spectrum_of(n: usize, alpha: f64, c: &[Complex64]) -> Result<Spectrum> {
    if c.len() != n || n == 0 {
        return Err(Error::Dimension(format!("{} amplitudes for {n} sites", c.len())));
    }
    let len = norm(c);
    if len == 0.0 {
        return Ok(Spectrum::ZeroHamiltonian { n });
    }
    let b0: Vec<Complex64> = c.iter().map(|z| z / len).collect();
    Ok(Spectrum::Rank2(StructuredEigensystem { n, energy: alpha * len, beta: complete_basis(b0)? }))
}

pub fn structured_eigensystem(config: &ModelConfig, t: f64) -> Result<Spectrum> {
    spectrum_of(config.n, config.alpha, &config.couplings_at(t)?)
}

impl StructuredEigensystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e_plus(&self) -> f64 {
        self.energy
    }

    pub fn e_minus(&self) -> f64 {
        -self.energy
    }

    pub fn beta(&self) -> &[Vec<Complex64>] {
        &self.beta
    }

    fn dim(&self) -> usize {
        1 << (self.n + 1)
    }

    /// Active indices: `|1,vac⟩` then `|0,e_n⟩` for n = 1..N.
    fn active_indices(&self) -> Vec<usize> {
        std::iter::once(se_index(self.n, 1, 0))
            .chain((1..=self.n).map(|s| se_index(self.n, 0, site_excitation(self.n, s))))
            .collect()
    }

    fn embed(&self, active: &[Complex64]) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.dim()];
        for (&i, &a) in self.active_indices().iter().zip(active) {
            v[i] = a;
        }
        v
    }

    /// Active-coordinate form of `χ±`.
    fn chi_active(&self, sign: f64) -> Vec<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        std::iter::once(Complex64::new(s, 0.0)).chain(self.beta[0].iter().map(|b| b * (sign * s))).collect()
    }

    fn phi_active(&self, q: usize) -> Vec<Complex64> {
        std::iter::once(ZERO).chain(self.beta[q].iter().copied()).collect()
    }

    /// `χ+` (sign > 0) or `χ−` in the full system ⊗ bath space.
    pub fn chi(&self, sign: f64) -> Vec<Complex64> {
        self.embed(&self.chi_active(sign.signum()))
    }

    /// Computational basis states that are null eigenvectors: `|0,vac⟩`,
    /// multi-excitation `|0,x⟩` and every `|1,x⟩` with `x ≠ vac`.
    pub fn frozen_basis_states(&self) -> Vec<usize> {
        let env = 1usize << self.n;
        let mut out = vec![se_index(self.n, 0, 0)];
        out.extend((0..env).filter(|x| x.count_ones() >= 2).map(|x| se_index(self.n, 0, x)));
        out.extend((1..env).map(|x| se_index(self.n, 1, x)));
        out
    }

    pub fn zero_multiplicity(&self) -> usize {
        (self.n - 1) + self.frozen_basis_states().len()
    }

    /// Every eigenpair as full-space vectors, energies `+E, −E` first.
    pub fn eigenpairs_full(&self) -> Vec<(f64, Vec<Complex64>)> {
        let mut out = vec![(self.energy, self.chi(1.0)), (-self.energy, self.chi(-1.0))];
        out.extend((1..self.n).map(|q| (0.0, self.embed(&self.phi_active(q)))));
        for i in self.frozen_basis_states() {
            let mut v = vec![ZERO; self.dim()];
            v[i] = Complex64::new(1.0, 0.0);
            out.push((0.0, v));
        }
        out
    }

    /// `Σ_k e^(−iλ_k) |v_k⟩⟨v_k|` over the eigenvectors with support on the
    /// active indices; every frozen basis state maps to itself.
    fn active_propagator_block(&self) -> Vec<Complex64> {
        let s = self.n + 1;
        let mut block = vec![ZERO; s * s];
        let mut add = |phase: Complex64, v: &[Complex64]| {
            for a in 0..s {
                for b in 0..s {
                    block[a * s + b] += phase * v[a] * v[b].conj();
                }
            }
        };
        add(Complex64::from_polar(1.0, -self.energy), &self.chi_active(1.0));
        add(Complex64::from_polar(1.0, self.energy), &self.chi_active(-1.0));
        for q in 1..self.n {
            add(Complex64::new(1.0, 0.0), &self.phi_active(q));
        }
        block
    }

    /// `exp(−iH)` over the whole eigenbasis.
    pub fn propagator(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(self.dim());
        let idx = self.active_indices();
        let block = self.active_propagator_block();
        let s = idx.len();
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                u[(ia, ib)] = block[a * s + b];
            }
        }
        u
    }

    /// The same propagator stored only on the active indices.
    pub fn supported_propagator(&self) -> Result<SupportedUnitary> {
        SupportedUnitary::new(self.dim(), self.active_indices(), self.active_propagator_block())
    }
}
