//! Analytic `ρ_as(t)` and its lowest partial-transpose eigenvalue for
//! couplings whose Hamiltonians commute at different times.
//!
//! There the whole evolution is one rotation by the accumulated phase
//! `Ω(t) = α ∫ √(Σ_n |g_n|²) dτ`.

use num_complex::Complex64;

use crate::densemath::ComplexMatrix;
use crate::error::{Error, Result};
use crate::model::{Coupling, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormParams {
    pub p: f64,
    pub n: usize,
    /// `p^(N−1)/2`
    pub c1: f64,
    /// `p^(2N−2)(1 − 4p + 4p²)/4`
    pub c2: f64,
    /// `4p^(N−1)(p^(N−1) − 1)`
    pub c3: f64,
}

impl ClosedFormParams {
    /// `p^(N−1)`.
    pub fn q(&self) -> f64 {
        self.p.powi(self.n as i32 - 1)
    }
}

pub fn closed_form_params(p: f64, n: usize) -> ClosedFormParams {
    let q = p.powi(n as i32 - 1);
    ClosedFormParams {
        p,
        n,
        c1: q / 2.0,
        c2: q * q * (1.0 - 4.0 * p + 4.0 * p * p) / 4.0,
        c3: 4.0 * q * (q - 1.0),
    }
}

fn unsupported(config: &ModelConfig) -> Error {
    Error::Unsupported(format!(
        "{} coupling has non-commuting Hamiltonians; no accumulated-phase description",
        config.coupling.family_name()
    ))
}

/// `Ω(t2) − Ω(t1)`.
pub fn omega_phase_between(config: &ModelConfig, t1: f64, t2: f64) -> Result<f64> {
    let alpha = config.alpha;
    let root_n = (config.n as f64).sqrt();
    let shared_profile = |c: &Coupling| c.slice_integral(1, t1, t2).map(|z| alpha * root_n * z.re);
    match &config.coupling {
        Coupling::SitesConstant { g } => {
            if t2 < t1 {
                return Err(Error::Domain("phase interval must satisfy t1 ≤ t2".into()));
            }
            let len = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            Ok(alpha * len * (t2 - t1))
        }
        Coupling::TimeExponential { gamma } => {
            // only the decay rate reaches |g|
            shared_profile(&Coupling::TimeExponential { gamma: Complex64::new(gamma.re, 0.0) })
        }
        c @ Coupling::TimePolynomial { .. } => shared_profile(c),
        c @ Coupling::SiteTimeExponential { gamma1 } if *gamma1 == 0.0 => shared_profile(c),
        c @ Coupling::Tabulated { .. } if c.is_commuting() => shared_profile(c),
        _ => Err(unsupported(config)),
    }
}

/// `Ω(t)` measured from the coupling's start time.
pub fn omega_phase(config: &ModelConfig, t: f64) -> Result<f64> {
    omega_phase_between(config, config.coupling.start_time(), t)
}

/// `Ω(t2) − Ω(t1)` by quadrature of `α √(Σ_n |g_n|²)`.
pub fn omega_phase_quadrature(config: &ModelConfig, t1: f64, t2: f64, rel_tol: f64) -> Result<f64> {
    if let Coupling::TimeExponential { .. } = config.coupling {
    } else if !config.coupling.is_commuting() {
        return Err(unsupported(config));
    }
    let integrand = |t: f64| match config.couplings_at(t) {
        Ok(g) => g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        Err(_) => f64::NAN,
    };
    Ok(config.alpha * crate::model::coupling::integrate_split(&config.coupling, t1, t2, rel_tol, integrand)?)
}

fn require_closed_form(config: &ModelConfig) -> Result<ClosedFormParams> {
    if !config.coupling.is_commuting() {
        return Err(unsupported(config));
    }
    let p = config.p().ok_or_else(|| Error::Unsupported("closed form needs a thermal bath".into()))?;
    Ok(closed_form_params(p, config.n))
}

/// Ancilla ⊗ system state after accumulated phase `Ω`.
pub fn rho_from_phase(params: &ClosedFormParams, omega: f64) -> ComplexMatrix {
    let (p, q) = (params.p, params.q());
    let s2 = omega.sin().powi(2);
    let h = (omega / 2.0).sin().powi(2);
    let coherence = 0.5 * (1.0 - 2.0 * q * h);
    let mut rho = ComplexMatrix::from_real_diagonal(&[
        0.5 * (1.0 - q * (1.0 - p) * s2),
        0.5 * q * (1.0 - p) * s2,
        0.5 * p * q * s2,
        0.5 * (1.0 - p * q * s2),
    ]);
    rho[(0, 3)] = Complex64::new(coherence, 0.0);
    rho[(3, 0)] = Complex64::new(coherence, 0.0);
    rho
}

/// Lower eigenvalue of the `{|01⟩, |10⟩}` block of the partial transpose:
/// `½[C1 sin²Ω − √(C2 sin⁴Ω + (1 − 2p^(N−1) sin²(Ω/2))²)]`.
pub fn lambda_from_phase(params: &ClosedFormParams, omega: f64) -> f64 {
    let s2 = omega.sin().powi(2);
    let h = (omega / 2.0).sin().powi(2);
    let coherence = 1.0 - 2.0 * params.q() * h;
    0.5 * (params.c1 * s2 - (params.c2 * s2 * s2 + coherence * coherence).sqrt())
}

pub fn closed_form_rho_as_between(config: &ModelConfig, t_start: f64, t: f64) -> Result<ComplexMatrix> {
    let params = require_closed_form(config)?;
    Ok(rho_from_phase(&params, omega_phase_between(config, t_start, t)?))
}

pub fn closed_form_rho_as(config: &ModelConfig, t: f64) -> Result<ComplexMatrix> {
    closed_form_rho_as_between(config, config.coupling.start_time(), t)
}

pub fn lambda_closed_form(config: &ModelConfig, t: f64) -> Result<f64> {
    let params = require_closed_form(config)?;
    Ok(lambda_from_phase(&params, omega_phase(config, t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemath::{pt_min_eigenvalue, pt_spectrum_dense};
    use crate::model::Temperature;
    use crate::propagate::{bell_state, brute_force_propagate, TimeGrid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn uniform(n: usize, p: f64) -> ModelConfig {
        ModelConfig::new(n, 1.0, Temperature::P(p), Coupling::SitesConstant { g: vec![c(1.0); n] }).unwrap()
    }

    #[test]
    fn params_identity_and_sign() {
        for p in [0.5, 0.6, 0.8, 1.0] {
            for n in 1..=10 {
                let cf = closed_form_params(p, n);
                assert!(cf.c3 <= 0.0);
                assert_abs_diff_eq!(1.0 + cf.c3, (2.0 * p.powi(n as i32 - 1) - 1.0).powi(2), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn initial_values() {
        for (n, p) in [(1, 0.5), (4, 0.7), (6, 0.6), (9, 1.0)] {
            let cfg = uniform(n, p);
            assert!(closed_form_rho_as(&cfg, 0.0).unwrap().max_abs_diff(&bell_state()).unwrap() < 1e-15);
            assert_abs_diff_eq!(lambda_closed_form(&cfg, 0.0).unwrap(), -0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn coherence_entry() {
        let cfg = uniform(5, 0.8);
        let t = 0.37;
        let om = omega_phase(&cfg, t).unwrap();
        let rho = closed_form_rho_as(&cfg, t).unwrap();
        let expect = 0.5 * (1.0 - 2.0 * 0.8f64.powi(4) * (om / 2.0).sin().powi(2));
        assert_abs_diff_eq!(rho[(0, 3)].re, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lambda_is_two_pi_periodic() {
        for (n, p) in [(2, 0.5), (6, 0.6), (3, 1.0)] {
            let cf = closed_form_params(p, n);
            assert_abs_diff_eq!(lambda_from_phase(&cf, 2.0 * PI), -0.5, epsilon = 1e-12);
            for om in [0.3, 1.1, 2.9, 4.4] {
                assert_abs_diff_eq!(lambda_from_phase(&cf, om), lambda_from_phase(&cf, om + 2.0 * PI), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_temperature_quarter_period_is_separable() {
        // p = 1 reduces the state to (|00⟩⟨00| + |10⟩⟨10|)/2 at Ω = π/2
        let cf = closed_form_params(1.0, 4);
        assert_abs_diff_eq!(lambda_from_phase(&cf, PI / 2.0), 0.0, epsilon = 1e-15);
        let rho = rho_from_phase(&cf, PI / 2.0);
        assert_abs_diff_eq!(pt_min_eigenvalue(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_matches_pt_diagonalization() {
        for (n, p) in [(1, 0.9), (2, 0.5), (4, 0.7), (6, 0.6), (8, 1.0)] {
            let cf = closed_form_params(p, n);
            for k in 0..=400 {
                let om = 2.0 * PI * k as f64 / 400.0;
                let lambda = lambda_from_phase(&cf, om);
                let spec = pt_spectrum_dense(&rho_from_phase(&cf, om)).unwrap();
                if lambda < 0.0 {
                    assert_abs_diff_eq!(lambda, spec[0], epsilon = 1e-10);
                }
                assert!(spec.iter().filter(|&&l| l < -1e-9).count() <= 1);
            }
        }
    }

    #[test]
    fn exponential_phase_limit() {
        let cfg = ModelConfig::new(6, 1.0, Temperature::P(0.6), Coupling::TimeExponential { gamma: c(0.7) }).unwrap();
        let om_inf = omega_phase(&cfg, 200.0).unwrap();
        assert_abs_diff_eq!(om_inf, 6f64.sqrt() / 0.7, epsilon = 1e-12);
        assert!(om_inf > PI);
        assert_eq!(omega_phase(&cfg, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_phase_agrees() {
        let fams = [
            Coupling::SitesConstant { g: vec![c(0.3), Complex64::new(0.0, -1.2), c(2.0)] },
            Coupling::TimeExponential { gamma: Complex64::new(0.4, 2.0) },
            Coupling::TimePolynomial { exponent: 0.01 },
            Coupling::TimePolynomial { exponent: 3.0 },
            Coupling::Tabulated { times: vec![0.0, 1.0, 2.5, 6.0], values: vec![vec![0.0, 1.0, 0.4, 0.9]; 3] },
        ];
        for fam in fams {
            let cfg = ModelConfig::new(3, 1.3, Temperature::P(0.6), fam).unwrap();
            for (a, b) in [(0.0, 0.5), (0.2, 5.5)] {
                let exact = omega_phase_between(&cfg, a, b).unwrap();
                let quad = omega_phase_quadrature(&cfg, a, b, 1e-12).unwrap();
                assert!((exact - quad).abs() <= 1e-9 * exact.abs().max(1e-300), "{}: {exact} vs {quad}", cfg.coupling.family_name());
            }
        }
    }

    #[test]
    fn non_commuting_families_are_rejected() {
        let cfg = ModelConfig::new(3, 1.0, Temperature::Zero, Coupling::SiteTimeExponential { gamma1: 0.3 }).unwrap();
        assert!(matches!(omega_phase(&cfg, 1.0), Err(Error::Unsupported(_))));
        assert!(matches!(closed_form_rho_as(&cfg, 1.0), Err(Error::Unsupported(_))));
        let rotating = ModelConfig::new(3, 1.0, Temperature::Zero, Coupling::TimeExponential { gamma: Complex64::new(0.3, 1.0) }).unwrap();
        assert!(omega_phase(&rotating, 1.0).is_ok());
        assert!(matches!(lambda_closed_form(&rotating, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn matches_oracle_for_uniform_coupling() {
        let cfg = uniform(4, 0.7);
        let grid = TimeGrid::new(0.0, 3.0, 31, 2).unwrap();
        let oracle = brute_force_propagate(&cfg, &grid).unwrap();
        for (t, rho) in grid.times().iter().zip(&oracle.states) {
            let cf = closed_form_rho_as(&cfg, *t).unwrap();
            assert!(cf.max_abs_diff(rho).unwrap() <= 1e-8);
        }
    }
}
