//! Coupling families `g_n(t)` and their exact slice integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Start time used for the `t^(−nγ)` family when none is given.
pub const DEFAULT_POWER_T0: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Coupling {
    /// Time-independent per-site constants `g_n`.
    SitesConstant { g: Vec<Complex64> },
    /// `g_n(t) = e^(−γt)` on every site.
    TimeExponential { gamma: Complex64 },
    /// `g_n(t) = t^a` on every site.
    TimePolynomial { exponent: f64 },
    /// `g_n(t) = e^(−γ₁ n t)`.
    SiteTimeExponential { gamma1: f64 },
    /// `g_n(t) = t^(−nγ)` for `t ≥ t0`.
    SiteTimePower { gamma: f64, t0: f64 },
    /// Piecewise-linear `|g_n|` sampled on a shared time grid;
    /// `values[n-1][k]` is site `n` at `times[k]`.
    Tabulated { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Coupling {
    pub fn family_name(&self) -> &'static str {
        match self {
            Coupling::SitesConstant { .. } => "sites_constant",
            Coupling::TimeExponential { .. } => "time_exponential",
            Coupling::TimePolynomial { .. } => "time_polynomial",
            Coupling::SiteTimeExponential { .. } => "site_time_exponential",
            Coupling::SiteTimePower { .. } => "site_time_power",
            Coupling::Tabulated { .. } => "tabulated",
        }
    }

    /// Earliest time at which the coupling is defined.
    pub fn start_time(&self) -> f64 {
        match self {
            Coupling::SiteTimePower { t0, .. } => *t0,
            Coupling::Tabulated { times, .. } => times.first().copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Checks the parameters against a bath of `n` sites.
    pub fn validate(&self, n: usize) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be finite")))
            }
        };
        match self {
            Coupling::SitesConstant { g } => {
                if g.len() != n {
                    return Err(Error::Config(format!("sites_constant needs {n} couplings, got {}", g.len())));
                }
                for z in g {
                    finite(z.re, "g")?;
                    finite(z.im, "g")?;
                }
            }
            Coupling::TimeExponential { gamma } => {
                finite(gamma.re, "gamma")?;
                finite(gamma.im, "gamma")?;
            }
            Coupling::TimePolynomial { exponent } => {
                finite(*exponent, "exponent")?;
                if *exponent < 0.0 {
                    return Err(Error::Config("time_polynomial exponent must be ≥ 0".into()));
                }
            }
            Coupling::SiteTimeExponential { gamma1 } => finite(*gamma1, "gamma1")?,
            Coupling::SiteTimePower { gamma, t0 } => {
                finite(*gamma, "gamma")?;
                if *gamma <= 0.0 {
                    return Err(Error::Config("site_time_power gamma must be > 0".into()));
                }
                if !(*t0 > 0.0 && t0.is_finite()) {
                    return Err(Error::Config("site_time_power requires a start time t0 > 0".into()));
                }
            }
            Coupling::Tabulated { times, values } => {
                if times.len() < 2 {
                    return Err(Error::Config("tabulated coupling needs at least two knots".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Config("tabulated knots must be finite and strictly increasing".into()));
                }
                if values.len() != n {
                    return Err(Error::Config(format!("tabulated coupling needs {n} site rows, got {}", values.len())));
                }
                for row in values {
                    if row.len() != times.len() {
                        return Err(Error::Config("every tabulated row needs one value per knot".into()));
                    }
                    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(Error::Config("tabulated |g| values must be finite and ≥ 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when the Hamiltonians at different times commute: every site
    /// shares one scalar profile up to a constant factor, with a fixed phase.
    pub fn is_commuting(&self) -> bool {
        match self {
            Coupling::SitesConstant { .. } | Coupling::TimePolynomial { .. } => true,
            Coupling::TimeExponential { gamma } => gamma.im == 0.0,
            Coupling::SiteTimeExponential { gamma1 } => *gamma1 == 0.0,
            Coupling::SiteTimePower { .. } => false,
            Coupling::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn check_site(&self, site: usize, n: Option<usize>) -> Result<()> {
        if site == 0 {
            return Err(Error::Domain("site indices start at 1".into()));
        }
        let bound = match self {
            Coupling::SitesConstant { g } => Some(g.len()),
            Coupling::Tabulated { values, .. } => Some(values.len()),
            _ => n,
        };
        if let Some(b) = bound {
            if site > b {
                return Err(Error::Domain(format!("site {site} out of range 1..={b}")));
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::Domain("time must be finite".into()));
        }
        match self {
            Coupling::SiteTimePower { t0, .. } if t < *t0 => {
                Err(Error::Domain(format!("t^(-nγ) coupling evaluated at t = {t} before its start time t0 = {t0}")))
            }
            Coupling::Tabulated { times, .. } if t < times[0] || t > times[times.len() - 1] => Err(Error::Domain(
                format!("t = {t} outside tabulated range [{}, {}]", times[0], times[times.len() - 1]),
            )),
            Coupling::TimePolynomial { .. } if t < 0.0 => Err(Error::Domain("t^a coupling needs t ≥ 0".into())),
            _ => Ok(()),
        }
    }

    /// `g_n(t)` for a 1-based site index.
    pub fn value(&self, site: usize, t: f64) -> Result<Complex64> {
        self.check_site(site, None)?;
        self.check_time(t)?;
        let n = site as f64;
        Ok(match self {
            Coupling::SitesConstant { g } => g[site - 1],
            Coupling::TimeExponential { gamma } => (-gamma * t).exp(),
            Coupling::TimePolynomial { exponent } => Complex64::new(powf0(t, *exponent), 0.0),
            Coupling::SiteTimeExponential { gamma1 } => Complex64::new((-gamma1 * n * t).exp(), 0.0),
            Coupling::SiteTimePower { gamma, .. } => Complex64::new(t.powf(-n * gamma), 0.0),
            Coupling::Tabulated { times, values } => Complex64::new(interpolate(times, &values[site - 1], t), 0.0),
        })
    }

    /// `G_n = ∫_{t1}^{t2} g_n(τ) dτ` from closed-form antiderivatives.
    pub fn slice_integral(&self, site: usize, t1: f64, t2: f64) -> Result<Complex64> {
        self.check_site(site, None)?;
        if t2 < t1 {
            return Err(Error::Domain(format!("slice integral needs t1 ≤ t2, got [{t1}, {t2}]")));
        }
        if let Coupling::SiteTimePower { gamma, .. } = self {
            if t1 == 0.0 && site as f64 * gamma >= 1.0 {
                return Err(Error::Domain("∫ t^(-nγ) diverges at t = 0 for nγ ≥ 1; start at t0 > 0".into()));
            }
        }
        self.check_time(t1)?;
        self.check_time(t2)?;
        let dt = t2 - t1;
        let n = site as f64;
        Ok(match self {
            Coupling::SitesConstant { g } => g[site - 1] * dt,
            Coupling::TimeExponential { gamma } => (-gamma * t1).exp() * dt * phi1(gamma * dt),
            Coupling::TimePolynomial { exponent } => {
                let a1 = exponent + 1.0;
                Complex64::new((powf0(t2, a1) - powf0(t1, a1)) / a1, 0.0)
            }
            Coupling::SiteTimeExponential { gamma1 } => {
                let rate = Complex64::new(gamma1 * n, 0.0);
                Complex64::new((-gamma1 * n * t1).exp(), 0.0) * dt * phi1(rate * dt)
            }
            Coupling::SiteTimePower { gamma, .. } => {
                let e = 1.0 - n * gamma;
                let v = if e.abs() < 1e-12 {
                    (t2 / t1).ln()
                } else {
                    // t1^e·((t2/t1)^e − 1)/e, accurate for short slices
                    t1.powf(e) * (e * (t2 / t1).ln()).exp_m1() / e
                };
                Complex64::new(v, 0.0)
            }
            Coupling::Tabulated { times, values } => Complex64::new(integrate_linear(times, &values[site - 1], t1, t2), 0.0),
        })
    }

    /// Same integral by double-exponential quadrature; used to cross-check the
    /// antiderivatives and for families without one.
    pub fn slice_integral_quadrature(&self, site: usize, t1: f64, t2: f64, rel_tol: f64) -> Result<Complex64> {
        self.check_site(site, None)?;
        self.check_time(t1)?;
        self.check_time(t2)?;
        if t2 < t1 {
            return Err(Error::Domain(format!("slice integral needs t1 ≤ t2, got [{t1}, {t2}]")));
        }
        let re = integrate_split(self, t1, t2, rel_tol, |t| self.value(site, t).map(|z| z.re).unwrap_or(f64::NAN))?;
        let im = integrate_split(self, t1, t2, rel_tol, |t| self.value(site, t).map(|z| z.im).unwrap_or(f64::NAN))?;
        Ok(Complex64::new(re, im))
    }
}

/// `t^a` with `0^0 = 1`.
fn powf0(t: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        t.powf(a)
    }
}

/// `(1 − e^(−z))/z`, continuous at `z = 0`.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // error below |z|^5/720
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z / 2.0 + z2 / 6.0 - z2 * z / 24.0 + z2 * z2 / 120.0
    } else {
        (Complex64::new(1.0, 0.0) - (-z).exp()) / z
    }
}

fn segment(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => k.min(times.len() - 2),
        Err(k) => k.saturating_sub(1).min(times.len() - 2),
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = segment(times, t);
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] + w * (values[k + 1] - values[k])
}

fn integrate_linear(times: &[f64], values: &[f64], t1: f64, t2: f64) -> f64 {
    if t2 <= t1 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut a = t1;
    let mut k = segment(times, t1);
    while a < t2 {
        let b = times[k + 1].min(t2);
        if b > a {
            acc += 0.5 * (b - a) * (interpolate(times, values, a) + interpolate(times, values, b));
        }
        a = b;
        if k + 2 >= times.len() {
            break;
        }
        k += 1;
    }
    acc
}

/// Double-exponential quadrature, split at tabulation knots so each piece is smooth.
pub(crate) fn integrate_split(coupling: &Coupling, t1: f64, t2: f64, rel_tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if t2 <= t1 {
        return Ok(0.0);
    }
    let mut cuts = vec![t1];
    if let Coupling::Tabulated { times, .. } = coupling {
        cuts.extend(times.iter().copied().filter(|&x| x > t1 && x < t2));
    }
    cuts.push(t2);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // absolute target scaled by a crude magnitude estimate of the piece
        let scale = (f(a).abs() + f(0.5 * (a + b)).abs() + f(b).abs()) * (b - a);
        let target = (rel_tol * scale).max(1e-300);
        let out = quadrature::double_exponential::integrate(&f, a, b, target);
        if !out.integral.is_finite() {
            return Err(Error::Domain("quadrature produced a non-finite value".into()));
        }
        total += out.integral;
    }
    Ok(total)
}
