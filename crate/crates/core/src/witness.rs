//! Entanglement traces, the revival witness and transition bisection.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densemath::{pt_min_eigenvalue, ComplexMatrix};
use crate::error::{Error, Result};
use crate::model::{Coupling, ModelConfig};
use crate::propagate::{
    brute_force_propagate_with, closed_form_params, fast_propagate, lambda_from_phase, omega_phase_between, rho_from_phase,
    OracleOptions, TimeGrid,
};
use crate::tolerances::Tolerances;

/// Rises smaller than this never split a monotone run.
pub const REVIVAL_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementTrace {
    pub times: Vec<f64>,
    pub entanglement: Vec<f64>,
    pub lambda_min: Vec<f64>,
}

impl EntanglementTrace {
    pub fn from_lambdas(times: Vec<f64>, lambda_min: Vec<f64>) -> Result<Self> {
        if times.len() != lambda_min.len() {
            return Err(Error::Dimension(format!("{} times for {} eigenvalues", times.len(), lambda_min.len())));
        }
        let entanglement = lambda_min.iter().map(|&l| (-l).max(0.0)).collect();
        Ok(Self { times, entanglement, lambda_min })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First `samples` points.
    pub fn prefix(&self, samples: usize) -> Self {
        let k = samples.min(self.len());
        Self {
            times: self.times[..k].to_vec(),
            entanglement: self.entanglement[..k].to_vec(),
            lambda_min: self.lambda_min[..k].to_vec(),
        }
    }

    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!("trace lengths {} and {}", self.len(), other.len())));
        }
        Ok(self.entanglement.iter().zip(&other.entanglement).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// `(E, λ_min)` of a two-qubit state.
pub fn negativity(rho_as: &ComplexMatrix) -> Result<(f64, f64)> {
    let lambda = pt_min_eigenvalue(rho_as)?;
    Ok(((-lambda).max(0.0), lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Fast,
    Oracle,
    ClosedForm,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Fast, Engine::Oracle, Engine::ClosedForm];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Fast => "fast",
            Engine::Oracle => "oracle",
            Engine::ClosedForm => "closed_form",
        }
    }

    /// Reason the engine cannot run `config`, if any.
    pub fn inapplicable(self, config: &ModelConfig, oracle: &OracleOptions) -> Option<String> {
        match self {
            Engine::Fast => None,
            Engine::Oracle => {
                let dim = 1usize.checked_shl(config.n as u32 + 2).filter(|&d| d != 0);
                match dim {
                    Some(d) if d <= oracle.dim_cap => None,
                    _ => Some(format!(
                        "oracle needs dimension 2^{} which exceeds the cap {}; use the fast engine",
                        config.n + 2,
                        oracle.dim_cap
                    )),
                }
            }
            Engine::ClosedForm => {
                if !config.coupling.is_commuting() {
                    Some(format!("closed form does not apply to the {} coupling", config.coupling.family_name()))
                } else if config.p().is_none() {
                    Some("closed form needs a thermal environment".into())
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Engine::Fast),
            "oracle" => Ok(Engine::Oracle),
            "closed_form" => Ok(Engine::ClosedForm),
            other => Err(Error::Config(format!("unknown engine `{other}` (fast, oracle, closed_form)"))),
        }
    }
}

pub fn entanglement_trace(config: &ModelConfig, grid: &TimeGrid, engine: Engine) -> Result<EntanglementTrace> {
    entanglement_trace_with(config, grid, engine, &OracleOptions::default())
}

pub fn entanglement_trace_with(
    config: &ModelConfig,
    grid: &TimeGrid,
    engine: Engine,
    oracle: &OracleOptions,
) -> Result<EntanglementTrace> {
    if let Some(reason) = engine.inapplicable(config, oracle) {
        return Err(Error::Config(reason));
    }
    grid.validate_for(config)?;
    let times = grid.times();
    let lambdas = match engine {
        Engine::Fast => series_lambdas(&fast_propagate(config, grid)?.states)?,
        Engine::Oracle => series_lambdas(&brute_force_propagate_with(config, grid, oracle)?.states)?,
        Engine::ClosedForm => {
            let params = closed_form_params(config.p().expect("checked above"), config.n);
            let mut out = Vec::with_capacity(times.len());
            for &t in &times {
                let omega = omega_phase_between(config, grid.t_start, t)?;
                let rho = rho_from_phase(&params, omega);
                // the PT spectrum is {ρ00, ρ11} plus the coherence block
                out.push(lambda_from_phase(&params, omega).min(rho[(0, 0)].re).min(rho[(3, 3)].re));
            }
            out
        }
    };
    EntanglementTrace::from_lambdas(times, lambdas)
}

fn series_lambdas(states: &[ComplexMatrix]) -> Result<Vec<f64>> {
    states.iter().map(pt_min_eigenvalue).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergedTrace {
    pub trace: EntanglementTrace,
    pub slices_per_sample: usize,
    /// max |ΔE| between the last two slicings
    pub residual: f64,
    pub converged: bool,
    pub halving_residuals: Vec<f64>,
}

/// Fast-path trace refined by doubling the slicing until every sample
/// moves by less than `tol.halving`.
pub fn converged_trace(config: &ModelConfig, grid: &TimeGrid, tol: &Tolerances) -> Result<ConvergedTrace> {
    let mut m = grid.slices_per_sample.max(1);
    let mut coarse = entanglement_trace(config, &grid.with_slices(m), Engine::Fast)?;
    let mut residuals = Vec::new();
    loop {
        let fine_m = m * 2;
        let fine = entanglement_trace(config, &grid.with_slices(fine_m), Engine::Fast)?;
        let residual = coarse.max_deviation(&fine)?;
        residuals.push(residual);
        let converged = residual < tol.halving;
        if converged || fine_m >= tol.max_slices_per_sample {
            return Ok(ConvergedTrace { trace: fine, slices_per_sample: fine_m, residual, converged, halving_residuals: residuals });
        }
        m = fine_m;
        coarse = fine;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonMarkovian,
    NoRevivalDetected,
}

impl Verdict {
    pub fn fires(self) -> bool {
        self == Verdict::NonMarkovian
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NonMarkovian => "NonMarkovian",
            Verdict::NoRevivalDetected => "NoRevivalDetected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Revival {
    pub t_min: f64,
    pub t_peak: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub verdict: Verdict,
    pub revivals: Vec<Revival>,
    /// Sum of the recorded revival magnitudes.
    pub total_revival: f64,
    pub tolerance: f64,
}

/// Splits `E` into alternating falling and rising runs and records every
/// rising run whose height exceeds `tol`.
pub fn detect_revival(trace: &EntanglementTrace, tol: f64) -> WitnessReport {
    let e = &trace.entanglement;
    let t = &trace.times;
    let mut revivals = Vec::new();
    let mut record = |lo: usize, hi: usize| {
        let magnitude = e[hi] - e[lo];
        if magnitude > tol {
            revivals.push(Revival { t_min: t[lo], t_peak: t[hi], magnitude });
        }
    };
    if !e.is_empty() {
        let mut rising = false;
        let (mut lo, mut hi) = (0, 0);
        for i in 1..e.len() {
            if rising {
                if e[i] > e[hi] {
                    hi = i;
                } else if e[hi] - e[i] > REVIVAL_NOISE_FLOOR {
                    record(lo, hi);
                    rising = false;
                    lo = i;
                }
            } else if e[i] < e[lo] {
                lo = i;
            } else if e[i] - e[lo] > REVIVAL_NOISE_FLOOR {
                rising = true;
                hi = i;
            }
        }
        if rising {
            record(lo, hi);
        }
    }
    let total_revival = revivals.iter().map(|r| r.magnitude).sum();
    let verdict = if revivals.is_empty() { Verdict::NoRevivalDetected } else { Verdict::NonMarkovian };
    WitnessReport { verdict, revivals, total_revival, tolerance: tol }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    pub engine: Engine,
    pub revival_tol: f64,
    /// Step-halving refinement of the slicing (fast engine only).
    pub adaptive: bool,
    pub horizon_factor: f64,
    pub max_horizon_doublings: usize,
    pub tolerances: Tolerances,
    pub oracle: OracleOptions,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        let tolerances = Tolerances::DEFAULT;
        Self {
            engine: Engine::Fast,
            revival_tol: tolerances.revival,
            adaptive: true,
            horizon_factor: 1.5,
            max_horizon_doublings: 4,
            tolerances,
            oracle: OracleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvaluation {
    pub report: WitnessReport,
    pub trace: EntanglementTrace,
    /// Grid the verdict was confirmed on (before the extension check).
    pub grid: TimeGrid,
    pub horizon_doublings: usize,
    pub horizon_stable: bool,
    pub halving_residual: Option<f64>,
    pub slicing_converged: bool,
}

fn trace_for(config: &ModelConfig, grid: &TimeGrid, opts: &WitnessOptions) -> Result<(EntanglementTrace, Option<ConvergedTrace>)> {
    if opts.adaptive && opts.engine == Engine::Fast {
        let c = converged_trace(config, grid, &opts.tolerances)?;
        Ok((c.trace.clone(), Some(c)))
    } else {
        Ok((entanglement_trace_with(config, grid, opts.engine, &opts.oracle)?, None))
    }
}

/// Runs the witness and extends the horizon until a longer trace no
/// longer changes the verdict.
pub fn evaluate_witness(config: &ModelConfig, grid: &TimeGrid, opts: &WitnessOptions) -> Result<WitnessEvaluation> {
    if !(opts.horizon_factor > 1.0) {
        return Err(Error::Config(format!("horizon factor must exceed 1, got {}", opts.horizon_factor)));
    }
    let mut g = *grid;
    let mut doublings = 0;
    loop {
        let ext = g.extended(opts.horizon_factor);
        let (trace, converged) = trace_for(config, &ext, opts)?;
        let short = detect_revival(&trace.prefix(g.samples), opts.revival_tol);
        let long = detect_revival(&trace, opts.revival_tol);
        let stable = short.verdict == long.verdict;
        if stable || doublings >= opts.max_horizon_doublings {
            return Ok(WitnessEvaluation {
                report: long,
                trace,
                grid: g,
                horizon_doublings: doublings,
                horizon_stable: stable,
                halving_residual: converged.as_ref().map(|c| c.residual),
                slicing_converged: converged.map_or(true, |c| c.converged),
            });
        }
        g = g.extended(2.0);
        doublings += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// site-dependent decay rate of `e^(−γ₁ n t)`
    Gamma1,
    /// real part of the rate of `e^(−γ t)`
    GammaR,
    /// exponent of `(t/t₀)^(−nγ)`
    Gamma,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Gamma1 => "gamma1",
            Parameter::GammaR => "gamma_r",
            Parameter::Gamma => "gamma",
        }
    }

    /// `template` with the parameter set to `value`.
    pub fn apply(self, template: &ModelConfig, value: f64) -> Result<ModelConfig> {
        let coupling = match (self, &template.coupling) {
            (Parameter::Gamma1, Coupling::SiteTimeExponential { .. }) => Coupling::SiteTimeExponential { gamma1: value },
            (Parameter::GammaR, Coupling::TimeExponential { gamma }) => {
                Coupling::TimeExponential { gamma: Complex64::new(value, gamma.im) }
            }
            (Parameter::Gamma, Coupling::SiteTimePower { t0, .. }) => Coupling::SiteTimePower { gamma: value, t0: *t0 },
            (p, c) => {
                return Err(Error::Config(format!("parameter {} does not belong to the {} coupling", p.name(), c.family_name())))
            }
        };
        template.with_coupling(coupling)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma1" | "γ₁" => Ok(Parameter::Gamma1),
            "gamma_r" | "γ_r" => Ok(Parameter::GammaR),
            "gamma" | "γ" => Ok(Parameter::Gamma),
            other => Err(Error::Config(format!("unknown parameter `{other}` (gamma1, gamma_r, gamma)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// witness fires at the lower end
    FiresBelow,
    FiresAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub parameter: Parameter,
    pub initial_bracket: (f64, f64),
    pub bracket: (f64, f64),
    pub value: f64,
    pub achieved_tolerance: f64,
    pub evaluations: usize,
    pub orientation: Orientation,
}

pub fn find_transition(
    template: &ModelConfig,
    parameter: Parameter,
    lo: f64,
    hi: f64,
    tol: f64,
    grid: &TimeGrid,
    opts: &WitnessOptions,
) -> Result<TransitionResult> {
    if !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() || lo == hi {
        return Err(Error::Domain(format!("bisection needs distinct finite ends and tol > 0 (lo={lo}, hi={hi}, tol={tol})")));
    }
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let verdict = |x: f64| -> Result<Verdict> { Ok(evaluate_witness(&parameter.apply(template, x)?, grid, opts)?.report.verdict) };
    let va = verdict(a)?;
    let vb = verdict(b)?;
    let mut evaluations = 2;
    if va == vb {
        return Err(Error::Bracket { lo: format!("{} at {a}", va), hi: format!("{} at {b}", vb) });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if verdict(mid)? == va {
            a = mid;
        } else {
            b = mid;
        }
        evaluations += 1;
    }
    Ok(TransitionResult {
        parameter,
        initial_bracket: (lo, hi),
        bracket: (a, b),
        value: 0.5 * (a + b),
        achieved_tolerance: b - a,
        evaluations,
        orientation: if va.fires() { Orientation::FiresBelow } else { Orientation::FiresAbove },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCell {
    pub n: usize,
    pub p: f64,
    pub result: Option<TransitionResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSearch {
    pub parameter: Parameter,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

/// One bisection per `(N, p)` cell, run concurrently; rows come back in
/// `n`-major order.
pub fn transition_curve(
    n_values: &[usize],
    p_values: &[f64],
    template: &ModelConfig,
    search: &TransitionSearch,
    grid: &TimeGrid,
    opts: &WitnessOptions,
) -> Vec<TransitionCell> {
    let cells: Vec<(usize, f64)> = n_values.iter().flat_map(|&n| p_values.iter().map(move |&p| (n, p))).collect();
    cells
        .par_iter()
        .map(|&(n, p)| {
            let outcome = template
                .with_n(n)
                .and_then(|c| c.with_p(p))
                .and_then(|c| find_transition(&c, search.parameter, search.lo, search.hi, search.tol, grid, opts));
            match outcome {
                Ok(r) => TransitionCell { n, p, result: Some(r), error: None },
                Err(e) => TransitionCell { n, p, result: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}
