//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use spinstar::witness::{
    converged_trace, detect_revival, entanglement_trace_with, transition_curve, Engine, EntanglementTrace, Parameter,
    TransitionCell, TransitionSearch, WitnessOptions, WitnessReport,
};
use spinstar::model::Coupling;
use spinstar::propagate::TimeGrid;

use crate::config::{EngineChoice, RunConfig};
use crate::output::{fmt_f64, sibling, trace_csv, write_atomic};
use crate::verify::{run_suite, verify_csv, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;
pub const EXIT_BRACKET: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn engine(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_ENGINE, message: message.to_string() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_ENGINE, message: format!("cannot write {}: {e}", path.display()) }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub slices_per_sample: Option<usize>,
    pub halving_residuals: Vec<f64>,
    pub slicing_converged: Option<bool>,
    pub engine_deviations: BTreeMap<String, f64>,
    pub max_engine_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub n: usize,
    pub p: Option<f64>,
    pub param_value: Option<f64>,
    pub slices_per_sample: usize,
    pub witness: WitnessReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Option<RunConfig>,
    pub engines: Vec<Engine>,
    pub witness: Option<WitnessReport>,
    pub diagnostics: Diagnostics,
    pub transition: Option<Vec<TransitionCell>>,
    pub sweep: Option<Vec<SweepCell>>,
    pub verification: Option<VerifyReport>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub elapsed_seconds: f64,
}

impl RunReport {
    fn new(command: &str, config: Option<&RunConfig>) -> Self {
        Self {
            command: command.into(),
            config: config.cloned(),
            engines: Vec::new(),
            witness: None,
            diagnostics: Diagnostics::default(),
            transition: None,
            sweep: None,
            verification: None,
            outputs: Vec::new(),
            warnings: config.map(|c| c.warnings.clone()).unwrap_or_default(),
            elapsed_seconds: 0.0,
        }
    }
}

/// Finished command: report plus exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub code: i32,
    /// CSV for stdout when no output path is set.
    pub stdout: Option<String>,
}

fn witness_options(cfg: &RunConfig, engine: Engine) -> WitnessOptions {
    WitnessOptions {
        engine,
        revival_tol: cfg.tolerances.revival,
        adaptive: cfg.adaptive,
        horizon_factor: cfg.horizon_factor,
        max_horizon_doublings: cfg.max_horizon_doublings,
        tolerances: cfg.tolerances,
        oracle: cfg.oracle,
    }
}

/// Trace at the configured slicing, or at the step-halving slicing for
/// the adaptive fast path.
fn single_trace(cfg: &RunConfig, engine: Engine, diag: &mut Diagnostics) -> CliResult<EntanglementTrace> {
    single_trace_for(cfg, &cfg.model, engine, diag)
}

fn single_trace_for(
    cfg: &RunConfig,
    model: &spinstar::model::ModelConfig,
    engine: Engine,
    diag: &mut Diagnostics,
) -> CliResult<EntanglementTrace> {
    if engine == Engine::Fast && cfg.adaptive {
        let c = converged_trace(model, &cfg.grid, &cfg.tolerances).map_err(CliError::engine)?;
        diag.slices_per_sample = Some(c.slices_per_sample);
        diag.halving_residuals = c.halving_residuals;
        diag.slicing_converged = Some(c.converged);
        Ok(c.trace)
    } else {
        diag.slices_per_sample = Some(cfg.grid.slices_per_sample);
        entanglement_trace_with(model, &cfg.grid, engine, &cfg.oracle).map_err(CliError::engine)
    }
}

fn finish(mut report: RunReport, start: Instant, code: i32, stdout: Option<String>) -> Outcome {
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Outcome { report, code, stdout }
}

fn emit(path: Option<&Path>, csv: String, report: &mut RunReport) -> CliResult<Option<String>> {
    match path {
        Some(p) => {
            write_atomic(p, csv.as_bytes()).map_err(|e| CliError::io(p, e))?;
            report.outputs.push(p.to_path_buf());
            Ok(None)
        }
        None => Ok(Some(csv)),
    }
}

pub fn cmd_trace(cfg: &RunConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut report = RunReport::new("trace", Some(cfg));
    let out = cfg.output.as_deref();
    match cfg.engine {
        EngineChoice::Single(engine) => {
            let trace = single_trace(cfg, engine, &mut report.diagnostics)?;
            report.engines.push(engine);
            report.witness = Some(detect_revival(&trace, cfg.tolerances.revival));
            let stdout = emit(out, trace_csv(&trace), &mut report)?;
            Ok(finish(report, start, EXIT_OK, stdout))
        }
        EngineChoice::All => {
            let out = out.ok_or_else(|| CliError::config("engine = all writes one CSV per engine and needs an output path (--out)"))?;
            let fast = single_trace(cfg, Engine::Fast, &mut report.diagnostics)?;
            let grid: TimeGrid = cfg.grid.with_slices(report.diagnostics.slices_per_sample.unwrap_or(cfg.grid.slices_per_sample));
            let mut traces = vec![(Engine::Fast, fast)];
            for engine in [Engine::Oracle, Engine::ClosedForm] {
                if let Some(reason) = engine.inapplicable(&cfg.model, &cfg.oracle) {
                    report.warnings.push(format!("skipping {engine}: {reason}"));
                    continue;
                }
                traces.push((engine, entanglement_trace_with(&cfg.model, &grid, engine, &cfg.oracle).map_err(CliError::engine)?));
            }
            let mut worst = 0.0f64;
            for i in 0..traces.len() {
                for j in i + 1..traces.len() {
                    let (a, b) = (&traces[i].1, &traces[j].1);
                    let d = a.max_deviation(b).map_err(CliError::engine)?.max(
                        a.lambda_min.iter().zip(&b.lambda_min).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
                    );
                    worst = worst.max(d);
                    report.diagnostics.engine_deviations.insert(format!("{}-{}", traces[i].0, traces[j].0), d);
                }
            }
            if traces.len() > 1 {
                report.diagnostics.max_engine_deviation = Some(worst);
            }
            report.witness = Some(detect_revival(&traces[0].1, cfg.tolerances.revival));
            for (engine, trace) in &traces {
                report.engines.push(*engine);
                emit(Some(&sibling(out, &format!("{engine}.csv"))), trace_csv(trace), &mut report)?;
            }
            Ok(finish(report, start, EXIT_OK, None))
        }
    }
}

/// Bisection parameter implied by the coupling family.
pub fn default_parameter(coupling: &Coupling) -> Option<Parameter> {
    match coupling {
        Coupling::SiteTimeExponential { .. } => Some(Parameter::Gamma1),
        Coupling::TimeExponential { .. } => Some(Parameter::GammaR),
        Coupling::SiteTimePower { .. } => Some(Parameter::Gamma),
        _ => None,
    }
}

fn single_engine(cfg: &RunConfig, command: &str) -> CliResult<Engine> {
    match cfg.engine {
        EngineChoice::Single(e) => Ok(e),
        EngineChoice::All => Err(CliError::config(format!("`{command}` runs one engine; engine = all is only for `trace`"))),
    }
}

pub fn cmd_transition(cfg: &RunConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut report = RunReport::new("transition", Some(cfg));
    let engine = single_engine(cfg, "transition")?;
    let t = &cfg.transition;
    let parameter = t.parameter.or_else(|| default_parameter(&cfg.model.coupling)).ok_or_else(|| {
        CliError::config(format!("no transition parameter for the {} coupling", cfg.model.coupling.family_name()))
    })?;
    let lo = t.lo.ok_or_else(|| CliError::config("missing bracket end: set `transition.lo` or pass --lo"))?;
    let hi = t.hi.ok_or_else(|| CliError::config("missing bracket end: set `transition.hi` or pass --hi"))?;
    if !(t.tol > 0.0) {
        return Err(CliError::config(format!("bisection tolerance must be positive, got {}", t.tol)));
    }
    if cfg.scan.p_values.is_empty() {
        return Err(CliError::config("transition scans need a thermal bath (`model.p` or `model.beta`)"));
    }
    let search = TransitionSearch { parameter, lo, hi, tol: t.tol };
    let cells = transition_curve(&cfg.scan.n_values, &cfg.scan.p_values, &cfg.model, &search, &cfg.grid, &witness_options(cfg, engine));
    report.engines.push(engine);
    let mut csv = String::from("N,p,gamma_star,evaluations\n");
    for cell in &cells {
        match (&cell.result, &cell.error) {
            (Some(r), _) => csv.push_str(&format!("{},{},{},{}\n", cell.n, fmt_f64(cell.p), fmt_f64(r.value), r.evaluations)),
            (None, Some(e)) => report.warnings.push(format!("N={} p={}: {e}", cell.n, cell.p)),
            (None, None) => {}
        }
    }
    let ok = cells.iter().any(|c| c.result.is_some());
    report.transition = Some(cells);
    let stdout = emit(cfg.output.as_deref(), csv, &mut report)?;
    Ok(finish(report, start, if ok { EXIT_OK } else { EXIT_BRACKET }, stdout))
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut report = RunReport::new("sweep", Some(cfg));
    let engine = single_engine(cfg, "sweep")?;
    let p_values: Vec<Option<f64>> = if cfg.scan.p_values.is_empty() { vec![None] } else { cfg.scan.p_values.iter().copied().map(Some).collect() };
    let values: Vec<Option<f64>> = if cfg.scan.values.is_empty() { vec![None] } else { cfg.scan.values.iter().copied().map(Some).collect() };
    let mut cells = Vec::new();
    for &n in &cfg.scan.n_values {
        for &p in &p_values {
            for &v in &values {
                cells.push((n, p, v));
            }
        }
    }
    let results: Vec<CliResult<(SweepCell, EntanglementTrace)>> = cells
        .par_iter()
        .map(|&(n, p, v)| {
            let mut model = cfg.model.with_n(n).map_err(CliError::engine)?;
            if let Some(p) = p {
                model = model.with_p(p).map_err(CliError::engine)?;
            }
            if let (Some(param), Some(v)) = (cfg.scan.parameter, v) {
                model = param.apply(&model, v).map_err(CliError::engine)?;
            }
            let mut diag = Diagnostics::default();
            let trace = single_trace_for(cfg, &model, engine, &mut diag)?;
            let witness = detect_revival(&trace, cfg.tolerances.revival);
            let slices = diag.slices_per_sample.unwrap_or(cfg.grid.slices_per_sample);
            Ok((SweepCell { n, p, param_value: v, slices_per_sample: slices, witness }, trace))
        })
        .collect();
    let mut csv = String::from("N,p,param_value,t,entanglement,lambda_min\n");
    let mut summary = Vec::new();
    for r in results {
        let (cell, trace) = r?;
        let p = cell.p.map(fmt_f64).unwrap_or_default();
        let v = cell.param_value.map(fmt_f64).unwrap_or_default();
        for k in 0..trace.len() {
            csv.push_str(&format!(
                "{},{p},{v},{},{},{}\n",
                cell.n,
                fmt_f64(trace.times[k]),
                fmt_f64(trace.entanglement[k]),
                fmt_f64(trace.lambda_min[k])
            ));
        }
        summary.push(cell);
    }
    report.engines.push(engine);
    report.sweep = Some(summary);
    let stdout = emit(cfg.output.as_deref(), csv, &mut report)?;
    Ok(finish(report, start, EXIT_OK, stdout))
}

pub fn cmd_verify(seed: u64, output: Option<&Path>) -> CliResult<Outcome> {
    let start = Instant::now();
    let mut report = RunReport::new("verify", None);
    let suite = run_suite(seed);
    report.engines = Engine::ALL.to_vec();
    report.diagnostics.max_engine_deviation = Some(suite.max_deviation);
    let code = if suite.all_passed { EXIT_OK } else { EXIT_VERIFY };
    let csv = verify_csv(&suite);
    report.verification = Some(suite);
    let stdout = emit(output, csv, &mut report)?;
    Ok(finish(report, start, code, stdout))
}
