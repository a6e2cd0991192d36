//! Flat `key = value` run configuration.
//!
//! ```text
//! # Case I
//! model.n = 6
//! model.alpha = 1
//! model.p = 0.6
//! coupling.family = sites_constant
//! coupling.g = 1,1,1,1,1,1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;

use spinstar::model::{Coupling, ModelConfig, Temperature, DEFAULT_POWER_T0};
use spinstar::propagate::{OracleExponential, OracleOptions, TimeGrid};
use spinstar::tolerances::DEFAULT_ORACLE_DIM_CAP;
use spinstar::witness::{Engine, Parameter};
use spinstar::Tolerances;

pub const DIM_CAP_ENV: &str = "SPINSTAR_DIM_CAP";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Single(Engine),
    All,
}

impl EngineChoice {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "all" {
            Some(EngineChoice::All)
        } else {
            s.parse().ok().map(EngineChoice::Single)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSpec {
    pub n_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub parameter: Option<Parameter>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionSpec {
    pub parameter: Option<Parameter>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: TimeGrid,
    pub adaptive: bool,
    pub engine: EngineChoice,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub oracle: OracleOptions,
    pub horizon_factor: f64,
    pub max_horizon_doublings: usize,
    pub scan: ScanSpec,
    pub transition: TransitionSpec,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// One `key = value` line.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries {
    map: BTreeMap<String, Entry>,
    last_line: usize,
}

const FIXED_KEYS: &[&str] = &[
    "model.n",
    "model.alpha",
    "model.p",
    "model.beta",
    "model.env_excited",
    "coupling.family",
    "coupling.g",
    "coupling.gamma",
    "coupling.exponent",
    "coupling.gamma1",
    "coupling.t0",
    "coupling.times",
    "coupling.values",
    "grid.t_start",
    "grid.t_end",
    "grid.samples",
    "grid.slices",
    "grid.adaptive",
    "engine",
    "oracle.exponential",
    "oracle.dim_cap",
    "output",
    "seed",
    "witness.revival_tol",
    "witness.horizon_factor",
    "witness.max_doublings",
    "scan.n",
    "scan.p",
    "scan.param",
    "scan.values",
    "transition.param",
    "transition.lo",
    "transition.hi",
    "transition.tol",
];

const TOL_KEYS: &[&str] = &[
    "tol.hermitian_input",
    "tol.eigen_residual",
    "tol.unitary",
    "tol.state",
    "tol.pt_negative",
    "tol.weights",
    "tol.quadrature_rel",
    "tol.revival",
    "tol.halving",
    "tol.max_slices_per_sample",
    "tol.dim_cap",
];

fn known_key(key: &str) -> bool {
    if FIXED_KEYS.contains(&key) || TOL_KEYS.contains(&key) {
        return true;
    }
    key.strip_prefix("coupling.values.").is_some_and(|site| site.parse::<usize>().is_ok_and(|s| s >= 1))
}

impl Entries {
    fn parse(text: &str) -> Parsed<Self> {
        let mut map: BTreeMap<String, Entry> = BTreeMap::new();
        let mut last_line = 0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::at(line, "empty key"));
            }
            if !known_key(key) {
                return Err(ConfigError::at(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("`{key}` has no value")));
            }
            if let Some(prev) = map.get(key) {
                return Err(ConfigError::at(line, format!("`{key}` already set on line {}", prev.line)));
            }
            map.insert(key.to_string(), Entry { line, value: value.to_string(), used: false });
        }
        Ok(Self { map, last_line })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|e| e.line)
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Parsed<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse(&v)
                .map(Some)
                .ok_or_else(|| ConfigError::at(line, format!("`{key}` must be {what}, got `{v}`"))),
        }
    }

    fn require<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str, anchor: Option<usize>) -> Parsed<T> {
        let anchor = anchor.unwrap_or(self.last_line.max(1));
        self.get(key, parse, what)?.ok_or_else(|| ConfigError::at(anchor, format!("missing required key `{key}`")))
    }

    fn unused(&self) -> Option<(&String, usize)> {
        self.map.iter().find(|(_, e)| !e.used).map(|(k, e)| (k, e.line))
    }
}

fn real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| !x.is_nan())
}

fn finite(s: &str) -> Option<f64> {
    real(s).filter(|x| x.is_finite())
}

fn natural(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn boolean(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn list<T>(s: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',').map(|x| item(x.trim())).collect()
}

/// Comma list of naturals; `a..b` is inclusive.
fn natural_set(s: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (natural(a.trim())?, natural(b.trim())?);
            if a > b {
                return None;
            }
            out.extend(a..=b);
        } else {
            out.push(natural(part)?);
        }
    }
    Some(out)
}

/// `1`, `-0.5`, `2i`, `-i`, `1+0.5i`, `3e-2-1e-1i`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = s.strip_suffix('i') else {
        return finite(&s).map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => finite(t),
    };
    match split {
        Some(k) => Some(Complex64::new(finite(&body[..k])?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

fn family_keys(family: &str) -> Option<&'static [&'static str]> {
    Some(match family {
        "sites_constant" => &["coupling.g"],
        "time_exponential" => &["coupling.gamma"],
        "time_polynomial" => &["coupling.exponent"],
        "site_time_exponential" => &["coupling.gamma1"],
        "site_time_power" => &["coupling.gamma", "coupling.t0"],
        "tabulated" => &["coupling.times", "coupling.values"],
        _ => return None,
    })
}

fn parse_coupling(e: &mut Entries, n: usize, warnings: &mut Vec<String>) -> Parsed<Coupling> {
    let (family_line, family) =
        e.take("coupling.family").ok_or_else(|| ConfigError::at(e.last_line.max(1), "missing required key `coupling.family`"))?;
    let allowed = family_keys(&family).ok_or_else(|| {
        ConfigError::at(
            family_line,
            format!("unknown coupling family `{family}` (sites_constant, time_exponential, time_polynomial, site_time_exponential, site_time_power, tabulated)"),
        )
    })?;
    for key in ["coupling.g", "coupling.gamma", "coupling.exponent", "coupling.gamma1", "coupling.t0", "coupling.times", "coupling.values"] {
        if !allowed.contains(&key) {
            if let Some(line) = e.line(key) {
                return Err(ConfigError::at(line, format!("`{key}` does not apply to family `{family}`")));
            }
        }
    }
    if family != "tabulated" {
        if let Some((k, line)) = e.map.iter().find(|(k, _)| k.starts_with("coupling.values.")).map(|(k, v)| (k.clone(), v.line)) {
            return Err(ConfigError::at(line, format!("`{k}` does not apply to family `{family}`")));
        }
    }
    let anchor = Some(family_line);
    Ok(match family.as_str() {
        "sites_constant" => {
            let g = e.require("coupling.g", |s| list(s, parse_complex), "a comma list of complex numbers", anchor)?;
            if g.len() != n {
                return Err(ConfigError::at(e.line("coupling.g").unwrap_or(family_line), format!("`coupling.g` has {} entries for model.n = {n}", g.len())));
            }
            Coupling::SitesConstant { g }
        }
        "time_exponential" => Coupling::TimeExponential { gamma: e.require("coupling.gamma", parse_complex, "a complex number", anchor)? },
        "time_polynomial" => Coupling::TimePolynomial { exponent: e.require("coupling.exponent", finite, "a real number", anchor)? },
        "site_time_exponential" => Coupling::SiteTimeExponential { gamma1: e.require("coupling.gamma1", finite, "a real number", anchor)? },
        "site_time_power" => {
            let gamma = e.require("coupling.gamma", finite, "a real number", anchor)?;
            let t0 = match e.get("coupling.t0", finite, "a positive real number")? {
                Some(t0) => t0,
                None => {
                    warnings.push(format!("line {family_line}: `coupling.t0` not set for site_time_power, using {DEFAULT_POWER_T0}"));
                    DEFAULT_POWER_T0
                }
            };
            Coupling::SiteTimePower { gamma, t0 }
        }
        "tabulated" => {
            let times = e.require("coupling.times", |s| list(s, finite), "a comma list of times", anchor)?;
            let shared = e.get("coupling.values", |s| list(s, finite), "a comma list of reals")?;
            let per_site: Vec<Option<Vec<f64>>> = (1..=n)
                .map(|site| e.get(&format!("coupling.values.{site}"), |s| list(s, finite), "a comma list of reals"))
                .collect::<Parsed<_>>()?;
            if let Some((k, line)) = e.map.iter().find(|(k, v)| k.starts_with("coupling.values.") && !v.used).map(|(k, v)| (k.clone(), v.line)) {
                return Err(ConfigError::at(line, format!("`{k}` names a site beyond model.n = {n}")));
            }
            let values = match (shared, per_site.iter().all(Option::is_some), per_site.iter().any(Option::is_some)) {
                (Some(row), _, false) => vec![row; n],
                (None, true, _) => per_site.into_iter().map(Option::unwrap).collect(),
                (Some(_), _, true) => {
                    return Err(ConfigError::at(
                        e.line("coupling.values").unwrap_or(family_line),
                        "give either `coupling.values` or `coupling.values.<site>`, not both",
                    ))
                }
                (None, false, _) => {
                    let missing = per_site.iter().position(Option::is_none).unwrap() + 1;
                    return Err(ConfigError::at(family_line, format!("missing required key `coupling.values.{missing}` (or a shared `coupling.values`)")));
                }
            };
            Coupling::Tabulated { times, values }
        }
        _ => unreachable!("family checked above"),
    })
}

pub fn parse_config(text: &str) -> Parsed<RunConfig> {
    parse_config_with_env(text, std::env::var(DIM_CAP_ENV).ok().as_deref())
}

/// `dim_cap_env` stands in for `SPINSTAR_DIM_CAP`.
pub fn parse_config_with_env(text: &str, dim_cap_env: Option<&str>) -> Parsed<RunConfig> {
    let mut e = Entries::parse(text)?;
    let mut warnings = Vec::new();

    let n = e.require("model.n", natural, "a positive integer", None)?;
    let alpha = e.require("model.alpha", finite, "a real number", None)?;
    let p = e.get("model.p", finite, "a real number in [0.5, 1]")?;
    let beta = e.get("model.beta", real, "a non-negative real or `inf`")?;
    let excited = e.get("model.env_excited", |s| list(s, natural), "a comma list of site numbers")?;
    let temperature = match (p, beta) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::at(
                e.line("model.beta").unwrap().max(e.line("model.p").unwrap()),
                "`model.p` and `model.beta` are mutually exclusive",
            ))
        }
        (Some(p), None) => Some(Temperature::P(p)),
        (None, Some(b)) if b.is_infinite() && b > 0.0 => Some(Temperature::Zero),
        (None, Some(b)) => Some(Temperature::Beta(b)),
        (None, None) => None,
    };
    let coupling = parse_coupling(&mut e, n, &mut warnings)?;
    let model_line = e.line("model.n");
    let model = match (temperature, excited) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::at(
                e.line("model.env_excited").unwrap(),
                "`model.env_excited` replaces the thermal bath; drop `model.p` / `model.beta`",
            ))
        }
        (Some(t), None) => ModelConfig::new(n, alpha, t, coupling),
        (None, Some(x)) => ModelConfig::with_basis_environment(n, alpha, x, coupling),
        (None, None) => {
            return Err(ConfigError::at(
                model_line.unwrap_or(1),
                "missing required key: one of `model.p`, `model.beta` or `model.env_excited`",
            ))
        }
    }
    .map_err(|err| ConfigError::at(model_line.unwrap_or(1), err.to_string()))?;

    let t_start = e.get("grid.t_start", finite, "a time")?.unwrap_or(model.coupling.start_time());
    let t_end = e.get("grid.t_end", finite, "a time")?.unwrap_or(10.0);
    let samples = e.get("grid.samples", natural, "an integer ≥ 2")?.unwrap_or(201);
    let slices = e.get("grid.slices", natural, "an integer ≥ 1")?.unwrap_or(16);
    let grid_line = e.line("grid.t_end").or(e.line("grid.t_start")).or(e.line("grid.samples")).or(e.line("grid.slices")).unwrap_or(1);
    let grid = TimeGrid::new(t_start, t_end, samples, slices)
        .and_then(|g| g.validate_for(&model).map(|_| g))
        .map_err(|err| ConfigError::at(grid_line, err.to_string()))?;
    let adaptive = e.get("grid.adaptive", boolean, "true or false")?.unwrap_or(true);

    let engine = e.get("engine", EngineChoice::parse, "fast, oracle, closed_form or all")?.unwrap_or(EngineChoice::Single(Engine::Fast));
    let output = e.take("output").map(|(_, v)| PathBuf::from(v));
    let seed = e.get("seed", |s| s.parse::<u64>().ok(), "a non-negative integer")?.unwrap_or(0);

    let mut tolerances = Tolerances::DEFAULT;
    for key in TOL_KEYS {
        let field = &key["tol.".len()..];
        match field {
            "max_slices_per_sample" | "dim_cap" => {
                if let Some(v) = e.get(key, natural, "a positive integer")? {
                    if field == "dim_cap" {
                        tolerances.dim_cap = v;
                    } else {
                        tolerances.max_slices_per_sample = v;
                    }
                }
            }
            _ => {
                if let Some(v) = e.get(key, finite, "a positive real")? {
                    if !(v > 0.0) {
                        return Err(ConfigError::at(e.line(key).unwrap(), format!("`{key}` must be positive")));
                    }
                    *tolerance_field(&mut tolerances, field) = v;
                }
            }
        }
    }
    if let Some(v) = e.get("witness.revival_tol", finite, "a non-negative real")? {
        if e.line("tol.revival").is_some() {
            return Err(ConfigError::at(e.line("witness.revival_tol").unwrap(), "`witness.revival_tol` duplicates `tol.revival`"));
        }
        tolerances.revival = v;
    }
    let horizon_factor = e.get("witness.horizon_factor", finite, "a real > 1")?.unwrap_or(1.5);
    if !(horizon_factor > 1.0) {
        return Err(ConfigError::at(e.line("witness.horizon_factor").unwrap(), "`witness.horizon_factor` must exceed 1"));
    }
    let max_horizon_doublings = e.get("witness.max_doublings", natural, "a non-negative integer")?.unwrap_or(4);

    let exponential = e
        .get(
            "oracle.exponential",
            |s| match s {
                "eigenbasis" => Some(OracleExponential::Eigenbasis),
                "dense" => Some(OracleExponential::Dense),
                _ => None,
            },
            "eigenbasis or dense",
        )?
        .unwrap_or_default();
    let mut dim_cap = e.get("oracle.dim_cap", natural, "a positive integer")?.unwrap_or(DEFAULT_ORACLE_DIM_CAP);
    if let Some(v) = dim_cap_env {
        dim_cap = natural(v.trim()).ok_or_else(|| ConfigError::global(format!("{DIM_CAP_ENV} must be a positive integer, got `{v}`")))?;
    }

    let p_default: Vec<f64> = model.p().into_iter().collect();
    let scan = ScanSpec {
        n_values: e.get("scan.n", natural_set, "a list of sizes such as `2..8` or `2,4,6`")?.unwrap_or_else(|| vec![n]),
        p_values: e.get("scan.p", |s| list(s, finite), "a comma list of p values")?.unwrap_or(p_default),
        parameter: e.get("scan.param", |s| s.parse().ok(), "gamma1, gamma_r or gamma")?,
        values: e.get("scan.values", |s| list(s, finite), "a comma list of reals")?.unwrap_or_default(),
    };
    if scan.parameter.is_some() != !scan.values.is_empty() {
        let line = e.line("scan.param").or(e.line("scan.values")).unwrap();
        return Err(ConfigError::at(line, "`scan.param` and `scan.values` go together"));
    }
    if e.line("scan.p").is_some() && model.p().is_none() {
        return Err(ConfigError::at(e.line("scan.p").unwrap(), "`scan.p` needs a thermal bath"));
    }
    let transition = TransitionSpec {
        parameter: e.get("transition.param", |s| s.parse().ok(), "gamma1, gamma_r or gamma")?,
        lo: e.get("transition.lo", finite, "a real number")?,
        hi: e.get("transition.hi", finite, "a real number")?,
        tol: e.get("transition.tol", finite, "a positive real")?.unwrap_or(1e-3),
    };

    if let Some((key, line)) = e.unused() {
        return Err(ConfigError::at(line, format!("`{key}` is not used by this configuration")));
    }
    Ok(RunConfig {
        model,
        grid,
        adaptive,
        engine,
        output,
        seed,
        tolerances,
        oracle: OracleOptions { exponential, dim_cap },
        horizon_factor,
        max_horizon_doublings,
        scan,
        transition,
        warnings,
    })
}

fn tolerance_field<'a>(t: &'a mut Tolerances, field: &str) -> &'a mut f64 {
    match field {
        "hermitian_input" => &mut t.hermitian_input,
        "eigen_residual" => &mut t.eigen_residual,
        "unitary" => &mut t.unitary,
        "state" => &mut t.state,
        "pt_negative" => &mut t.pt_negative,
        "weights" => &mut t.weights,
        "quadrature_rel" => &mut t.quadrature_rel,
        "revival" => &mut t.revival,
        "halving" => &mut t.halving,
        other => unreachable!("not a real-valued tolerance: {other}"),
    }
}
