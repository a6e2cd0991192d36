//! Command-line front end for the `spinstar` simulator.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Outcome, EXIT_CONFIG, EXIT_ENGINE};
use config::{parse_config, EngineChoice, RunConfig};
use output::{sibling, write_atomic};

#[derive(Debug, Parser)]
#[command(name = "spinstar", version, about = "Spin-star ancilla entanglement traces and non-Markovianity witness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Run configuration (`key = value` lines)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; the JSON report goes next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// fast, oracle, closed_form or all
    #[arg(long)]
    pub engine: Option<String>,
    /// Seed for randomized cases
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entanglement trace E(t) on the configured grid
    Trace(Common),
    /// Bisect the witness transition over the scan.n × scan.p grid
    Transition {
        #[command(flatten)]
        common: Common,
        /// gamma1, gamma_r or gamma
        #[arg(long)]
        param: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        /// Bracket width at which bisection stops
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Stacked traces over scan.n × scan.p × scan.values
    Sweep(Common),
    /// Built-in engine equivalence suite
    Verify(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::config("--config <path> is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if let Some(engine) = &common.engine {
        cfg.engine = EngineChoice::parse(engine)
            .ok_or_else(|| CliError::config(format!("--engine must be fast, oracle, closed_form or all, got `{engine}`")))?;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<(Outcome, Option<PathBuf>), CliError> {
    Ok(match command {
        Command::Trace(common) => {
            let cfg = load(common)?;
            (commands::cmd_trace(&cfg)?, cfg.output.clone())
        }
        Command::Transition { common, param, lo, hi, tol } => {
            let mut cfg = load(common)?;
            if let Some(p) = param {
                cfg.transition.parameter = Some(p.parse().map_err(|e: spinstar::Error| CliError::config(e.to_string()))?);
            }
            cfg.transition.lo = lo.or(cfg.transition.lo);
            cfg.transition.hi = hi.or(cfg.transition.hi);
            cfg.transition.tol = tol.unwrap_or(cfg.transition.tol);
            (commands::cmd_transition(&cfg)?, cfg.output.clone())
        }
        Command::Sweep(common) => {
            let cfg = load(common)?;
            (commands::cmd_sweep(&cfg)?, cfg.output.clone())
        }
        Command::Verify(common) => {
            let (seed, out) = match &common.config {
                Some(_) => {
                    let cfg = load(common)?;
                    (cfg.seed, cfg.output)
                }
                None => (common.seed.unwrap_or(0), common.out.clone()),
            };
            (commands::cmd_verify(seed, out.as_deref())?, out)
        }
    })
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Err(e) => {
            let kind = if e.code == EXIT_CONFIG { "config error" } else { "error" };
            let _ = writeln!(stderr, "{kind}: {}", e.message);
            e.code
        }
        Ok((outcome, out)) => {
            for w in &outcome.report.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            if let Some(csv) = &outcome.stdout {
                let _ = stdout.write_all(csv.as_bytes());
            }
            if let Some(d) = outcome.report.diagnostics.max_engine_deviation {
                let _ = writeln!(stderr, "max deviation between engines: {d:e}");
            }
            if let Some(w) = &outcome.report.witness {
                let _ = writeln!(stderr, "witness: {} (total revival {:e})", w.verdict, w.total_revival);
            }
            let json = match serde_json::to_string_pretty(&outcome.report) {
                Ok(j) => j + "\n",
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot serialize report: {e}");
                    return EXIT_ENGINE;
                }
            };
            match out {
                Some(path) => {
                    let report_path = sibling(&path, "report.json");
                    if let Err(e) = write_atomic(&report_path, json.as_bytes()) {
                        let _ = writeln!(stderr, "error: cannot write {}: {e}", report_path.display());
                        return EXIT_ENGINE;
                    }
                }
                None => {
                    let _ = stderr.write_all(json.as_bytes());
                }
            }
            outcome.code
        }
    }
}
