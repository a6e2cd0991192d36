//! Built-in equivalence suite: oracle, fast path and closed form on a fixed
//! matrix of small configurations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use spinstar::densemath::ComplexMatrix;
use spinstar::model::{Coupling, ModelConfig, SectorWeights, Temperature};
use spinstar::propagate::{
    assemble_rho_as, brute_force_propagate, closed_form_rho_as_between, propagate_active, ActiveUnitary, TimeGrid,
};
use spinstar::witness::negativity;
use spinstar::Result;

pub const EQUIVALENCE_TOL: f64 = 1e-8;
pub const FROZEN_TOL: f64 = 1e-10;

pub type Assemble = dyn Fn(&ActiveUnitary, &SectorWeights) -> Result<ComplexMatrix> + Sync;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCase {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub all_passed: bool,
    pub max_deviation: f64,
    pub cases: Vec<VerifyCase>,
}

fn families(n: usize, rng: &mut ChaCha8Rng) -> Vec<(Coupling, f64)> {
    let g = (0..n).map(|_| Complex64::from_polar(rng.gen_range(0.2..1.5), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
    vec![
        (Coupling::SitesConstant { g }, 0.0),
        (Coupling::TimeExponential { gamma: Complex64::new(rng.gen_range(0.2..1.5), rng.gen_range(-1.0..1.0)) }, 0.0),
        (Coupling::TimeExponential { gamma: Complex64::new(rng.gen_range(0.2..1.5), 0.0) }, 0.0),
        (Coupling::TimePolynomial { exponent: rng.gen_range(0.0..2.0) }, 0.0),
        (Coupling::SiteTimeExponential { gamma1: rng.gen_range(0.1..1.5) }, 0.0),
        (Coupling::SiteTimePower { gamma: rng.gen_range(0.1..0.5), t0: 1e-3 }, 1e-3),
        (
            Coupling::Tabulated {
                times: vec![0.0, 0.7, 1.9, 3.0, 4.0],
                values: (0..n).map(|_| (0..5).map(|_| rng.gen_range(0.0..1.5)).collect()).collect(),
            },
            0.0,
        ),
    ]
}

fn fast_states(config: &ModelConfig, grid: &TimeGrid, assemble: &Assemble) -> Result<Vec<ComplexMatrix>> {
    let weights = SectorWeights::for_environment(config.n, &config.environment)?;
    propagate_active(config, grid)?.iter().map(|u| assemble(u, &weights)).collect()
}

fn max_dev(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> Result<f64> {
    a.iter().zip(b).try_fold(0.0f64, |m, (x, y)| Ok(m.max(x.max_abs_diff(y)?)))
}

fn case(name: String, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> VerifyCase {
    match f() {
        Ok(d) => VerifyCase { name, max_deviation: d, tolerance, pass: d <= tolerance, error: None },
        Err(e) => VerifyCase { name, max_deviation: f64::NAN, tolerance, pass: false, error: Some(e.to_string()) },
    }
}

pub fn run_suite(seed: u64) -> VerifyReport {
    run_suite_with(seed, &assemble_rho_as)
}

/// The suite with the fast path's sector assembly replaced by `assemble`.
pub fn run_suite_with(seed: u64, assemble: &Assemble) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for n in [2, 3, 4] {
        for (coupling, t0) in families(n, &mut rng) {
            for p in [0.5, 0.6, 1.0] {
                let family = coupling.family_name();
                let Ok(config) = ModelConfig::new(n, 1.0, Temperature::P(p), coupling.clone()) else {
                    continue;
                };
                let grid = match TimeGrid::new(t0, 4.0, 41, 4) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let fast = fast_states(&config, &grid, assemble);
                cases.push(case(format!("oracle/fast {family} N={n} p={p}"), EQUIVALENCE_TOL, || {
                    let fast = fast.clone()?;
                    max_dev(&brute_force_propagate(&config, &grid)?.states, &fast)
                }));
                if coupling.is_commuting() {
                    cases.push(case(format!("closed_form/fast {family} N={n} p={p}"), EQUIVALENCE_TOL, || {
                        let fast = fast.clone()?;
                        let closed: Vec<ComplexMatrix> = grid
                            .times()
                            .iter()
                            .map(|&t| closed_form_rho_as_between(&config, grid.t_start, t))
                            .collect::<Result<_>>()?;
                        max_dev(&closed, &fast)
                    }));
                }
            }
        }
    }
    for (n, excited) in [(3, vec![1, 2]), (4, vec![1, 2, 4])] {
        for (coupling, t0) in families(n, &mut rng).into_iter().step_by(2) {
            let family = coupling.family_name();
            let Ok(config) = ModelConfig::with_basis_environment(n, 1.0, excited.clone(), coupling) else {
                continue;
            };
            let Ok(grid) = TimeGrid::new(t0, 4.0, 41, 4) else {
                continue;
            };
            cases.push(case(format!("frozen sector {family} N={n} excited={excited:?}"), FROZEN_TOL, || {
                let fast = fast_states(&config, &grid, assemble)?;
                let oracle = brute_force_propagate(&config, &grid)?.states;
                let mut worst = max_dev(&oracle, &fast)?;
                for rho in fast.iter().chain(&oracle) {
                    worst = worst.max((negativity(rho)?.0 - 0.5).abs());
                }
                Ok(worst)
            }));
        }
    }
    let all_passed = cases.iter().all(|c| c.pass);
    let max_deviation = cases.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    VerifyReport { seed, all_passed, max_deviation, cases }
}

pub fn verify_csv(report: &VerifyReport) -> String {
    use crate::output::fmt_f64;
    let mut out = String::from("case,max_deviation,tolerance,pass\n");
    for c in &report.cases {
        out.push_str(&format!("{},{},{},{}\n", c.name.replace(',', ";"), fmt_f64(c.max_deviation), fmt_f64(c.tolerance), c.pass));
    }
    out
}
