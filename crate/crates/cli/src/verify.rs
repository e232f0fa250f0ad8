//! `ringwalk verify`: the module invariants as a machine-readable report.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ringwalk::linalg::{matvec, max_abs_diff};
use ringwalk::spectral::{dense_estimate, eigenvalue_one_count};
use ringwalk::{
    build_coin2, build_coin3, build_evolution, channel_decay_rate, coin_eigenbasis, ensemble_survival,
    efficiency_closed_form, evolve_survival, fit_loglinear, norm_growth_radius,
    percolated_evolution, predict_decay_rate, stationary_states, transport_efficiency,
    EdgeConfig, FitAxis, FitWindow, NormGrowthOptions, PercolationChannel, RingConfig, WalkMode, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn max_n(self) -> usize {
        match self {
            Level::Quick => 5,
            Level::Full => 6,
        }
    }

    fn steps(self, full: usize) -> usize {
        match self {
            Level::Quick => full.min(500),
            Level::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: &str, residual: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        // NaN residuals fail
        passed: residual <= tolerance,
        residual,
        tolerance,
        detail,
    }
}

fn random_state(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn grover() -> CliResult<ringwalk::CoinOperator> {
    Ok(build_coin3(1.0 / 3f64.sqrt(), 0.0)?)
}

fn two_state_independence(level: Level) -> CliResult<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states = if level == Level::Quick { 6 } else { 20 };
    let mut worst = 0.0f64;
    for n in 2..=level.max_n() {
        let ring = RingConfig::new(n)?;
        for rho in [0.3, FRAC_1_SQRT_2, 0.9] {
            let coin = build_coin2(rho)?;
            let reference = evolve_survival(ring, &coin, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 200)?;
            for _ in 0..states {
                let s = evolve_survival(ring, &coin, &random_state(2, &mut rng), 200)?;
                worst = worst.max(max_abs_diff_f(&s.survival, &reference.survival));
            }
        }
    }
    Ok(check(
        "two_state_initial_state_independence",
        worst,
        1e-10,
        format!("N=2..{}, {states} random coin states, T=200", level.max_n()),
    ))
}

fn max_abs_diff_f(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn table_cross_check(_: Level) -> CliResult<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for n in 2..=5 {
        let ring = RingConfig::new(n)?;
        for rho in [0.2, 1.0 / 3f64.sqrt(), 0.75] {
            let coin = build_coin3(rho, rng.random::<f64>() * 2.0 * PI)?;
            for _ in 0..10 {
                let r = transport_efficiency(ring, &coin, &random_state(3, &mut rng))?;
                let (hp, _, h2) = r.decomposition.expect("lazy").weights();
                worst = worst.max((r.eta - efficiency_closed_form(n, rho, hp, h2)?).abs());
            }
        }
    }
    Ok(check("table_closed_forms_vs_projector", worst, 1e-8, "N=2..5, 3 rho, 10 states".into()))
}

fn degeneracy(level: Level) -> CliResult<CheckResult> {
    let mut worst = 0usize;
    let mut seen = Vec::new();
    for n in 2..=level.max_n() {
        let ev = build_evolution(RingConfig::new(n)?, &build_coin3(0.6, 1.1)?)?;
        let u = eigenvalue_one_count(&ringwalk::dense_spectrum(&ev.u)?, 1e-8);
        let pu = eigenvalue_one_count(&ringwalk::dense_spectrum(&ev.pi_u)?, 1e-8);
        worst = worst.max(u.abs_diff(2 * n)).max(pu.abs_diff(2 * n - 2));
        seen.push(format!("N={n}: U {u}, piU {pu}"));
    }
    Ok(check("eigenvalue_one_multiplicity", worst as f64, 0.0, seen.join("; ")))
}

fn decay_rate_relative_error(rate: f64, survival: &[f64]) -> CliResult<(f64, f64)> {
    let fit = fit_loglinear(survival, FitWindow::Default, FitAxis::Time)?;
    Ok(((fit.decay_rate().gamma - rate).abs() / rate, fit.r_squared))
}

fn two_state_decay(level: Level) -> CliResult<CheckResult> {
    let ring = RingConfig::new(5)?;
    let coin = build_coin2(FRAC_1_SQRT_2)?;
    let predicted = predict_decay_rate(ring, &coin, WalkMode::TwoState)?.gamma;
    let s = evolve_survival(ring, &coin, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], level.steps(1000))?;
    let (rel, r2) = decay_rate_relative_error(predicted, &s.survival)?;
    Ok(check("two_state_fit_vs_spectrum", rel, 0.05, format!("Hadamard N=5, predicted {predicted:.6e}, r2 {r2:.8}")))
}

fn lazy_sigma1_minus_decay(level: Level) -> CliResult<CheckResult> {
    let ring = RingConfig::new(5)?;
    let coin = grover()?;
    let predicted = predict_decay_rate(ring, &coin, WalkMode::Lazy)?.gamma;
    let psi = coin_eigenbasis(&coin)?.sigma1_minus;
    let s = evolve_survival(ring, &coin, &psi, level.steps(1000))?;
    let (rel, r2) = decay_rate_relative_error(predicted, &s.survival)?;
    Ok(check("lazy_sigma1_minus_fit_vs_spectrum", rel, 0.05, format!("Grover N=5, predicted {predicted:.6e}, r2 {r2:.8}")))
}

fn plateau(level: Level) -> CliResult<CheckResult> {
    let (n, steps) = match level {
        Level::Quick => (3, 500),
        Level::Full => (5, 2000),
    };
    let ring = RingConfig::new(n)?;
    let coin = grover()?;
    let psi = coin_eigenbasis(&coin)?.sigma_plus;
    let limit = transport_efficiency(ring, &coin, &psi)?.survival_limit;
    let s = evolve_survival(ring, &coin, &psi, steps)?.final_survival();
    Ok(check("plateau_vs_projector", (s - limit).abs(), 1e-6, format!("Grover sigma+ N={n} T={steps}: {s:.10} vs {limit:.10}")))
}

fn sigma1_minus_efficiency(level: Level) -> CliResult<CheckResult> {
    let mut worst = 0.0f64;
    for n in 2..=level.max_n() {
        for (rho, alpha) in [(1.0 / 3f64.sqrt(), 0.0), (0.4, 2.5)] {
            let coin = build_coin3(rho, alpha)?;
            let psi = coin_eigenbasis(&coin)?.sigma1_minus;
            let r = transport_efficiency(RingConfig::new(n)?, &coin, &psi)?;
            worst = worst.max((1.0 - r.eta).abs());
        }
    }
    Ok(check("sigma1_minus_full_transport", worst, 1e-10, "eta = 1".into()))
}

fn norm_growth_vs_dense(_: Level) -> CliResult<CheckResult> {
    let mut worst = 0.0f64;
    for n in [3, 5] {
        let ring = RingConfig::new(n)?;
        for coin in [build_coin2(0.8)?, build_coin3(0.5, 1.0)?] {
            let ev = build_evolution(ring, &coin)?;
            let dense = dense_estimate(&ev.pi_u)?.leading_modulus;
            let ng = norm_growth_radius(&ev.pi_u, &NormGrowthOptions::default())?.leading_modulus;
            worst = worst.max((dense - ng).abs());
        }
    }
    Ok(check("norm_growth_vs_dense_spectrum", worst, 1e-6, "leading modulus of piU".into()))
}

fn alpha_zero_configurations(_: Level) -> CliResult<CheckResult> {
    let ring = RingConfig::new(3)?;
    let coin = grover()?;
    let raw = stationary_states(ring, &coin)?;
    let width = ring.vertices();
    let mut worst = 0.0f64;
    for mask in 0..(1u64 << width) {
        let u = percolated_evolution(ring, &coin, &EdgeConfig::from_mask(width, mask))?.u;
        for n in -2..=1 {
            let s = raw.raw_state(n)?;
            worst = worst.max(max_abs_diff(&matvec(&u, s), s));
        }
    }
    Ok(check("alpha_zero_states_fixed_by_every_configuration", worst, 1e-10, format!("N=3, {} configurations", 1u64 << width)))
}

fn alpha_zero_channel(_: Level) -> CliResult<CheckResult> {
    let ch = PercolationChannel::exact(RingConfig::new(3)?, &grover()?, 0.5)?;
    let g = channel_decay_rate(&ch, &Default::default())?.gamma;
    Ok(check("alpha_zero_channel_gamma", g, 1e-6, "N=3, p=0.5".into()))
}

fn channel_vs_monte_carlo(level: Level) -> CliResult<CheckResult> {
    let (steps, realizations) = match level {
        Level::Quick => (20, 2000),
        Level::Full => (50, 10_000),
    };
    let ring = RingConfig::new(3)?;
    let coin = build_coin3(1.0 / 3f64.sqrt(), PI)?;
    let psi = coin_eigenbasis(&coin)?.sigma_plus;
    let ch = PercolationChannel::exact(ring, &coin, 0.5)?;
    let exact = ringwalk::channel_survival(&ch, &psi, steps)?;
    let mc = ensemble_survival(ring, &coin, &psi, 0.5, steps, realizations, 2024)?;
    let n = realizations as f64;
    let mut worst = 0.0f64;
    for (&p, &m) in exact.iter().zip(&mc.mean.survival).skip(1) {
        let sigma = (p * (1.0 - p) / n).sqrt().max(1e-15);
        worst = worst.max((m - p).abs() / sigma);
    }
    Ok(check(
        "channel_trace_vs_monte_carlo_sigma",
        worst,
        3.0,
        format!("N=3, p=0.5, t<={steps}, {realizations} realizations; residual in binomial sigmas"),
    ))
}

type CheckFn = fn(Level) -> CliResult<CheckResult>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("two_state_initial_state_independence", two_state_independence),
    ("table_closed_forms_vs_projector", table_cross_check),
    ("eigenvalue_one_multiplicity", degeneracy),
    ("two_state_fit_vs_spectrum", two_state_decay),
    ("lazy_sigma1_minus_fit_vs_spectrum", lazy_sigma1_minus_decay),
    ("plateau_vs_projector", plateau),
    ("sigma1_minus_full_transport", sigma1_minus_efficiency),
    ("norm_growth_vs_dense_spectrum", norm_growth_vs_dense),
    ("alpha_zero_states_fixed_by_every_configuration", alpha_zero_configurations),
    ("alpha_zero_channel_gamma", alpha_zero_channel),
    ("channel_trace_vs_monte_carlo_sigma", channel_vs_monte_carlo),
];

/// Runs every check in parallel; the report keeps the fixed order above.
pub fn run(level: Level) -> VerifyReport {
    let checks: Vec<CheckResult> = CHECKS
        .par_iter()
        .map(|(name, f)| {
            f(level).unwrap_or_else(|e| CheckResult {
                name: name.to_string(),
                passed: false,
                residual: f64::NAN,
                tolerance: f64::NAN,
                detail: format!("error: {e}"),
            })
        })
        .collect();
    VerifyReport {
        level,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
