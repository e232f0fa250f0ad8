//! Subcommand bodies. Each returns plain data; [`render`] turns it into bytes.

use rayon::prelude::*;
use ringwalk::percolation::ensemble_survival;
use ringwalk::spectral::{
    channel_spectral_estimate, dense_estimate, eigenvalue_one_count, least_squares_line,
    unimodular_count, ChannelSpectrumOptions, MAX_DENSE_DIM,
};
use ringwalk::trapping::EfficiencyReport;
use ringwalk::{
    build_evolution, channel_decay_rate, channel_survival, dense_spectrum,
    efficiency_closed_form, efficiency_line_estimate, evolve_survival, fit_loglinear,
    norm_growth_radius, predict_decay_rate, transport_efficiency, CoinDecomposition, FitAxis,
    FitWindow, LogLinearFit, NormGrowthOptions, PercolationChannel, SpectralEstimate,
    SurvivalSeries, WalkMode,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};
use crate::spec::{ExperimentSpec, SweepAxis, SweepQuantity, SweepSpec, WalkKind};

/// Relative margin within which two sweep values count as tied.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub series: SurvivalSeries,
    /// Per-step standard error of the mean (percolated walks only).
    pub std_error: Option<Vec<f64>>,
    pub fit: Option<LogLinearFit>,
    pub fit_error: Option<String>,
}

fn walk_mode(kind: WalkKind) -> WalkMode {
    match kind {
        WalkKind::TwoState => WalkMode::TwoState,
        _ => WalkMode::Lazy,
    }
}

pub fn simulate(spec: &ExperimentSpec) -> CliResult<SimulationResult> {
    spec.validate()?;
    let ring = spec.ring()?;
    let coin = spec.coin()?;
    let psi = spec.coin_vector()?;
    let (series, std_error) = match spec.walk {
        WalkKind::Percolated => {
            let e = ensemble_survival(ring, &coin, &psi, spec.p, spec.steps, spec.realizations, spec.seed)?;
            (e.mean, Some(e.std_error))
        }
        _ => (evolve_survival(ring, &coin, &psi, spec.steps)?, None),
    };
    let (fit, fit_error) = match fit_loglinear(&series.survival, FitWindow::Default, FitAxis::Time) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SimulationResult {
        series,
        std_error,
        fit,
        fit_error,
    })
}

pub fn survival_table(series: &SurvivalSeries, std_error: Option<&[f64]>) -> Table {
    let three = series.coin_dim == 3;
    let mut header = vec!["t", "survival"];
    if std_error.is_some() {
        header.push("std_error");
    }
    header.extend(["absorbed_L", "absorbed_R"]);
    if three {
        header.push("absorbed_S");
    }
    let mut table = Table::new(&header);
    for (t, &p) in series.survival.iter().enumerate() {
        let mut row = vec![t.to_string(), fmt_f64(p)];
        if let Some(se) = std_error {
            row.push(fmt_f64(se[t]));
        }
        let f = series.absorbed[t];
        row.push(fmt_f64(f[0]));
        row.push(fmt_f64(f[2]));
        if three {
            row.push(fmt_f64(f[1]));
        }
        table.push(row);
    }
    table
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointValue {
    pub value: f64,
    pub r_squared: Option<f64>,
    pub iterations: Option<usize>,
}

pub fn evaluate(spec: &ExperimentSpec, quantity: SweepQuantity) -> CliResult<PointValue> {
    spec.validate()?;
    let ring = spec.ring()?;
    let coin = spec.coin()?;
    match quantity {
        SweepQuantity::GammaPredicted => match spec.walk {
            WalkKind::Percolated => {
                if !spec.channel_feasible() {
                    return Err(CliError::invalid(format!(
                        "exact channel needs 2N <= 16, got N = {}",
                        spec.n
                    )));
                }
                let ch = PercolationChannel::exact(ring, &coin, spec.p)?;
                let rate = channel_decay_rate(&ch, &ChannelSpectrumOptions::default())?;
                Ok(PointValue {
                    value: rate.gamma,
                    r_squared: None,
                    iterations: rate.iterations,
                })
            }
            kind => {
                let rate = predict_decay_rate(ring, &coin, walk_mode(kind))?;
                Ok(PointValue {
                    value: rate.gamma,
                    r_squared: None,
                    iterations: None,
                })
            }
        },
        SweepQuantity::GammaFit => {
            let sim = simulate(spec)?;
            let fit = sim
                .fit
                .ok_or_else(|| CliError::runtime(sim.fit_error.unwrap_or_default()))?;
            Ok(PointValue {
                value: fit.decay_rate().gamma,
                r_squared: Some(fit.r_squared),
                iterations: None,
            })
        }
        SweepQuantity::Eta if spec.walk == WalkKind::Lazy => {
            let r = transport_efficiency(ring, &coin, &spec.coin_vector()?)?;
            Ok(PointValue {
                value: r.eta,
                r_squared: None,
                iterations: None,
            })
        }
        SweepQuantity::Eta | SweepQuantity::Plateau => {
            let last = simulate(spec)?.series.final_survival();
            let value = if quantity == SweepQuantity::Eta { 1.0 - last } else { last };
            Ok(PointValue {
                value,
                r_squared: None,
                iterations: None,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub result: Option<PointValue>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub argmax: Option<usize>,
    pub argmin: Option<usize>,
    /// Least-squares slope of `ln(quantity)` against `ln N` for N sweeps.
    pub log_log_slope: Option<f64>,
}

/// Index of the extreme value; ties within [`TIE_TOL`] go to the first index.
pub fn arg_extreme(values: &[Option<f64>], maximize: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let key = if maximize { v } else { -v };
        match best {
            None => best = Some((i, key)),
            Some((_, b)) if key > b + TIE_TOL * b.abs().max(f64::MIN_POSITIVE) => best = Some((i, key)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

pub fn sweep(spec: &SweepSpec) -> CliResult<SweepResult> {
    spec.validate()?;
    spec.base.validate()?;
    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&x| match evaluate(&spec.point(x), spec.quantity) {
            Ok(v) => SweepRow {
                axis_value: x,
                result: Some(v),
                error: None,
            },
            Err(e) => SweepRow {
                axis_value: x,
                result: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if rows.iter().all(|r| r.result.is_none()) {
        let first = rows[0].error.clone().unwrap_or_default();
        return Err(CliError::runtime(format!("all sweep points failed; first error: {first}")));
    }
    let values: Vec<Option<f64>> = rows.iter().map(|r| r.result.as_ref().map(|v| v.value)).collect();
    let log_log_slope = (spec.axis == SweepAxis::N).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter_map(|r| r.result.as_ref().map(|v| (r.axis_value, v.value)))
            .filter(|(_, v)| *v > 0.0)
            .map(|(x, v)| (x.ln(), v.ln()))
            .unzip();
        (xs.len() >= 2).then(|| least_squares_line(&xs, &ys).0)
    });
    Ok(SweepResult {
        argmax: arg_extreme(&values, true),
        argmin: arg_extreme(&values, false),
        log_log_slope: log_log_slope.flatten(),
        rows,
    })
}

pub fn sweep_table(spec: &SweepSpec, result: &SweepResult) -> Table {
    let axis = match spec.axis {
        SweepAxis::Alpha => "alpha",
        SweepAxis::Rho => "rho",
        SweepAxis::P => "p",
        SweepAxis::N => "n",
    };
    let quantity = match spec.quantity {
        SweepQuantity::GammaFit => "gamma_fit",
        SweepQuantity::GammaPredicted => "gamma_predicted",
        SweepQuantity::Eta => "eta",
        SweepQuantity::Plateau => "plateau",
    };
    let mut t = Table::new(&[axis, quantity, "r_squared", "iterations", "error"]);
    for r in &result.rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let (q, r2, it) = match &r.result {
            Some(v) => (fmt_f64(v.value), opt(v.r_squared), v.iterations.map(|i| i.to_string()).unwrap_or_default()),
            None => Default::default(),
        };
        t.push(vec![fmt_f64(r.axis_value), q, r2, it, r.error.clone().unwrap_or_default()]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencySummary {
    pub exact: EfficiencyReport,
    pub closed_form: Option<f64>,
    pub line_estimate: f64,
    pub decomposition: CoinDecomposition,
}

pub fn efficiency(spec: &ExperimentSpec) -> CliResult<EfficiencySummary> {
    spec.validate()?;
    if spec.walk == WalkKind::TwoState {
        return Err(CliError::invalid("efficiency needs a lazy walk"));
    }
    let ring = spec.ring()?;
    let coin = spec.coin()?;
    let psi = spec.coin_vector()?;
    let exact = transport_efficiency(ring, &coin, &psi)?;
    let h = exact.decomposition.expect("lazy decomposition");
    let (hp, _, h2) = h.weights();
    let closed_form = (2..=5)
        .contains(&spec.n)
        .then(|| efficiency_closed_form(spec.n, spec.rho, hp, h2))
        .transpose()?;
    let line_estimate = efficiency_line_estimate(spec.n, spec.rho, h.h_plus, h.h2)?;
    Ok(EfficiencySummary {
        exact,
        closed_form,
        line_estimate,
        decomposition: h,
    })
}

pub fn efficiency_table(s: &EfficiencySummary) -> Table {
    let mut t = Table::new(&["m", "p_trap"]);
    for (m, p) in &s.exact.trapping {
        t.push(vec![m.to_string(), fmt_f64(*p)]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub dense: SpectralEstimate,
    pub eigenvalues: Vec<[f64; 2]>,
    pub unimodular_count: usize,
    pub eigenvalue_one_count: usize,
    pub predicted_gamma: Option<f64>,
    pub norm_growth: SpectralEstimate,
    /// Percolated walks: `1 - |λ_l(Φ)|` of the exact channel.
    pub channel_gamma: Option<f64>,
    pub channel_estimate: Option<SpectralEstimate>,
}

pub fn spectral(spec: &ExperimentSpec) -> CliResult<SpectralSummary> {
    spec.validate()?;
    let ring = spec.ring()?;
    let coin = spec.coin()?;
    if ring.vertices() * coin.dim() > MAX_DENSE_DIM {
        return Err(CliError::invalid(format!(
            "dense spectrum limited to dimension {MAX_DENSE_DIM}"
        )));
    }
    let ev = build_evolution(ring, &coin)?;
    let spectrum = dense_spectrum(&ev.pi_u)?;
    let dense = dense_estimate(&ev.pi_u)?;
    let predicted_gamma = predict_decay_rate(ring, &coin, walk_mode(spec.walk)).ok().map(|r| r.gamma);
    let norm_growth = norm_growth_radius(&ev.pi_u, &NormGrowthOptions::default())?;
    let (channel_gamma, channel_estimate) = if spec.walk == WalkKind::Percolated && spec.channel_feasible() {
        let ch = PercolationChannel::exact(ring, &coin, spec.p)?;
        let est = channel_spectral_estimate(&ch, &ChannelSpectrumOptions::default())?;
        (est.converged.then_some(1.0 - est.leading_modulus), Some(est))
    } else {
        (None, None)
    };
    Ok(SpectralSummary {
        dense,
        eigenvalues: spectrum.iter().map(|z| [z.re, z.im]).collect(),
        unimodular_count: unimodular_count(&spectrum),
        eigenvalue_one_count: eigenvalue_one_count(&spectrum, 1e-8),
        predicted_gamma,
        norm_growth,
        channel_gamma,
        channel_estimate,
    })
}

pub fn spectral_table(s: &SpectralSummary) -> Table {
    let mut t = Table::new(&["index", "re", "im", "modulus"]);
    for (i, [re, im]) in s.eigenvalues.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*re), fmt_f64(*im), fmt_f64(re.hypot(*im))]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct PercolationSummary {
    pub simulation: SimulationResult,
    /// `trace ρ̂(t)` of the exact channel, when `2N <= 16`.
    pub channel_survival: Option<Vec<f64>>,
    pub channel_gamma: Option<f64>,
}

pub fn percolate(spec: &ExperimentSpec) -> CliResult<PercolationSummary> {
    let mut spec = spec.clone();
    if spec.walk != WalkKind::Percolated {
        if spec.walk == WalkKind::TwoState {
            return Err(CliError::invalid("percolation is defined for the lazy walk"));
        }
        spec.walk = WalkKind::Percolated;
    }
    let simulation = simulate(&spec)?;
    let (channel_survival, channel_gamma) = if spec.channel_feasible() {
        let ch = PercolationChannel::exact(spec.ring()?, &spec.coin()?, spec.p)?;
        let surv = channel_survival(&ch, &spec.coin_vector()?, spec.steps)?;
        let gamma = channel_decay_rate(&ch, &ChannelSpectrumOptions::default()).ok().map(|r| r.gamma);
        (Some(surv), gamma)
    } else {
        (None, None)
    };
    Ok(PercolationSummary {
        simulation,
        channel_survival,
        channel_gamma,
    })
}

pub fn percolation_table(s: &PercolationSummary) -> Table {
    let base = survival_table(&s.simulation.series, s.simulation.std_error.as_deref());
    let Some(ch) = &s.channel_survival else { return base };
    let mut header: Vec<&str> = base.header.iter().map(|h| h.as_str()).collect();
    header.push("channel_survival");
    let mut t = Table::new(&header);
    for (row, c) in base.rows.iter().zip(ch) {
        let mut r = row.clone();
        r.push(fmt_f64(*c));
        t.push(r);
    }
    t
}

/// Derived summary for a simulation sidecar.
pub fn simulation_derived(sim: &SimulationResult) -> Value {
    json!({
        "final_survival": sim.series.final_survival(),
        "conservation_error": sim.series.conservation_error(),
        "fit_window": "last half of the steps with survival > 1e-12",
        "fit": sim.fit,
        "fit_error": sim.fit_error,
    })
}
