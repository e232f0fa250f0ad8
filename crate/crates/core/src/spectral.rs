//! Spectra of `πU` and of the percolation channel, decay-rate predictions and
//! log-linear fits of survival series.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coin::CoinOperator;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, inner, matvec, modified_gram_schmidt, C64, ZERO};
use crate::percolation::PercolationChannel;
use crate::ring::RingConfig;
use crate::walk::build_evolution;

/// Largest matrix handed to the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 2000;

/// Eigenvalues with modulus above `1 - DEGENERACY_TOL` count as unimodular.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    Dense,
    NormGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub leading_modulus: f64,
    pub sub_leading_modulus: Option<f64>,
    pub method: SpectralMethod,
    pub iterations: usize,
    /// Dense: zero. Norm growth: last relative change of the running estimate.
    pub residual: f64,
    pub converged: bool,
}

/// All eigenvalues, sorted by descending modulus.
pub fn dense_spectrum(op: &Array2<C64>) -> Result<Vec<C64>> {
    if op.nrows() > MAX_DENSE_DIM {
        return Err(Error::ParameterOutOfRange {
            name: "dimension",
            value: op.nrows() as f64,
            expected: "at most 2000",
        });
    }
    let mut ev = eigenvalues(op.view())?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(ev)
}

/// Number of eigenvalues with `|λ| > 1 - DEGENERACY_TOL`.
pub fn unimodular_count(spectrum: &[C64]) -> usize {
    spectrum
        .iter()
        .filter(|z| z.norm() > 1.0 - DEGENERACY_TOL)
        .count()
}

/// Multiplicity of eigenvalue 1 itself (`|λ - 1| < tol`).
pub fn eigenvalue_one_count(spectrum: &[C64], tol: f64) -> usize {
    spectrum
        .iter()
        .filter(|z| (**z - C64::new(1.0, 0.0)).norm() < tol)
        .count()
}

/// Largest modulus strictly below the unimodular cutoff.
pub fn sub_leading_modulus(spectrum: &[C64]) -> Option<f64> {
    spectrum
        .iter()
        .map(|z| z.norm())
        .filter(|m| *m < 1.0 - DEGENERACY_TOL)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
}

pub fn dense_estimate(op: &Array2<C64>) -> Result<SpectralEstimate> {
    let spectrum = dense_spectrum(op)?;
    Ok(SpectralEstimate {
        leading_modulus: spectrum.first().map_or(0.0, |z| z.norm()),
        sub_leading_modulus: sub_leading_modulus(&spectrum),
        method: SpectralMethod::Dense,
        iterations: 0,
        residual: 0.0,
        converged: true,
    })
}

/// Settings for [`norm_growth_radius`].
///
/// A block of `block` vectors is propagated and re-orthonormalized each step.
/// The running estimate is the larger of two per-step quantities: the largest
/// Ritz modulus of the operator on the block, and the geometric-mean growth
/// `|det R|^(1/k)` of the block volume. The Ritz value settles once the block
/// holds the leading cluster; the volume growth settles when the cluster is
/// wider than the block (a unitary, say). A single vector's norm ratio
/// oscillates forever when several eigenvalues share the leading modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormGrowthOptions {
    pub max_iterations: usize,
    /// Relative change regarded as stationary.
    pub tol: f64,
    /// Consecutive stationary steps required.
    pub window: usize,
    pub block: usize,
    pub seed: u64,
}

impl Default for NormGrowthOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            tol: 1e-8,
            window: 100,
            block: 8,
            seed: 0x5eed,
        }
    }
}

/// Spectral radius of a dense operator from a seeded generic start block.
pub fn norm_growth_radius(op: &Array2<C64>, opts: &NormGrowthOptions) -> Result<SpectralEstimate> {
    norm_growth_radius_map(op.nrows(), |x, y| y.copy_from_slice(&matvec(op, x)), None, opts)
}

/// Spectral radius of a dense operator from the given start vectors.
pub fn norm_growth_radius_from(
    op: &Array2<C64>,
    start: &[Vec<C64>],
    opts: &NormGrowthOptions,
) -> Result<SpectralEstimate> {
    norm_growth_radius_map(op.nrows(), |x, y| y.copy_from_slice(&matvec(op, x)), Some(start), opts)
}

fn random_block(dim: usize, k: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect()
}

/// Orthonormalize, dropping columns that collapsed relative to the largest one.
/// Also returns `|det R|^(1/k)` when no column was dropped.
fn orthonormal_block(block: &[Vec<C64>]) -> (Vec<Vec<C64>>, Option<f64>) {
    let scale = block
        .iter()
        .map(|v| crate::linalg::norm(v))
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return (Vec::new(), None);
    }
    let out = modified_gram_schmidt(block, 1e-13 * scale);
    let volume = out.rejected.is_empty().then(|| {
        (out.norms.iter().map(|n| n.ln()).sum::<f64>() / out.norms.len() as f64).exp()
    });
    (out.vectors, volume)
}

/// Matrix-free variant: `apply(x, y)` writes `A x` into `y`.
pub fn norm_growth_radius_map<F>(
    dim: usize,
    mut apply: F,
    start: Option<&[Vec<C64>]>,
    opts: &NormGrowthOptions,
) -> Result<SpectralEstimate>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let initial = match start {
        Some(s) => {
            if let Some(bad) = s.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.len(),
                });
            }
            s.to_vec()
        }
        None => random_block(dim, opts.block.clamp(1, dim.max(1)), opts.seed),
    };
    let (mut q, _) = orthonormal_block(&initial);
    if q.is_empty() {
        return Err(Error::ZeroState);
    }

    let mut estimate = f64::NAN;
    let mut stable = 0usize;
    let mut last_change = f64::INFINITY;
    let mut images: Vec<Vec<C64>> = Vec::with_capacity(q.len());
    for it in 1..=opts.max_iterations {
        images.clear();
        for v in &q {
            let mut out = vec![ZERO; dim];
            apply(v, &mut out);
            images.push(out);
        }
        let k = q.len();
        let h = Array2::from_shape_fn((k, k), |(i, j)| inner(&q[i], &images[j]));
        let ritz = eigenvalues(h.view())?;
        let (next_q, volume) = orthonormal_block(&images);
        let next = ritz
            .iter()
            .map(|z| z.norm())
            .fold(volume.unwrap_or(0.0), f64::max);

        if next == 0.0 && estimate == 0.0 {
            last_change = 0.0;
        } else if estimate.is_finite() {
            last_change = (next - estimate).abs() / next.max(f64::MIN_POSITIVE);
        }
        estimate = next;
        if last_change < opts.tol {
            stable += 1;
        } else {
            stable = 0;
        }
        if stable >= opts.window {
            return Ok(SpectralEstimate {
                leading_modulus: estimate,
                sub_leading_modulus: None,
                method: SpectralMethod::NormGrowth,
                iterations: it,
                residual: last_change,
                converged: true,
            });
        }

        q = next_q;
        if q.is_empty() {
            // nilpotent on the start block
            return Ok(SpectralEstimate {
                leading_modulus: 0.0,
                sub_leading_modulus: None,
                method: SpectralMethod::NormGrowth,
                iterations: it,
                residual: 0.0,
                converged: true,
            });
        }
    }
    Ok(SpectralEstimate {
        leading_modulus: estimate,
        sub_leading_modulus: None,
        method: SpectralMethod::NormGrowth,
        iterations: opts.max_iterations,
        residual: last_change,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayProvenance {
    PredictedFromSpectrum,
    FittedFromSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    pub gamma: f64,
    pub provenance: DecayProvenance,
    /// Inclusive step window of a fit.
    pub window: Option<(usize, usize)>,
    pub r_squared: Option<f64>,
    /// Iterations spent by an iterative spectral estimate.
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkMode {
    TwoState,
    Lazy,
}

/// `γ = 2(1 - |λ|)` from the dense spectrum of `πU`.
///
/// Two-state mode uses the leading eigenvalue. Lazy mode skips the trapped
/// eigenvalue-one block and uses the largest modulus below `1 - 1e-8`.
pub fn predict_decay_rate(ring: RingConfig, coin: &CoinOperator, mode: WalkMode) -> Result<DecayRate> {
    let expected = match mode {
        WalkMode::TwoState => 2,
        WalkMode::Lazy => 3,
    };
    if coin.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: coin.dim(),
        });
    }
    let ev = build_evolution(ring, coin)?;
    let spectrum = dense_spectrum(&ev.pi_u)?;
    let modulus = match mode {
        WalkMode::TwoState => spectrum.first().map_or(0.0, |z| z.norm()),
        WalkMode::Lazy => sub_leading_modulus(&spectrum)
            .ok_or(Error::NoSubLeadingEigenvalue(1.0 - DEGENERACY_TOL))?,
    };
    Ok(DecayRate {
        gamma: (2.0 * (1.0 - modulus)).max(0.0),
        provenance: DecayProvenance::PredictedFromSpectrum,
        window: None,
        r_squared: None,
        iterations: None,
    })
}

/// Options for [`channel_decay_rate`].
#[derive(Debug, Clone, Default)]
pub struct ChannelSpectrumOptions {
    pub norm_growth: NormGrowthOptions,
    /// Orthonormal vectors `v`; iteration is confined to operators `Q X Q` with
    /// `Q = 1 - Σ|v⟩⟨v|`. Used to look past an invariant trapped subspace.
    pub exclude: Option<Vec<Vec<C64>>>,
}

fn complement_projector(exclude: &[Vec<C64>], dim: usize) -> Array2<C64> {
    let mut q = Array2::<C64>::eye(dim);
    q -= &crate::linalg::projector(exclude, dim);
    q
}

/// `γ = 1 - |λ_l(Φ)|` by iterating the channel on generic Hermitian seeds.
///
/// There is no factor two here: `Φ` acts on density matrices, so its leading
/// eigenvalue is already of the order `|λ|²` of a pure-state amplitude.
pub fn channel_decay_rate(channel: &PercolationChannel, opts: &ChannelSpectrumOptions) -> Result<DecayRate> {
    let est = channel_spectral_estimate(channel, opts)?;
    if !est.converged {
        return Err(Error::NonConvergence(format!(
            "channel estimate {} not stationary after {} iterations (last change {:e})",
            est.leading_modulus, est.iterations, est.residual
        )));
    }
    Ok(DecayRate {
        gamma: (1.0 - est.leading_modulus).max(0.0),
        provenance: DecayProvenance::PredictedFromSpectrum,
        window: None,
        r_squared: None,
        iterations: Some(est.iterations),
    })
}

/// Leading modulus of the channel; the raw estimate behind [`channel_decay_rate`].
pub fn channel_spectral_estimate(
    channel: &PercolationChannel,
    opts: &ChannelSpectrumOptions,
) -> Result<SpectralEstimate> {
    if !channel.is_exact() {
        return Err(Error::SampledChannel);
    }
    let n = channel.dim();
    let q = opts.exclude.as_deref().map(|v| complement_projector(v, n));

    let k = opts.norm_growth.block.clamp(1, n * n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.norm_growth.seed);
    let seeds: Vec<Vec<C64>> = (0..k)
        .map(|_| {
            let g = Array2::from_shape_fn((n, n), |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let mut h = &g + &crate::linalg::adjoint(&g);
            if let Some(q) = &q {
                h = q.dot(&h).dot(q);
            }
            h.into_iter().collect()
        })
        .collect();

    norm_growth_radius_map(
        n * n,
        |x, y| {
            let xm = Array2::from_shape_vec((n, n), x.to_vec()).expect("n×n");
            let mut out = channel.apply(&xm);
            if let Some(q) = &q {
                out = q.dot(&out).dot(q);
            }
            for (dst, src) in y.iter_mut().zip(out.iter()) {
                *dst = *src;
            }
        },
        Some(&seeds),
        &opts.norm_growth,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitAxis {
    /// `ln P` against `t`; slope is `-γ`.
    Time,
    /// `ln P` against `ln t`; slope is the power-law exponent.
    LogTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWindow {
    /// Last half of the steps on which `P > 1e-12`.
    Default,
    /// Inclusive step range.
    Range(usize, usize),
}

/// Survival values at or below this are treated as numerically zero by the default window.
pub const DEFAULT_WINDOW_FLOOR: f64 = 1e-12;
pub const MIN_FIT_POINTS: usize = 20;
const FIT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    pub axis: FitAxis,
}

impl LogLinearFit {
    /// `γ = -slope` of a fit against `t`.
    pub fn decay_rate(&self) -> DecayRate {
        DecayRate {
            gamma: (-self.slope).max(0.0),
            provenance: DecayProvenance::FittedFromSeries,
            window: Some(self.window),
            r_squared: Some(self.r_squared),
            iterations: None,
        }
    }

    /// Power-law exponent of a fit against `ln t`.
    pub fn exponent(&self) -> f64 {
        self.slope
    }
}

pub fn resolve_window(survival: &[f64], window: FitWindow) -> Result<(usize, usize)> {
    match window {
        FitWindow::Range(a, b) => {
            if a > b || b >= survival.len() {
                return Err(Error::InvalidFitWindow(format!(
                    "[{a}, {b}] not inside 0..={}",
                    survival.len().saturating_sub(1)
                )));
            }
            Ok((a, b))
        }
        FitWindow::Default => {
            let last = survival
                .iter()
                .rposition(|&p| p > DEFAULT_WINDOW_FLOOR)
                .ok_or_else(|| Error::InvalidFitWindow("no step with P > 1e-12".into()))?;
            Ok((last.div_ceil(2), last))
        }
    }
}

/// Least-squares line through `(x, ln P)` on a window of the series.
pub fn fit_loglinear(survival: &[f64], window: FitWindow, axis: FitAxis) -> Result<LogLinearFit> {
    let (a, b) = resolve_window(survival, window)?;
    if b - a + 1 < MIN_FIT_POINTS {
        return Err(Error::InvalidFitWindow(format!(
            "[{a}, {b}] has fewer than {MIN_FIT_POINTS} points"
        )));
    }
    if axis == FitAxis::LogTime && a == 0 {
        return Err(Error::InvalidFitWindow("ln t undefined at t = 0".into()));
    }
    let mut xs = Vec::with_capacity(b - a + 1);
    let mut ys = Vec::with_capacity(b - a + 1);
    for (t, &p) in survival.iter().enumerate().take(b + 1).skip(a) {
        if p.is_nan() || p <= FIT_FLOOR {
            return Err(Error::InvalidFitWindow(format!("P({t}) = {p:e} too small to fit")));
        }
        xs.push(match axis {
            FitAxis::Time => t as f64,
            FitAxis::LogTime => (t as f64).ln(),
        });
        ys.push(p.ln());
    }
    let (slope, intercept, r_squared) = least_squares_line(&xs, &ys);
    Ok(LogLinearFit {
        slope,
        intercept,
        r_squared,
        window: (a, b),
        axis,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`, with `r²` clamped to `[0, 1]`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2.clamp(0.0, 1.0))
}
