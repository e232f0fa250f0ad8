//! Dynamically percolated lazy walks.
//!
//! Every step each ring edge is present independently with probability `p`;
//! a broken edge reflects the directional coin states in place. Two views of
//! the same dynamics live here: pure-state Monte Carlo realizations and the
//! exact random-unitary channel acting on density matrices.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coin::{CoinOperator, LEFT};
use crate::error::{check_range, Error, Result};
use crate::linalg::{adjoint, hermitian_eigenvalues, hermiticity_deviation, C64, ZERO};
use crate::ring::RingConfig;
use crate::walk::{
    build_evolution_with_edges, initial_state, permutation_matrix, shift_targets, EvolutionOperator,
    Stepper, SurvivalSeries, WalkState,
};

pub use crate::ring::EdgeConfig;

/// Largest edge count for which the channel is enumerated exactly.
pub const MAX_ENUMERATED_EDGES: usize = 16;

/// Realizations per parallel task in [`averaged_survival`]; fixes the summation tree.
const REALIZATION_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PercolationMode {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercolationParams {
    pub p: f64,
    pub mode: PercolationMode,
    pub realizations: usize,
    pub master_seed: u64,
}

impl PercolationParams {
    pub fn validate(&self, ring: &RingConfig) -> Result<()> {
        check_edge_probability(self.p)?;
        if self.mode == PercolationMode::ExactEnumeration && ring.vertices() > MAX_ENUMERATED_EDGES {
            return Err(Error::EnumerationTooLarge(ring.vertices()));
        }
        if self.mode == PercolationMode::MonteCarlo && self.realizations == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "realizations",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

fn check_edge_probability(p: f64) -> Result<()> {
    check_range("p", p, (0.0..=1.0).contains(&p), "0 <= p <= 1")
}

fn require_lazy(coin: &CoinOperator) -> Result<()> {
    if coin.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: coin.dim(),
        });
    }
    Ok(())
}

/// `p^|K| (1-p)^(2N-|K|)`.
pub fn config_probability(config: &EdgeConfig, p: f64) -> f64 {
    let present = config.count() as i32;
    let absent = (config.width() - config.count()) as i32;
    p.powi(present) * (1.0 - p).powi(absent)
}

/// Draw each of `width` edges independently with probability `p`.
pub fn sample_config<R: Rng + ?Sized>(p: f64, width: usize, rng: &mut R) -> EdgeConfig {
    let mut k = EdgeConfig::empty(width);
    for j in 0..width {
        // one u64 per edge keeps the stream layout fixed
        let u: f64 = rng.random();
        k.set(j, u < p);
    }
    k
}

/// Counter-based configuration source for one realization.
///
/// Stream `realization` of a ChaCha8 generator keyed by the master seed; step `t`
/// reads a fixed block of words, so configurations can be regenerated for any
/// `(realization, step)` without replaying earlier steps.
#[derive(Debug, Clone)]
pub struct ConfigStream {
    rng: ChaCha8Rng,
    width: usize,
}

impl ConfigStream {
    pub fn new(master_seed: u64, realization: u64, width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(realization);
        Self { rng, width }
    }

    pub fn config_at(&mut self, step: u64, p: f64) -> EdgeConfig {
        // two 32-bit words per u64 draw
        let words_per_step = 2 * self.width as u128;
        self.rng.set_word_pos(step as u128 * words_per_step);
        sample_config(p, self.width, &mut self.rng)
    }
}

/// Dense step operator `S_K` of the lazy walk on the percolated ring.
pub fn percolated_step(ring: RingConfig, config: &EdgeConfig, coin_dim: usize) -> Result<Array2<C64>> {
    if coin_dim != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: coin_dim,
        });
    }
    config.check_width(&ring)?;
    Ok(permutation_matrix(&shift_targets(&ring, coin_dim, Some(config))))
}

/// `U_K = S_K·(I ⊗ C)` with the sink projector.
pub fn percolated_evolution(
    ring: RingConfig,
    coin: &CoinOperator,
    config: &EdgeConfig,
) -> Result<EvolutionOperator> {
    require_lazy(coin)?;
    build_evolution_with_edges(ring, coin, Some(config))
}

/// Survival series and final state of one realization.
#[derive(Debug, Clone)]
pub struct Realization {
    pub series: SurvivalSeries,
    pub final_state: WalkState,
}

pub fn run_realization(
    ring: RingConfig,
    coin: &CoinOperator,
    psi_c: &[C64],
    p: f64,
    steps: usize,
    master_seed: u64,
    realization: u64,
) -> Result<Realization> {
    require_lazy(coin)?;
    check_edge_probability(p)?;
    if steps == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "steps",
            value: 0.0,
            expected: "T >= 1",
        });
    }
    let init = initial_state(ring, psi_c)?;
    let mut series = SurvivalSeries::start(3, init.norm_sqr(), steps);
    let mut stream = ConfigStream::new(master_seed, realization, ring.vertices());
    let mut stepper = Stepper::new(ring, coin);
    let mut state = init.into_amplitudes();
    for t in 0..steps {
        let config = stream.config_at(t as u64, p);
        let flux = stepper.step(&mut state, Some(&config));
        series.absorbed.push(flux);
        series.survival.push(crate::linalg::norm_sqr(&state));
    }
    Ok(Realization {
        series,
        final_state: WalkState::from_amplitudes(ring, 3, state)?,
    })
}

/// One random realization of the percolated walk.
pub fn realization_survival(
    ring: RingConfig,
    coin: &CoinOperator,
    psi_c: &[C64],
    p: f64,
    steps: usize,
    master_seed: u64,
    realization: u64,
) -> Result<SurvivalSeries> {
    Ok(run_realization(ring, coin, psi_c, p, steps, master_seed, realization)?.series)
}

/// Ensemble mean with the per-step sample standard error of the survival.
#[derive(Debug, Clone)]
pub struct EnsembleSurvival {
    pub mean: SurvivalSeries,
    pub std_error: Vec<f64>,
    pub realizations: usize,
}

#[derive(Clone)]
struct Accum {
    survival: Vec<f64>,
    survival_sq: Vec<f64>,
    absorbed: Vec<[f64; 3]>,
}

impl Accum {
    fn zeros(len: usize) -> Self {
        Self {
            survival: vec![0.0; len],
            survival_sq: vec![0.0; len],
            absorbed: vec![[0.0; 3]; len],
        }
    }

    fn add_series(&mut self, s: &SurvivalSeries) {
        for (t, &v) in s.survival.iter().enumerate() {
            self.survival[t] += v;
            self.survival_sq[t] += v * v;
            for c in 0..3 {
                self.absorbed[t][c] += s.absorbed[t][c];
            }
        }
    }

    fn add(&mut self, o: &Accum) {
        for t in 0..self.survival.len() {
            self.survival[t] += o.survival[t];
            self.survival_sq[t] += o.survival_sq[t];
            for c in 0..3 {
                self.absorbed[t][c] += o.absorbed[t][c];
            }
        }
    }
}

/// Mean over realizations `0..n` plus sample standard errors.
///
/// Realizations run in parallel; partial sums are combined in index order so
/// the result does not depend on scheduling.
pub fn ensemble_survival(
    ring: RingConfig,
    coin: &CoinOperator,
    psi_c: &[C64],
    p: f64,
    steps: usize,
    realizations: usize,
    master_seed: u64,
) -> Result<EnsembleSurvival> {
    if realizations == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "realizations",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let len = steps + 1;
    let chunks: Vec<usize> = (0..realizations.div_ceil(REALIZATION_CHUNK)).collect();
    let partial: Vec<Accum> = chunks
        .par_iter()
        .map(|&c| -> Result<Accum> {
            let mut acc = Accum::zeros(len);
            let lo = c * REALIZATION_CHUNK;
            let hi = (lo + REALIZATION_CHUNK).min(realizations);
            for r in lo..hi {
                let s = realization_survival(ring, coin, psi_c, p, steps, master_seed, r as u64)?;
                acc.add_series(&s);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Accum::zeros(len);
    for part in &partial {
        total.add(part);
    }
    let n = realizations as f64;
    let survival: Vec<f64> = total.survival.iter().map(|s| s / n).collect();
    let std_error = total
        .survival_sq
        .iter()
        .zip(&survival)
        .map(|(sq, m)| {
            if realizations < 2 {
                return 0.0;
            }
            let var = ((sq / n - m * m) * n / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    let absorbed = total
        .absorbed
        .iter()
        .map(|f| [f[0] / n, f[1] / n, f[2] / n])
        .collect();
    Ok(EnsembleSurvival {
        mean: SurvivalSeries {
            coin_dim: 3,
            survival,
            absorbed,
        },
        std_error,
        realizations,
    })
}

/// Arithmetic mean of realizations `0..n` derived from `master_seed`.
pub fn averaged_survival(
    ring: RingConfig,
    coin: &CoinOperator,
    psi_c: &[C64],
    p: f64,
    steps: usize,
    realizations: usize,
    master_seed: u64,
) -> Result<SurvivalSeries> {
    Ok(ensemble_survival(ring, coin, psi_c, p, steps, realizations, master_seed)?.mean)
}

/// Hermitian, positive semidefinite, trace at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: Array2<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(data: Array2<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        Ok(Self { data })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &WalkState) -> Self {
        let a = state.amplitudes();
        let n = a.len();
        let data = Array2::from_shape_fn((n, n), |(i, j)| a[i] * a[j].conj());
        Self { data }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.diag().iter().map(|z| z.re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.data.diag().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.data)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(self.data.view())?
            .first()
            .copied()
            .unwrap_or(0.0))
    }
}

#[derive(Debug, Clone)]
pub enum ChannelMode {
    /// All `2^(2N)` configurations with their probabilities.
    Exact { configs: Vec<(EdgeConfig, f64)> },
    /// Equal-weight average over drawn configurations; biased, never used for spectra.
    Sampled { configs: Vec<EdgeConfig> },
}

/// `Φ(X) = π (Σ_K p_K U_K X U_K†) π` for the lazy walk.
#[derive(Debug)]
pub struct PercolationChannel {
    ring: RingConfig,
    coin: CoinOperator,
    p: f64,
    mode: ChannelMode,
    shift: Vec<usize>,
    applications: AtomicU64,
}

impl PercolationChannel {
    pub fn exact(ring: RingConfig, coin: &CoinOperator, p: f64) -> Result<Self> {
        require_lazy(coin)?;
        check_edge_probability(p)?;
        let width = ring.vertices();
        if width > MAX_ENUMERATED_EDGES {
            return Err(Error::EnumerationTooLarge(width));
        }
        let configs = (0..1u64 << width)
            .map(|mask| {
                let k = EdgeConfig::from_mask(width, mask);
                let pk = config_probability(&k, p);
                (k, pk)
            })
            .collect();
        Ok(Self::with_mode(ring, coin, p, ChannelMode::Exact { configs }))
    }

    pub fn sampled(ring: RingConfig, coin: &CoinOperator, p: f64, samples: usize, seed: u64) -> Result<Self> {
        require_lazy(coin)?;
        check_edge_probability(p)?;
        let mut stream = ConfigStream::new(seed, 0, ring.vertices());
        let configs = (0..samples.max(1) as u64).map(|t| stream.config_at(t, p)).collect();
        Ok(Self::with_mode(ring, coin, p, ChannelMode::Sampled { configs }))
    }

    fn with_mode(ring: RingConfig, coin: &CoinOperator, p: f64, mode: ChannelMode) -> Self {
        Self {
            ring,
            coin: coin.clone(),
            p,
            mode,
            shift: shift_targets(&ring, 3, None),
            applications: AtomicU64::new(0),
        }
    }

    pub fn ring(&self) -> RingConfig {
        self.ring
    }

    pub fn coin(&self) -> &CoinOperator {
        &self.coin
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mode(&self) -> &ChannelMode {
        &self.mode
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, ChannelMode::Exact { .. })
    }

    pub fn dim(&self) -> usize {
        self.ring.vertices() * 3
    }

    /// `Σ_K p_K`; one up to rounding in exact mode.
    pub fn total_probability(&self) -> f64 {
        match &self.mode {
            ChannelMode::Exact { configs } => configs.iter().map(|(_, pk)| pk).sum(),
            ChannelMode::Sampled { .. } => 1.0,
        }
    }

    /// How many times the map has been applied.
    pub fn application_count(&self) -> u64 {
        self.applications.load(Ordering::Relaxed)
    }

    /// `Φ(X)`.
    ///
    /// In exact mode this uses that `S_K = S·W_K`, where `W_K` swaps the two
    /// outgoing states `(j,R)` and `(j+1,L)` of every broken edge. The swaps act
    /// on disjoint index pairs and edges are independent, so the average over
    /// `K` is a product of per-edge maps `Y ↦ pY + (1-p) X_e Y X_e`.
    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        self.applications.fetch_add(1, Ordering::Relaxed);
        match &self.mode {
            ChannelMode::Exact { .. } => self.apply_factorized(x),
            ChannelMode::Sampled { configs } => {
                let w = 1.0 / configs.len() as f64;
                let mut acc = Array2::<C64>::zeros(x.raw_dim());
                for k in configs {
                    self.accumulate_config(&mut acc, x, k, w);
                }
                acc
            }
        }
    }

    /// Literal `Σ_K p_K (πU_K) X (πU_K)†`, building every `U_K`. Reference path.
    pub fn apply_enumerated(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut acc = Array2::<C64>::zeros(x.raw_dim());
        match &self.mode {
            ChannelMode::Exact { configs } => {
                for (k, pk) in configs {
                    if *pk == 0.0 {
                        continue;
                    }
                    self.accumulate_config(&mut acc, x, k, *pk);
                }
            }
            ChannelMode::Sampled { configs } => {
                let w = 1.0 / configs.len() as f64;
                for k in configs {
                    self.accumulate_config(&mut acc, x, k, w);
                }
            }
        }
        acc
    }

    fn accumulate_config(&self, acc: &mut Array2<C64>, x: &Array2<C64>, k: &EdgeConfig, weight: f64) {
        let ev = build_evolution_with_edges(self.ring, &self.coin, Some(k))
            .expect("config width matches ring");
        let term = ev.pi_u.dot(x).dot(&adjoint(&ev.pi_u));
        acc.scaled_add(C64::new(weight, 0.0), &term);
    }

    fn apply_factorized(&self, x: &Array2<C64>) -> Array2<C64> {
        let d = 3;
        let nv = self.ring.vertices();
        let dim = nv * d;
        let c = self.coin.matrix();

        // (I⊗C) X (I⊗C)†, block by block
        let mut left = Array2::<C64>::zeros((dim, dim));
        for j in 0..nv {
            for a in 0..d {
                for col in 0..dim {
                    let mut acc = ZERO;
                    for b in 0..d {
                        acc += c[[a, b]] * x[[j * d + b, col]];
                    }
                    left[[j * d + a, col]] = acc;
                }
            }
        }
        let mut y = Array2::<C64>::zeros((dim, dim));
        for row in 0..dim {
            for k in 0..nv {
                for a in 0..d {
                    let mut acc = ZERO;
                    for b in 0..d {
                        acc += left[[row, k * d + b]] * c[[a, b]].conj();
                    }
                    y[[row, k * d + a]] = acc;
                }
            }
        }

        let p = self.p;
        let q = 1.0 - p;
        if q > 0.0 {
            for e in 0..nv {
                let (j, k) = self.ring.edge_endpoints(e);
                let a = j * d + 2;
                let b = k * d + LEFT;
                swap_mix(&mut y, a, b, p, q);
            }
        }

        let sink = self.ring.sink_index();
        let mut out = Array2::<C64>::zeros((dim, dim));
        for (i, &ti) in self.shift.iter().enumerate() {
            if ti / d == sink {
                continue;
            }
            for (j, &tj) in self.shift.iter().enumerate() {
                if tj / d == sink {
                    continue;
                }
                out[[ti, tj]] = y[[i, j]];
            }
        }
        out
    }
}

/// `Y ← p Y + q σ Y σ` with `σ` the transposition of indices `a` and `b`.
fn swap_mix(y: &mut Array2<C64>, a: usize, b: usize, p: f64, q: f64) {
    let n = y.nrows();
    let (yaa, yab, yba, ybb) = (y[[a, a]], y[[a, b]], y[[b, a]], y[[b, b]]);
    for i in 0..n {
        if i == a || i == b {
            continue;
        }
        let (ra, rb) = (y[[a, i]], y[[b, i]]);
        y[[a, i]] = ra * p + rb * q;
        y[[b, i]] = rb * p + ra * q;
        let (ca, cb) = (y[[i, a]], y[[i, b]]);
        y[[i, a]] = ca * p + cb * q;
        y[[i, b]] = cb * p + ca * q;
    }
    y[[a, a]] = yaa * p + ybb * q;
    y[[b, b]] = ybb * p + yaa * q;
    y[[a, b]] = yab * p + yba * q;
    y[[b, a]] = yba * p + yab * q;
}

/// Positivity tolerance for [`channel_step`].
pub const POSITIVITY_TOL: f64 = 1e-8;

/// One step of the percolated channel followed by the sink.
pub fn channel_step(rho: &DensityMatrix, channel: &PercolationChannel) -> Result<DensityMatrix> {
    if !channel.is_exact() {
        return Err(Error::SampledChannel);
    }
    if rho.dim() != channel.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim(),
            found: rho.dim(),
        });
    }
    let out = DensityMatrix {
        data: channel.apply(&rho.data),
    };
    let min = out.min_eigenvalue()?;
    if min < -POSITIVITY_TOL {
        return Err(Error::PositivityViolation(min));
    }
    Ok(out)
}

/// `trace ρ̂(t)` for `t = 0..=steps`, starting from `|0⟩|ψ_C⟩`.
pub fn channel_survival(channel: &PercolationChannel, psi_c: &[C64], steps: usize) -> Result<Vec<f64>> {
    let init = initial_state(channel.ring(), psi_c)?;
    let mut rho = DensityMatrix::from_pure(&init);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(rho.trace());
    for _ in 0..steps {
        rho = channel_step(&rho, channel)?;
        out.push(rho.trace());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::{build_coin2, build_coin3, coin_eigenbasis};
    use crate::linalg::{max_entry_diff, unitarity_deviation};
    use crate::walk::evolve_survival;
    use std::f64::consts::PI;

    #[test]
    fn config_probability_examples() {
        assert_eq!(config_probability(&EdgeConfig::full(10), 1.0), 1.0);
        assert_eq!(config_probability(&EdgeConfig::empty(10), 1.0), 0.0);
        for mask in [0u64, 5, 1023, 300] {
            let k = EdgeConfig::from_mask(10, mask);
            assert_eq!(config_probability(&k, 0.5), 1.0 / 1024.0);
        }
        let k = EdgeConfig::from_mask(10, 0b1111111);
        let want = 0.55f64.powi(7) * 0.45f64.powi(3);
        assert!((config_probability(&k, 0.55) - want).abs() < 1e-18);
    }

    #[test]
    fn sample_config_extremes() {
        let mut s = ConfigStream::new(1, 0, 10);
        for t in 0..100 {
            assert_eq!(s.config_at(t, 0.0).count(), 0);
            assert!(s.config_at(t, 1.0).is_full());
        }
    }

    #[test]
    fn sample_config_mean_edge_count() {
        let n = 100_000;
        let width = 10;
        let mut s = ConfigStream::new(7, 3, width);
        let total: usize = (0..n).map(|t| s.config_at(t, 0.5).count()).sum();
        let mean = total as f64 / n as f64;
        // binomial(10, 1/2): sd 1.5811 per draw
        let sigma = (width as f64 * 0.25 / n as f64).sqrt();
        assert!((mean - 5.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn config_stream_is_random_access() {
        let mut a = ConfigStream::new(11, 4, 10);
        let forward: Vec<EdgeConfig> = (0..20).map(|t| a.config_at(t, 0.3)).collect();
        let mut b = ConfigStream::new(11, 4, 10);
        for t in (0..20).rev() {
            assert_eq!(b.config_at(t, 0.3), forward[t as usize]);
        }
        let mut other = ConfigStream::new(11, 5, 10);
        let differs = (0..20).any(|t| other.config_at(t, 0.3) != forward[t as usize]);
        assert!(differs);
    }

    #[test]
    fn percolated_step_limits() {
        let ring = RingConfig::new(4).unwrap();
        let full = percolated_step(ring, &EdgeConfig::full(8), 3).unwrap();
        let ideal = permutation_matrix(&shift_targets(&ring, 3, None));
        assert_eq!(max_entry_diff(&full, &ideal), 0.0);

        let empty = percolated_step(ring, &EdgeConfig::empty(8), 3).unwrap();
        for j in 0..8 {
            assert_eq!(empty[[j * 3, j * 3 + 2]], C64::new(1.0, 0.0));
            assert_eq!(empty[[j * 3 + 2, j * 3]], C64::new(1.0, 0.0));
            assert_eq!(empty[[j * 3 + 1, j * 3 + 1]], C64::new(1.0, 0.0));
        }
        // involution on the broken ring
        assert!(crate::linalg::identity_deviation(&empty.dot(&empty)) == 0.0);

        for mask in [0u64, 1, 0b1010_0110, 255] {
            let s = percolated_step(ring, &EdgeConfig::from_mask(8, mask), 3).unwrap();
            assert_eq!(unitarity_deviation(&s), 0.0);
        }
    }

    #[test]
    fn percolated_step_errors() {
        let ring = RingConfig::new(4).unwrap();
        assert!(matches!(
            percolated_step(ring, &EdgeConfig::full(6), 3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(percolated_step(ring, &EdgeConfig::full(8), 2).is_err());
        let two = build_coin2(0.5).unwrap();
        assert!(PercolationChannel::exact(ring, &two, 0.5).is_err());
        let lazy = build_coin3(0.5, 0.0).unwrap();
        assert!(matches!(
            PercolationChannel::exact(RingConfig::new(9).unwrap(), &lazy, 0.5),
            Err(Error::EnumerationTooLarge(18))
        ));
        assert!(PercolationChannel::exact(ring, &lazy, 1.5).is_err());
    }

    #[test]
    fn full_percolation_reproduces_ideal_walk_exactly() {
        let ring = RingConfig::new(5).unwrap();
        let coin = build_coin3(1.0 / 3f64.sqrt(), PI).unwrap();
        let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
        let ideal = evolve_survival(ring, &coin, &psi, 300).unwrap();
        let perc = realization_survival(ring, &coin, &psi, 1.0, 300, 99, 0).unwrap();
        assert_eq!(ideal, perc);
    }

    #[test]
    fn realizations_conserve_probability() {
        let ring = RingConfig::new(4).unwrap();
        let coin = build_coin3(0.6, 1.3).unwrap();
        let psi = coin_eigenbasis(&coin).unwrap().sigma2_minus;
        for r in 0..5 {
            let s = realization_survival(ring, &coin, &psi, 0.4, 1000, 5, r).unwrap();
            assert!(s.max_increase() <= 1e-12);
            assert!(s.conservation_error() < 1e-10);
        }
    }

    #[test]
    fn averaging_is_linear_and_deterministic() {
        let ring = RingConfig::new(3).unwrap();
        let coin = build_coin3(0.5, 2.0).unwrap();
        let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
        let one = averaged_survival(ring, &coin, &psi, 0.5, 60, 1, 3).unwrap();
        let direct = realization_survival(ring, &coin, &psi, 0.5, 60, 3, 0).unwrap();
        assert_eq!(one, direct);

        let n = 2 * REALIZATION_CHUNK + 7;
        let all = averaged_survival(ring, &coin, &psi, 0.5, 60, n, 3).unwrap();
        let again = averaged_survival(ring, &coin, &psi, 0.5, 60, n, 3).unwrap();
        assert_eq!(all, again);

        // first half is realizations 0..h; second half summed directly
        let h = REALIZATION_CHUNK;
        let first = averaged_survival(ring, &coin, &psi, 0.5, 60, h, 3).unwrap();
        let mut second = vec![0.0; 61];
        for r in h..n {
            let s = realization_survival(ring, &coin, &psi, 0.5, 60, 3, r as u64).unwrap();
            for t in 0..=60 {
                second[t] += s.survival[t];
            }
        }
        for t in 0..=60 {
            let combined = (first.survival[t] * h as f64 + second[t]) / n as f64;
            assert!((combined - all.survival[t]).abs() < 1e-14);
        }
    }

    #[test]
    fn factorized_channel_matches_enumeration() {
        let ring = RingConfig::new(3).unwrap();
        for (p, alpha) in [(0.5, PI), (0.3, 0.7), (1.0, 2.0), (0.0, 1.0)] {
            let coin = build_coin3(0.55, alpha).unwrap();
            let ch = PercolationChannel::exact(ring, &coin, p).unwrap();
            assert!((ch.total_probability() - 1.0).abs() < 1e-12);
            let n = ch.dim();
            let x = Array2::from_shape_fn((n, n), |(i, j)| {
                C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64)
            });
            let fast = ch.apply(&x);
            let slow = ch.apply_enumerated(&x);
            assert!(max_entry_diff(&fast, &slow) < 1e-12, "p={p}");
        }
    }

    #[test]
    fn channel_with_all_edges_is_conjugation() {
        let ring = RingConfig::new(3).unwrap();
        let coin = build_coin3(0.4, 1.0).unwrap();
        let ch = PercolationChannel::exact(ring, &coin, 1.0).unwrap();
        let ev = crate::walk::build_evolution(ring, &coin).unwrap();
        let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
        let rho = DensityMatrix::from_pure(&initial_state(ring, &psi).unwrap());
        let out = channel_step(&rho, &ch).unwrap();
        let want = ev.pi_u.dot(rho.matrix()).dot(&adjoint(&ev.pi_u));
        assert!(max_entry_diff(out.matrix(), &want) < 1e-14);
    }

    #[test]
    fn channel_step_contracts_trace() {
        use rand::SeedableRng;
        let ring = RingConfig::new(3).unwrap();
        let coin = build_coin3(0.6, 2.5).unwrap();
        let ch = PercolationChannel::exact(ring, &coin, 0.45).unwrap();
        let n = ch.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let g = Array2::from_shape_fn((n, n), |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let mut rho = g.dot(&adjoint(&g));
            let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
            rho.mapv_inplace(|z| z / tr);
            let rho = DensityMatrix::from_matrix(rho).unwrap();
            let out = channel_step(&rho, &ch).unwrap();
            assert!(out.trace() <= rho.trace() + 1e-12);
            assert!(out.hermiticity_deviation() < 1e-10);
        }
    }

    #[test]
    fn sampled_channel_rejected_by_channel_step() {
        let ring = RingConfig::new(2).unwrap();
        let coin = build_coin3(0.5, 1.0).unwrap();
        let ch = PercolationChannel::sampled(ring, &coin, 0.5, 10, 1).unwrap();
        let rho = DensityMatrix::from_matrix(Array2::zeros((12, 12))).unwrap();
        assert!(matches!(channel_step(&rho, &ch), Err(Error::SampledChannel)));
    }
}
