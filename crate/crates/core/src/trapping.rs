//! Localized eigenvalue-one states of the lazy walk, trapping probabilities and
//! transport efficiency.
//!
//! Each trapped state `|s_n⟩` lives on the two vertices `n` and `n+1`:
//!
//! ```text
//! |s_n⟩ = |n⟩ (√(1-ρ²) |L⟩ + ρ/√2 |S⟩) + |n+1⟩ (ρ/√2 |S⟩ + e^{iα} √(1-ρ²) |R⟩)
//! ```
//!
//! Only `n = N-1` and `n = N` touch the sink, so the remaining `2N-2` states span
//! an eigenvalue-one subspace of `πU` that the walk can never leave.

use serde::{Deserialize, Serialize};

use crate::coin::{coin_eigenbasis, decompose_coin_state, CoinDecomposition, CoinOperator, LEFT, STAY};
use crate::error::{check_range, Error, Result};
use crate::linalg::{inner, modified_gram_schmidt, norm, norm_sqr, C64, ZERO};
use crate::ring::RingConfig;
use crate::walk::{initial_state, shift_targets, WalkState};

/// Residual allowed for `U|s_n⟩ = |s_n⟩` and for the common-eigenstate conditions.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Post-projection norm below which Gram–Schmidt treats a state as dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrappedBasis {
    pub ring: RingConfig,
    pub rho: f64,
    pub alpha: f64,
    /// `|s_n⟩` for `n = -N+1, …, N`, in that order (not normalized).
    pub raw: Vec<Vec<C64>>,
    /// Orthonormal vectors `|φ⟩`; empty until [`orthonormal_trapped_basis`] runs.
    pub orthonormal: Vec<Vec<C64>>,
    /// Labels `n` fed to Gram–Schmidt, in processing order.
    pub order: Vec<i64>,
    pub tolerance: f64,
    pub include_sink_states: bool,
    pub orthonormalized: bool,
}

impl TrappedBasis {
    /// Raw state `|s_n⟩` by label.
    pub fn raw_state(&self, n: i64) -> Result<&[C64]> {
        let j = self.ring.index_of(n)?;
        Ok(&self.raw[j])
    }

    pub fn dim(&self) -> usize {
        self.ring.vertices() * 3
    }

    /// `P_trap |ψ⟩ = Σ |φ⟩⟨φ|ψ⟩`.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; psi.len()];
        for phi in &self.orthonormal {
            let c = inner(phi, psi);
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
        out
    }
}

/// `U|ψ⟩` on the intact ring, without the sink.
fn apply_unitary(ring: &RingConfig, coin: &CoinOperator, psi: &[C64]) -> Vec<C64> {
    let d = coin.dim();
    let targets = shift_targets(ring, d, None);
    let mut out = vec![ZERO; psi.len()];
    for j in 0..ring.vertices() {
        let c = coin.apply(&psi[j * d..(j + 1) * d]);
        for (a, v) in c.into_iter().enumerate() {
            out[targets[j * d + a]] = v;
        }
    }
    out
}

/// The `2N` raw stationary states of `U`, each checked against `U|s⟩ = |s⟩`.
pub fn stationary_states(ring: RingConfig, coin: &CoinOperator) -> Result<TrappedBasis> {
    let (rho, alpha) = coin.lazy_params()?;
    let right = coin.right();
    let b = (1.0 - rho * rho).sqrt();
    let s = rho * std::f64::consts::FRAC_1_SQRT_2;
    let phase = C64::from_polar(1.0, alpha);
    let dim = ring.vertices() * 3;

    let mut raw = Vec::with_capacity(ring.vertices());
    for n in ring.labels() {
        let j = ring.wrap_index(n);
        let k = ring.wrap_index(n + 1);
        let mut v = vec![ZERO; dim];
        v[j * 3 + LEFT] += C64::new(b, 0.0);
        v[j * 3 + STAY] += C64::new(s, 0.0);
        v[k * 3 + STAY] += C64::new(s, 0.0);
        v[k * 3 + right] += phase * b;

        let scale = norm(&v);
        let uv = apply_unitary(&ring, coin, &v);
        let residual = uv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / scale;
        if residual.is_nan() || residual > STATIONARY_TOL {
            return Err(Error::StationaryResidual { n, residual });
        }
        raw.push(v);
    }
    Ok(TrappedBasis {
        ring,
        rho,
        alpha,
        raw,
        orthonormal: Vec::new(),
        order: Vec::new(),
        tolerance: DEPENDENCE_TOL,
        include_sink_states: false,
        orthonormalized: false,
    })
}

/// Modified Gram–Schmidt (two passes) over the raw states in ascending `n`.
///
/// The sink-free range is `n = -N+1, …, N-2`; `include_sink_states` takes all `2N`.
/// Any rejected vector is an error since the raw states are independent.
pub fn orthonormal_trapped_basis(raw: TrappedBasis, include_sink_states: bool) -> Result<TrappedBasis> {
    let ring = raw.ring;
    let n = ring.half_size() as i64;
    let last = if include_sink_states { n } else { n - 2 };
    let order: Vec<i64> = ((-n + 1)..=last).collect();
    let input: Vec<Vec<C64>> = order
        .iter()
        .map(|&m| raw.raw[ring.wrap_index(m)].clone())
        .collect();
    let out = modified_gram_schmidt(&input, DEPENDENCE_TOL);
    if let Some(&k) = out.rejected.first() {
        return Err(Error::LinearDependence(order[k]));
    }
    Ok(TrappedBasis {
        orthonormal: out.vectors,
        order,
        tolerance: DEPENDENCE_TOL,
        include_sink_states,
        orthonormalized: true,
        ..raw
    })
}

/// Stationary states followed by the sink-free orthonormalization.
pub fn trapped_basis(ring: RingConfig, coin: &CoinOperator) -> Result<TrappedBasis> {
    orthonormal_trapped_basis(stationary_states(ring, coin)?, false)
}

fn check_sink_free(basis: &TrappedBasis, psi: &[C64]) -> Result<()> {
    if !basis.orthonormalized || basis.include_sink_states {
        return Err(Error::BasisNotSinkFree);
    }
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: psi.len(),
        });
    }
    Ok(())
}

fn vertex_weight(v: &[C64], j: usize) -> f64 {
    norm_sqr(&v[j * 3..(j + 1) * 3])
}

/// `p_T(m) = Σ_i |⟨m,i| P_trap |ψ⟩|²`.
pub fn trapping_probability(basis: &TrappedBasis, psi_in: &[C64], m: i64) -> Result<f64> {
    check_sink_free(basis, psi_in)?;
    let j = basis.ring.index_of(m)?;
    Ok(vertex_weight(&basis.project(psi_in), j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyMethod {
    ExactProjector,
    ClosedForm,
    LineEstimate,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub eta: f64,
    /// `Σ_{m ≠ N} p_T(m)`, the limit of the survival probability.
    pub survival_limit: f64,
    /// `(m, p_T(m))` for `m = -N+1, …, N-1`.
    pub trapping: Vec<(i64, f64)>,
    pub decomposition: Option<CoinDecomposition>,
    pub method: EfficiencyMethod,
}

/// Exact-projector efficiency for a state already on the ring.
pub fn efficiency_for_state(basis: &TrappedBasis, psi_in: &[C64]) -> Result<EfficiencyReport> {
    check_sink_free(basis, psi_in)?;
    let trapped = basis.project(psi_in);
    let ring = basis.ring;
    let trapping: Vec<(i64, f64)> = ring
        .labels()
        .filter(|&m| m != ring.sink_label())
        .map(|m| (m, vertex_weight(&trapped, ring.wrap_index(m))))
        .collect();
    let survival_limit: f64 = trapping.iter().map(|(_, p)| p).sum();
    Ok(EfficiencyReport {
        eta: (1.0 - survival_limit).clamp(0.0, 1.0),
        survival_limit,
        trapping,
        decomposition: None,
        method: EfficiencyMethod::ExactProjector,
    })
}

/// `η = 1 - Σ_n |⟨ψ_in|φ_n⟩|²` for the walk started at the source in `ψ_C`.
pub fn transport_efficiency(ring: RingConfig, coin: &CoinOperator, psi_c: &[C64]) -> Result<EfficiencyReport> {
    let basis = trapped_basis(ring, coin)?;
    let decomposition = decompose_coin_state(psi_c, &coin_eigenbasis(coin)?)?;
    let psi = initial_state(ring, psi_c)?;
    let mut report = efficiency_for_state(&basis, psi.amplitudes())?;
    report.decomposition = Some(decomposition);
    Ok(report)
}

fn check_weights(hp2: f64, h22: f64) -> Result<()> {
    check_range("|h+|^2", hp2, hp2 >= 0.0, "non-negative")?;
    check_range("|h2|^2", h22, h22 >= 0.0, "non-negative")?;
    check_range("|h+|^2 + |h2|^2", hp2 + h22, hp2 + h22 <= 1.0 + 1e-12, "at most 1")
}

/// Closed-form asymptotic efficiency for `N = 2, …, 5`.
pub fn efficiency_closed_form(n: usize, rho: f64, hp2: f64, h22: f64) -> Result<f64> {
    check_range("rho", rho, rho > 0.0 && rho < 1.0, "0 < rho < 1")?;
    check_weights(hp2, h22)?;
    let r2 = rho * rho;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let r8 = r4 * r4;
    let eta = match n {
        2 => 1.0 - 2.0 * (1.0 - r2) / (4.0 - 3.0 * r2) * h22 - 2.0 / (4.0 - r2) * hp2,
        3 => {
            1.0 - 4.0
                * (2.0 - r2)
                * ((1.0 - r2) * h22 / (16.0 - 20.0 * r2 + 5.0 * r4) + hp2 / (16.0 - 12.0 * r2 + r4))
        }
        4 => {
            let a = 64.0 - 7.0 * r2 * (r2 - 4.0).powi(2);
            let b = 64.0 - r2 * (r4 - 24.0 * r2 + 80.0);
            1.0 - 2.0 * (16.0 - 16.0 * r2 + 3.0 * r4) * ((1.0 - r2) * h22 / a + hp2 / b)
        }
        5 => {
            let a = (3.0 * r2 - 4.0) * (3.0 * r6 - 36.0 * r4 + 96.0 * r2 - 64.0);
            let b = r8 - 40.0 * r6 + 240.0 * r4 - 448.0 * r2 + 256.0;
            1.0 - 8.0 * (2.0 - r2) * (r4 - 8.0 * r2 + 8.0) * ((1.0 - r2) * h22 / a + hp2 / b)
        }
        _ => return Err(Error::OutsideTable(n)),
    };
    Ok(eta)
}

/// `Q = (2 - ρ² - 2√(1-ρ²)) / ρ²`, the per-site decay of trapping on the infinite line.
pub fn line_quotient(rho: f64) -> Result<f64> {
    check_range("rho", rho, rho > 0.0 && rho < 1.0, "0 < rho < 1")?;
    let r2 = rho * rho;
    Ok((2.0 - r2 - 2.0 * (1.0 - r2).sqrt()) / r2)
}

/// Trapping probability at vertex `m` of the infinite line.
pub fn line_trapping_probability(m: i64, rho: f64, h_plus: C64, h2: C64) -> Result<f64> {
    let q = line_quotient(rho)?;
    let r2 = rho * rho;
    Ok(match m {
        0 => q / r2 * (h_plus.norm_sqr() + (1.0 - r2) * h2.norm_sqr()),
        _ => {
            let amp = if m > 0 { h_plus + h2 } else { h_plus - h2 };
            (2.0 - 2.0 * r2) / (r2 * r2) * q.powi(2 * m.unsigned_abs() as i32) * amp.norm_sqr()
        }
    })
}

/// Ring efficiency estimated from the line trapping probabilities summed over
/// `|m| ≤ N-1`.
pub fn efficiency_line_estimate(n: usize, rho: f64, h_plus: C64, h2: C64) -> Result<f64> {
    let q = line_quotient(rho)?;
    check_weights(h_plus.norm_sqr(), h2.norm_sqr())?;
    let r2 = rho * rho;
    let (hp2, h22) = (h_plus.norm_sqr(), h2.norm_sqr());
    let tail = 1.0 - q.powi(2 * (n as i32 - 1));
    Ok(1.0 - q / r2 * ((1.0 - r2).sqrt() * tail * (h22 + hp2) + (1.0 - r2) * h22 + hp2))
}

/// Outcome of the shift and coin conditions for a state to survive every
/// percolation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonEigenstateCheck {
    pub passes: bool,
    /// `β` with `ℛ C ξ^m = β ξ^m`, when the coin condition holds.
    pub beta: Option<C64>,
    /// `|ξ_L^m - ξ_R^{m+1}|` per internal vertex index.
    pub shift_residuals: Vec<f64>,
    /// `‖ℛ C ξ^m - β ξ^m‖` per internal vertex index (zero where `ξ^m = 0`).
    pub coin_residuals: Vec<f64>,
}

/// Checks whether `state` is a common eigenvector of every percolated `U_K`.
pub fn common_eigenstate_check(state: &WalkState, coin: &CoinOperator) -> Result<CommonEigenstateCheck> {
    if coin.dim() != 3 || state.coin_dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: if coin.dim() != 3 { coin.dim() } else { state.coin_dim() },
        });
    }
    let scale = state.norm_sqr().sqrt();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroState);
    }
    let ring = state.ring();
    let right = coin.right();
    let xi: Vec<Vec<C64>> = (0..ring.vertices())
        .map(|j| state.coin_at(j).iter().map(|z| z / scale).collect())
        .collect();

    let shift_residuals: Vec<f64> = (0..ring.vertices())
        .map(|j| (xi[j][LEFT] - xi[(j + 1) % ring.vertices()][right]).norm())
        .collect();

    // ℛ C ξ^m for every vertex
    let reflected: Vec<Vec<C64>> = xi
        .iter()
        .map(|x| {
            let mut c = coin.apply(x);
            c.swap(LEFT, right);
            c
        })
        .collect();
    let pivot = (0..xi.len())
        .max_by(|&a, &b| norm_sqr(&xi[a]).total_cmp(&norm_sqr(&xi[b])))
        .expect("ring has vertices");
    let beta = inner(&xi[pivot], &reflected[pivot]) / norm_sqr(&xi[pivot]);
    let coin_residuals: Vec<f64> = xi
        .iter()
        .zip(&reflected)
        .map(|(x, r)| {
            r.iter()
                .zip(x)
                .map(|(a, b)| (a - beta * b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let shift_ok = shift_residuals.iter().all(|r| *r <= STATIONARY_TOL);
    let coin_ok = coin_residuals.iter().all(|r| *r <= STATIONARY_TOL);
    Ok(CommonEigenstateCheck {
        passes: shift_ok && coin_ok,
        beta: coin_ok.then_some(beta),
        shift_residuals,
        coin_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::build_coin3;
    use crate::linalg::{gram_deviation, matvec, max_abs_diff, projector, max_entry_diff};
    use crate::walk::build_evolution;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn grover() -> CoinOperator {
        build_coin3(1.0 / 3f64.sqrt(), 0.0).unwrap()
    }

    fn sigma_plus(coin: &CoinOperator) -> Vec<C64> {
        coin_eigenbasis(coin).unwrap().sigma_plus.to_vec()
    }

    #[test]
    fn grover_raw_state_amplitudes() {
        let ring = RingConfig::new(5).unwrap();
        let raw = stationary_states(ring, &grover()).unwrap();
        let s0 = raw.raw_state(0).unwrap();
        let (j, k) = (ring.index_of(0).unwrap(), ring.index_of(1).unwrap());
        let big = (2.0f64 / 3.0).sqrt();
        let small = 1.0 / 6f64.sqrt();
        assert!((s0[j * 3] - big).norm() < 1e-15);
        assert!((s0[j * 3 + 1] - small).norm() < 1e-15);
        assert!((s0[k * 3 + 1] - small).norm() < 1e-15);
        assert!((s0[k * 3 + 2] - big).norm() < 1e-15);
        let support = s0.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(support, 4);
    }

    #[test]
    fn alpha_pi_flips_right_lobe() {
        let ring = RingConfig::new(3).unwrap();
        let raw = stationary_states(ring, &build_coin3(0.5, PI).unwrap()).unwrap();
        let s = raw.raw_state(-1).unwrap();
        let k = ring.index_of(0).unwrap();
        assert!((s[k * 3 + 2].re + (0.75f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sink_free_basis_sizes_and_eigenvalue_one() {
        let n2 = trapped_basis(RingConfig::new(2).unwrap(), &grover()).unwrap();
        assert_eq!(n2.orthonormal.len(), 2);

        let ring = RingConfig::new(5).unwrap();
        let coin = grover();
        let basis = trapped_basis(ring, &coin).unwrap();
        assert_eq!(basis.orthonormal.len(), 8);
        assert!(gram_deviation(&basis.orthonormal) < 1e-10);
        let ev = build_evolution(ring, &coin).unwrap();
        for phi in &basis.orthonormal {
            assert!(max_abs_diff(&matvec(&ev.pi_u, phi), phi) < 1e-10);
        }
        let p = projector(&basis.orthonormal, basis.dim());
        assert!(max_entry_diff(&p.dot(&p), &p) < 1e-10);
    }

    #[test]
    fn sink_touching_states_are_included_on_request() {
        let ring = RingConfig::new(4).unwrap();
        let raw = stationary_states(ring, &build_coin3(0.6, 0.3).unwrap()).unwrap();
        let full = orthonormal_trapped_basis(raw, true).unwrap();
        assert_eq!(full.orthonormal.len(), 8);
        let psi = initial_state(ring, &[C64::new(1.0, 0.0), ZERO, ZERO]).unwrap();
        assert!(matches!(
            efficiency_for_state(&full, psi.amplitudes()),
            Err(Error::BasisNotSinkFree)
        ));
    }

    #[test]
    fn small_ring_sigma_plus() {
        let ring = RingConfig::new(2).unwrap();
        let coin = grover();
        let r = transport_efficiency(ring, &coin, &sigma_plus(&coin)).unwrap();
        assert!((r.eta - 5.0 / 11.0).abs() < 1e-10);
        assert!((r.eta + r.survival_limit - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sigma1_minus_is_never_trapped() {
        let ring = RingConfig::new(5).unwrap();
        let coin = build_coin3(0.7, 1.1).unwrap();
        let s1 = coin_eigenbasis(&coin).unwrap().sigma1_minus.to_vec();
        let r = transport_efficiency(ring, &coin, &s1).unwrap();
        assert!((r.eta - 1.0).abs() < 1e-10);
        let basis = trapped_basis(ring, &coin).unwrap();
        let psi = initial_state(ring, &s1).unwrap();
        for m in ring.labels() {
            assert!(trapping_probability(&basis, psi.amplitudes(), m).unwrap() < 1e-10);
        }
    }

    #[test]
    fn grover_five_sigma_plus() {
        let ring = RingConfig::new(5).unwrap();
        let coin = grover();
        let r = transport_efficiency(ring, &coin, &sigma_plus(&coin)).unwrap();
        assert!((r.survival_limit - 0.55).abs() <= 0.01, "{}", r.survival_limit);
        assert!((r.eta - 0.45).abs() <= 0.01);
        assert_eq!(r.trapping.len(), 9);
        assert!(r.trapping.iter().all(|(m, _)| *m != ring.sink_label()));
    }

    #[test]
    fn closed_form_examples() {
        let eta = efficiency_closed_form(2, FRAC_1_SQRT_2, 0.0, 1.0).unwrap();
        assert!((eta - 0.6).abs() < 1e-14);
        for n in 2..=5 {
            assert!((efficiency_closed_form(n, 0.4, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(efficiency_closed_form(6, 0.4, 0.5, 0.1), Err(Error::OutsideTable(6)));
        assert!(efficiency_closed_form(3, 0.4, 0.8, 0.3).is_err());
    }

    #[test]
    fn line_quotient_and_origin_term() {
        let rho = 1.0 / 3f64.sqrt();
        let q = line_quotient(rho).unwrap();
        assert!((q - 0.101021).abs() < 1e-6);
        let p0 = line_trapping_probability(0, rho, C64::new(1.0, 0.0), ZERO).unwrap();
        assert!((p0 - 0.303062).abs() < 1e-6);
        assert!(line_quotient(1.0).is_err());
    }

    #[test]
    fn line_estimate_sums_line_probabilities() {
        let rho = 0.45;
        let (hp, h2) = (C64::new(0.6, 0.1), C64::new(-0.2, 0.5));
        let n = 7;
        let direct: f64 = (-(n as i64) + 1..n as i64)
            .map(|m| line_trapping_probability(m, rho, hp, h2).unwrap())
            .sum();
        let est = efficiency_line_estimate(n, rho, hp, h2).unwrap();
        assert!((1.0 - direct - est).abs() < 1e-13, "{} vs {}", 1.0 - direct, est);
    }

    #[test]
    fn common_eigenstate_conditions() {
        let ring = RingConfig::new(4).unwrap();
        for (alpha, expect) in [(0.0, true), (PI, false)] {
            let coin = build_coin3(0.55, alpha).unwrap();
            let raw = stationary_states(ring, &coin).unwrap();
            // raw states are not normalized; the check normalizes itself
            let state = WalkState::from_amplitudes(ring, 3, raw.raw_state(-1).unwrap().to_vec()).unwrap();
            let check = common_eigenstate_check(&state, &coin).unwrap();
            assert_eq!(check.passes, expect, "alpha = {alpha}");
            if expect {
                assert!((check.beta.unwrap() - C64::new(1.0, 0.0)).norm() < 1e-10);
            } else {
                assert!(check.shift_residuals.iter().any(|r| *r > 0.1));
            }
        }
    }
}
