use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ringwalk::linalg::{matvec, norm, ZERO};
use ringwalk::percolation::{run_realization, ConfigStream};
use ringwalk::*;

fn lazy(alpha: f64) -> CoinOperator {
    build_coin3(1.0 / 3f64.sqrt(), alpha).unwrap()
}

#[test]
fn alpha_pi_breaks_trapped_states() {
    let ring = RingConfig::new(5).unwrap();
    let coin = lazy(PI);
    let raw = stationary_states(ring, &coin).unwrap();
    let s0 = raw.raw_state(0).unwrap();
    // edge between vertices 0 and 1 carries the support of s_0
    let e = ring.index_of(0).unwrap();
    let mut cfg = EdgeConfig::full(ring.vertices());
    cfg.set(e, false);
    let u = percolated_evolution(ring, &coin, &cfg).unwrap().u;
    let diff: Vec<C64> = matvec(&u, s0).iter().zip(s0).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) / norm(s0) > 0.1);
}

#[test]
fn alpha_zero_realizations_stay_above_plateau() {
    let ring = RingConfig::new(5).unwrap();
    let coin = lazy(0.0);
    let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
    let plateau = transport_efficiency(ring, &coin, &psi).unwrap().survival_limit;
    for r in 0..4 {
        let s = realization_survival(ring, &coin, &psi, 0.5, 2000, 42, r).unwrap();
        let min = s.survival.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= plateau - 1e-10, "realization {r}: {min} < {plateau}");
    }
}

#[test]
fn alpha_pi_realization_decays() {
    let ring = RingConfig::new(5).unwrap();
    let coin = lazy(PI);
    let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
    let s = realization_survival(ring, &coin, &psi, 0.5, 2000, 42, 0).unwrap();
    assert!(s.survival[2000] < 1e-3, "{}", s.survival[2000]);
}

#[test]
fn channel_diagonal_matches_monte_carlo() {
    let ring = RingConfig::new(3).unwrap();
    let coin = lazy(PI);
    let psi = coin_eigenbasis(&coin).unwrap().sigma_plus;
    let channel = PercolationChannel::exact(ring, &coin, 0.5).unwrap();
    let mut rho = DensityMatrix::from_pure(&initial_state(ring, &psi).unwrap());
    for _ in 0..20 {
        rho = channel_step(&rho, &channel).unwrap();
    }
    let exact = rho.diagonal();

    let n = 10_000;
    let dim = exact.len();
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    for r in 0..n {
        let state = run_realization(ring, &coin, &psi, 0.5, 20, 2024, r).unwrap().final_state;
        for (i, z) in state.amplitudes().iter().enumerate() {
            let w = z.norm_sqr();
            sum[i] += w;
            sum_sq[i] += w * w;
        }
    }
    let nf = n as f64;
    for i in 0..dim {
        let mean = sum[i] / nf;
        let var = (sum_sq[i] / nf - mean * mean).max(0.0);
        let sigma = (var / nf).sqrt();
        assert!(
            (mean - exact[i]).abs() <= 3.0 * sigma + 1e-12,
            "component {i}: {mean} vs {} (σ {sigma})",
            exact[i]
        );
    }
}

#[test]
fn channel_preserves_hermiticity_and_shrinks_trace() {
    let ring = RingConfig::new(3).unwrap();
    let coin = lazy(2.1);
    let channel = PercolationChannel::exact(ring, &coin, 0.3).unwrap();
    let psi = coin_eigenbasis(&coin).unwrap().sigma2_minus;
    let mut rho = DensityMatrix::from_pure(&initial_state(ring, &psi).unwrap());
    for _ in 0..60 {
        let next = channel_step(&rho, &channel).unwrap();
        assert!(next.hermiticity_deviation() < 1e-10);
        assert!(next.trace() <= rho.trace() + 1e-12);
        assert!(next.min_eigenvalue().unwrap() >= -1e-10);
        rho = next;
    }
}

#[test]
fn sample_streams_are_random_access() {
    let mut a = ConfigStream::new(7, 3, 10);
    let mut b = ConfigStream::new(7, 3, 10);
    let forward: Vec<EdgeConfig> = (0..50).map(|t| a.config_at(t, 0.4)).collect();
    for t in (0..50).rev() {
        assert_eq!(b.config_at(t, 0.4), forward[t as usize]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(sample_config(0.0, 10, &mut rng).count() == 0);
    assert!(sample_config(1.0, 10, &mut rng).is_full());
}

#[test]
fn fully_broken_ring_reflection_is_an_involution() {
    let ring = RingConfig::new(4).unwrap();
    let s = percolated_step(ring, &EdgeConfig::empty(8), 3).unwrap();
    let s2 = s.dot(&s);
    assert!(ringwalk::linalg::identity_deviation(&s2) == 0.0);
    // every vertex swaps L and R locally
    for j in 0..8 {
        assert_eq!(s[[j * 3, j * 3 + 2]], C64::new(1.0, 0.0));
        assert_eq!(s[[j * 3 + 1, j * 3 + 1]], C64::new(1.0, 0.0));
        assert_eq!(s[[j * 3, j * 3]], ZERO);
    }
}
