use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringwalk::linalg::max_abs_diff;
use ringwalk::trapping::efficiency_for_state;
use ringwalk::*;

fn random_coin_state(rng: &mut impl Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..3)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

#[test]
fn exact_projector_matches_small_ring_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for n in 2..=5 {
        let ring = RingConfig::new(n).unwrap();
        for rho in [0.2, 1.0 / 3f64.sqrt(), 0.6, 0.9] {
            let alpha = rng.random::<f64>() * 2.0 * PI;
            let coin = build_coin3(rho, alpha).unwrap();
            for _ in 0..10 {
                let psi = random_coin_state(&mut rng);
                let report = transport_efficiency(ring, &coin, &psi).unwrap();
                let (hp, _, h2) = report.decomposition.unwrap().weights();
                let closed = efficiency_closed_form(n, rho, hp, h2).unwrap();
                worst = worst.max((report.eta - closed).abs());
            }
        }
    }
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn efficiency_is_alpha_invariant_in_the_coin_eigenbasis() {
    let ring = RingConfig::new(4).unwrap();
    let h = CoinDecomposition {
        h_plus: C64::new(0.5, 0.2),
        h1: C64::new(-0.3, 0.4),
        h2: C64::new(0.1, -0.2),
    };
    let s = (h.h_plus.norm_sqr() + h.h1.norm_sqr() + h.h2.norm_sqr()).sqrt();
    let h = CoinDecomposition {
        h_plus: h.h_plus / s,
        h1: h.h1 / s,
        h2: h.h2 / s,
    };
    let mut etas = Vec::new();
    for k in 0..12 {
        let coin = build_coin3(0.45, k as f64 * PI / 6.0).unwrap();
        let psi = coin_eigenbasis(&coin).unwrap().compose(h);
        etas.push(transport_efficiency(ring, &coin, &psi).unwrap().eta);
    }
    let spread = etas.iter().cloned().fold(f64::MIN, f64::max) - etas.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-10, "{spread:e}");
}

#[test]
fn efficiency_depends_only_on_weights() {
    let ring = RingConfig::new(3).unwrap();
    let coin = build_coin3(0.7, 0.9).unwrap();
    let basis = coin_eigenbasis(&coin).unwrap();
    let (wp, w1, w2) = (0.3f64, 0.45f64, 0.25f64);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut etas = Vec::new();
    for _ in 0..20 {
        let mut phase = || C64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
        let h = CoinDecomposition {
            h_plus: phase() * wp.sqrt(),
            h1: phase() * w1.sqrt(),
            h2: phase() * w2.sqrt(),
        };
        etas.push(transport_efficiency(ring, &coin, &basis.compose(h)).unwrap().eta);
    }
    let spread = etas.iter().cloned().fold(f64::MIN, f64::max) - etas.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-10, "{spread:e}");
}

#[test]
fn sigma_plus_is_the_worst_initial_coin_state() {
    let ring = RingConfig::new(3).unwrap();
    let coin = build_coin3(0.6, 0.7).unwrap();
    let trapped = trapped_basis(ring, &coin).unwrap();
    let eta_of = |psi: &[C64]| {
        let state = initial_state(ring, psi).unwrap();
        efficiency_for_state(&trapped, state.amplitudes()).unwrap().eta
    };
    let worst = eta_of(&coin_eigenbasis(&coin).unwrap().sigma_plus);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let min = (0..10_000)
        .map(|_| eta_of(&random_coin_state(&mut rng)))
        .fold(f64::INFINITY, f64::min);
    assert!(min >= worst - 1e-9, "{min} < {worst}");
}

#[test]
fn simulated_plateau_matches_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=5 {
        let ring = RingConfig::new(n).unwrap();
        for (rho, alpha) in [(1.0 / 3f64.sqrt(), 0.0), (0.8, PI), (0.7, 2.0), (1.0 / 3f64.sqrt(), PI)] {
            let coin = build_coin3(rho, alpha).unwrap();
            let psi = random_coin_state(&mut rng);
            let limit = transport_efficiency(ring, &coin, &psi).unwrap().survival_limit;
            let s = evolve_survival(ring, &coin, &psi, 2000).unwrap();
            assert!(
                (s.survival[2000] - limit).abs() <= 1e-6,
                "N={n} rho={rho}: {} vs {limit}",
                s.survival[2000]
            );
        }
    }
}

#[test]
fn line_estimate_converges_to_exact_on_large_rings() {
    let ring = RingConfig::new(20).unwrap();
    let rho = 1.0 / 3f64.sqrt();
    let coin = build_coin3(rho, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let basis = coin_eigenbasis(&coin).unwrap();
    for psi in [basis.sigma_plus.to_vec(), random_coin_state(&mut rng), random_coin_state(&mut rng)] {
        let report = transport_efficiency(ring, &coin, &psi).unwrap();
        let h = report.decomposition.unwrap();
        let est = efficiency_line_estimate(20, rho, h.h_plus, h.h2).unwrap();
        assert!((report.eta - est).abs() <= 1e-6, "{} vs {est}", report.eta);
    }
}

#[test]
fn trapped_states_are_eigenvectors_of_every_alpha_zero_configuration() {
    let ring = RingConfig::new(4).unwrap();
    let coin = build_coin3(0.55, 0.0).unwrap();
    let raw = stationary_states(ring, &coin).unwrap();
    for mask in 0..(1u64 << 8) {
        let cfg = EdgeConfig::from_mask(8, mask);
        let u = percolated_evolution(ring, &coin, &cfg).unwrap().u;
        for n in -3..=2 {
            let s = raw.raw_state(n).unwrap();
            let us = ringwalk::linalg::matvec(&u, s);
            assert!(max_abs_diff(&us, s) < 1e-10, "mask {mask:b} n {n}");
        }
    }
}
