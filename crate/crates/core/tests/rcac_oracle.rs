mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcac_autopilot::rcac::{batch_cost, RcacConfig, RcacState, RetrospectiveSample};

use common::{batch_minimizer, rls_versus_batch, Sample, RLS_SIZES};

#[test]
fn recursive_matches_batch_for_every_size() {
    for (i, n) in RLS_SIZES.iter().enumerate() {
        for seed in 0..4 {
            let c = rls_versus_batch(100 * i as u64 + seed, *n, 50);
            assert_eq!(c.steps, 50);
            assert!(
                c.max_relative_error < 1e-8,
                "l_theta {n} seed {seed}: {}",
                c.max_relative_error
            );
            assert!(c.max_asymmetry <= 1e-12);
            assert!(c.min_decrease_eigenvalue >= -1e-12);
        }
    }
}

fn to_rs(samples: &[Sample]) -> Vec<RetrospectiveSample> {
    samples
        .iter()
        .map(|s| RetrospectiveSample {
            z: s.z.clone(),
            phi_prev: s.phi_prev.clone(),
            u_prev: s.u_prev.clone(),
        })
        .collect()
}

fn random_samples(rng: &mut ChaCha8Rng, n_ch: usize, n: usize, len: usize) -> Vec<Sample> {
    (0..len)
        .map(|_| Sample {
            z: DVector::from_fn(n_ch, |_, _| rng.random_range(-1.0..1.0)),
            phi_prev: DMatrix::from_fn(n_ch, n, |_, _| rng.random_range(-1.0..1.0)),
            u_prev: DVector::from_fn(n_ch, |_, _| rng.random_range(-1.0..1.0)),
        })
        .collect()
}

#[test]
fn batch_minimizer_beats_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut config = RcacConfig::new(0.5, -1.0, 3, 9);
    config.sigma[1] = 1.0;
    let samples = random_samples(&mut rng, 3, 9, 30);
    let history = to_rs(&samples);
    let best = batch_minimizer(&config, &samples);
    let j_best = batch_cost(&best, &history, &config);
    for _ in 0..100 {
        let d = DVector::from_fn(9, |_, _| rng.random_range(-0.1..0.1));
        assert!(batch_cost(&(&best + d), &history, &config) >= j_best);
    }
}

#[test]
fn cost_is_quadratic_along_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = RcacConfig::new(2.0, 1.0, 1, 4);
    let history = to_rs(&random_samples(&mut rng, 1, 4, 20));
    let theta0 = DVector::zeros(4);
    let d = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    let j = |t: f64| batch_cost(&(&theta0 + &d * t), &history, &config);
    // Curvature from three points; J is exactly quadratic so it is the same
    // on any stencil.
    let c1 = j(1.0) - 2.0 * j(0.0) + j(-1.0);
    let c2 = (j(2.0) - 2.0 * j(0.0) + j(-2.0)) / 4.0;
    assert!((c1 - c2).abs() < 1e-10 * c1.abs().max(1.0));
    // And it equals 2 dᵀ(Σφᵀφ + I/p0)d.
    let mut h = DMatrix::identity(4, 4) / config.p0;
    for s in &history {
        h += s.phi_prev.transpose() * &s.phi_prev;
    }
    let expected = 2.0 * d.dot(&(h * &d));
    assert!((c1 - expected).abs() < 1e-10 * expected);
}

#[test]
fn masked_coefficients_stay_zero_over_a_thousand_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mask = vec![false; 12];
    mask[0] = true;
    mask[3] = true;
    let config = RcacConfig::new(0.1, -1.0, 3, 12).with_mask(mask);
    let mut state = RcacState::new(&config).unwrap();
    for _ in 0..1000 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = DMatrix::from_fn(3, 12, |_, _| rng.random_range(-1.0..1.0));
        state.step(&z, phi, &config).unwrap();
        assert_eq!(state.theta()[0], 0.0);
        assert_eq!(state.theta()[3], 0.0);
    }
    assert!(state.theta().iter().any(|t| *t != 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The recursion depends only on its declared state: starting the same
    /// data stream at a later step after idle (zero-regressor) steps gives the
    /// same coefficients.
    #[test]
    fn update_is_independent_of_start_step(seed in any::<u64>(), idle in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = RcacConfig::new(1.0, -1.0, 1, 3);
        let data: Vec<(f64, DMatrix<f64>)> = (0..30)
            .map(|_| (rng.random_range(-1.0..1.0), DMatrix::from_fn(1, 3, |_, _| rng.random_range(-1.0..1.0))))
            .collect();
        let mut a = RcacState::new(&config).unwrap();
        let mut b = RcacState::new(&config).unwrap();
        for _ in 0..idle {
            b.step(&[0.0], DMatrix::zeros(1, 3), &config).unwrap();
        }
        for (z, phi) in &data {
            a.step(&[*z], phi.clone(), &config).unwrap();
            b.step(&[*z], phi.clone(), &config).unwrap();
        }
        prop_assert_eq!(a.theta(), b.theta());
        prop_assert_eq!(a.covariance(), b.covariance());
    }

    #[test]
    fn covariance_never_grows(seed in any::<u64>(), p0 in 1e-4f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = RcacConfig::new(p0, 1.0, 3, 9);
        let mut state = RcacState::new(&config).unwrap();
        for _ in 0..40 {
            let before = state.covariance().clone();
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let phi = DMatrix::from_fn(3, 9, |_, _| rng.random_range(-2.0..2.0));
            state.step(&z, phi, &config).unwrap();
            let p = state.covariance();
            prop_assert!((p - p.transpose()).abs().max() <= 1e-12);
            prop_assert!(rcac_autopilot::rcac::min_eigenvalue(&(before - p)) >= -1e-12 * p0.max(1.0));
        }
    }
}
