mod common;

use common::{oracle_state, random_points};
use proptest::prelude::*;
use qhsvm::feature_map::{Entanglement, FeatureMapSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn compute_uncompute_equals_overlap_at_four_and_six_qubits() {
    for features in [8, 12] {
        let spec = FeatureMapSpec::<f64>::new(features).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(features as u64);
        let xs = random_points(&mut rng, 200, features);
        let ys = random_points(&mut rng, 200, features);
        for (x, y) in xs.iter().zip(&ys) {
            let p0 = spec.compute_uncompute(x, y).unwrap().probabilities()[0];
            let f = spec.fidelity_exact(x, y).unwrap();
            assert!((p0 - f).abs() < 1e-10, "{p0} vs {f}");
        }
    }
}

#[test]
fn encoding_matches_dense_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for features in 1..=8 {
        let spec = FeatureMapSpec::<f64>::new(features).unwrap();
        for x in random_points(&mut rng, 10, features) {
            let got = spec.encode(&x).unwrap().state;
            let want = oracle_state(spec.num_qubits(), &spec.circuit(&x).unwrap());
            for (i, a) in got.amplitudes().iter().enumerate() {
                assert!((a - want[i]).norm() < 1e-12);
            }
        }
    }
}

/// Purity of qubit 0's reduced state for a two-qubit register.
fn reduced_purity(a: &[nalgebra::Complex<f64>]) -> f64 {
    let p00 = a[0].norm_sqr() + a[2].norm_sqr();
    let p11 = a[1].norm_sqr() + a[3].norm_sqr();
    let p01 = a[0] * a[1].conj() + a[2] * a[3].conj();
    p00 * p00 + p11 * p11 + 2.0 * p01.norm_sqr()
}

#[test]
fn chain_layer_entangles_encoded_states() {
    let chain = FeatureMapSpec::<f64>::new(4).unwrap();
    let plain = FeatureMapSpec::<f64>::with_entanglement(4, Entanglement::None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut entangled = 0;
    for x in random_points(&mut rng, 50, 4) {
        assert!((reduced_purity(plain.encode(&x).unwrap().state.amplitudes()) - 1.0).abs() < 1e-12);
        if reduced_purity(chain.encode(&x).unwrap().state.amplitudes()) < 1.0 - 1e-3 {
            entangled += 1;
        }
    }
    assert!(entangled > 25, "only {entangled} of 50 encoded states are entangled");
}

/// A single entangling layer after every rotation is shared by both states of
/// the overlap and cancels, so the kernel still factorizes over qubits.
#[test]
fn kernel_is_blind_to_trailing_entangler() {
    let chain = FeatureMapSpec::<f64>::new(4).unwrap();
    let plain = FeatureMapSpec::<f64>::with_entanglement(4, Entanglement::None).unwrap();
    let single = FeatureMapSpec::<f64>::with_entanglement(2, Entanglement::None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x = random_points(&mut rng, 1, 4).remove(0);
        let y = random_points(&mut rng, 1, 4).remove(0);
        let product =
            single.fidelity_exact(&x[..2], &y[..2]).unwrap() * single.fidelity_exact(&x[2..], &y[2..]).unwrap();
        assert!((plain.fidelity_exact(&x, &y).unwrap() - product).abs() < 1e-12);
        assert!((chain.fidelity_exact(&x, &y).unwrap() - product).abs() < 1e-12);
    }
}

#[test]
fn sampled_estimate_is_unbiased_within_noise() {
    let spec = FeatureMapSpec::<f64>::new(6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = random_points(&mut rng, 40, 6);
    let shots = 20_000u64;
    for (i, pair) in pts.chunks(2).enumerate() {
        let f = spec.fidelity_exact(&pair[0], &pair[1]).unwrap();
        let est = spec.fidelity_sampled(&pair[0], &pair[1], shots, i as u64).unwrap();
        let sigma = (f * (1.0 - f) / shots as f64).sqrt();
        assert!((est - f).abs() <= 5.0 * sigma + 1e-12, "pair {i}: {est} vs {f}");
    }
}

fn point(features: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..std::f64::consts::PI, features)
}

proptest! {
    #[test]
    fn fidelity_is_symmetric_bounded_and_reflexive(
        (x, y) in (1usize..9).prop_flat_map(|f| (point(f), point(f)))
    ) {
        let spec = FeatureMapSpec::<f64>::new(x.len()).unwrap();
        let fxy = spec.fidelity_exact(&x, &y).unwrap();
        let fyx = spec.fidelity_exact(&y, &x).unwrap();
        prop_assert!((fxy - fyx).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&fxy));
        prop_assert!((spec.fidelity_exact(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_fidelity_is_a_shot_fraction(x in point(4), y in point(4), shots in 1u64..2000, seed in any::<u64>()) {
        let spec = FeatureMapSpec::<f64>::new(4).unwrap();
        let est = spec.fidelity_sampled(&x, &y, shots, seed).unwrap();
        let count = est * shots as f64;
        prop_assert!((count - count.round()).abs() < 1e-9 && (0.0..=1.0).contains(&est));
        prop_assert_eq!(est, spec.fidelity_sampled(&x, &y, shots, seed).unwrap());
    }
}
