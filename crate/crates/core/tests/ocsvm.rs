mod common;

use common::{ocsvm_instance as instance, qp_oracle};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qhsvm::kernel::KernelMatrix;
use qhsvm::ocsvm::{dual_objective, fit, upper_bound, OcsvmConfig, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(k: &KernelMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(k.rows(), k.cols(), k.values())
}

#[test]
fn matches_reference_qp_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let n = rng.random_range(2..=20);
        let nu = [0.05, 0.1, 0.25, 0.5, 0.8, 1.0][case % 6];
        let (kt, ks) = instance(&mut rng, case, n, 15);
        let model = fit(&kt, &OcsvmConfig::with_nu(nu)).unwrap();
        let oracle = qp_oracle(&dense(&kt), nu);
        let obj = dual_objective(&kt, &model.alphas);
        assert!((obj - oracle.objective).abs() <= 1e-6, "case {case}: {obj} vs {}", oracle.objective);
        let kd = dense(&ks);
        let got: Vec<Outcome> = model.predict(&ks).unwrap().iter().map(|p| p.label).collect();
        let want: Vec<Outcome> = (0..ks.rows())
            .map(|s| {
                let score: f64 = (0..n).map(|r| oracle.alphas[r] * kd[(s, r)]).sum::<f64>() - oracle.rho;
                if score >= 0.0 { Outcome::Normal } else { Outcome::Anomaly }
            })
            .collect();
        assert_eq!(got, want, "case {case} (n = {n}, nu = {nu})");
    }
}

#[test]
fn nu_bounds_outliers_and_support_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let n = 100;
    for case in 0..20 {
        let nu = [0.05, 0.1, 0.2, 0.3, 0.5][case % 5];
        let (kt, _) = instance(&mut rng, case, n, 1);
        let model = fit(&kt, &OcsvmConfig::with_nu(nu)).unwrap();
        let outliers = model.predict(&kt).unwrap().iter().filter(|p| p.label == Outcome::Anomaly).count();
        let slack = 2.0 / n as f64;
        assert!(outliers as f64 / n as f64 <= nu + slack, "case {case}: {outliers} outliers at nu = {nu}");
        assert!(model.support_indices.len() as f64 / n as f64 >= nu - slack, "case {case}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution_satisfies_kkt(seed in any::<u64>(), n in 2usize..30, nu in 0.05f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (kt, _) = instance(&mut rng, seed as usize, n, 1);
        let config = OcsvmConfig::with_nu(nu);
        let model = fit(&kt, &config).unwrap();
        let cap = upper_bound(nu, n);
        prop_assert!((model.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let k = dense(&kt);
        let a = nalgebra::DVector::from_vec(model.alphas.clone());
        let g = &k * &a;
        let tol = 1e-5;
        for i in 0..n {
            prop_assert!(model.alphas[i] >= 0.0 && model.alphas[i] <= cap * (1.0 + 1e-12));
            if model.alphas[i] < cap * (1.0 - 1e-9) {
                prop_assert!(g[i] >= model.rho - tol, "i = {}: G {} rho {}", i, g[i], model.rho);
            }
            if model.alphas[i] > cap * 1e-9 {
                prop_assert!(g[i] <= model.rho + tol, "i = {}: G {} rho {}", i, g[i], model.rho);
            }
        }
    }

    #[test]
    fn kernel_scale_scales_rho_only(seed in any::<u64>(), n in 2usize..20, nu in 0.05f64..=1.0, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (kt, ks) = instance(&mut rng, 0, n, 10);
        let config = OcsvmConfig::with_nu(nu);
        let base = fit(&kt, &config).unwrap();
        let scaled = fit(&kt.scaled(c), &config).unwrap();
        prop_assert!((dual_objective(&kt.scaled(c), &scaled.alphas) - c * dual_objective(&kt, &base.alphas)).abs() < 1e-6 * c);
        prop_assert!((scaled.rho - c * base.rho).abs() < 1e-5 * c);
        let a = base.decision_scores(&ks).unwrap();
        let b = scaled.decision_scores(&ks.scaled(c)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - c * x).abs() < 1e-5 * c);
        }
    }
}
