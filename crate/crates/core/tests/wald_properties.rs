mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use wald_cpd::critical_values::compute_table;
use wald_cpd::mce::{cold_fit, fit_segment};
use wald_cpd::models::{Scaled, Var1Gaussian};
use wald_cpd::wald::{cov_matrices, omega_hat};
use wald_cpd::{run_test, scan_fits, CriticalValueTable, FitOptions, ModelSpec, ParamVector};

use common::*;

fn table4() -> &'static CriticalValueTable {
    static T: OnceLock<CriticalValueTable> = OnceLock::new();
    T.get_or_init(|| compute_table(4, &[0.01, 0.05, 0.1], 400, 4000, 7).unwrap())
}

#[test]
fn g_and_f_closed_forms_for_constant_intensity() {
    let spec = poisson_spec(1);
    let model = spec.build().unwrap();
    let s = counts_series(spec, &[2.5, 0.0], 800, 31);
    let opts = FitOptions {
        frozen: Some(vec![false, true]),
        ..FitOptions::default()
    };
    let fit = fit_segment(
        model.as_ref(),
        &s,
        s.full(),
        &ParamVector(vec![1.0, 0.0]),
        &opts,
    )
    .unwrap();
    let cov = cov_matrices(model.as_ref(), &s, &fit).unwrap();
    let ys: Vec<f64> = s.rows().map(|r| r[0]).collect();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    assert!((cov.g_hat[(0, 0)] - var / (mean * mean)).abs() < 1e-9);
    assert!((cov.f_hat[(0, 0)] - 1.0 / mean).abs() < 1e-9);
}

#[test]
fn information_equality_for_correct_poisson_model() {
    let spec = poisson_spec(2);
    let model = spec.build().unwrap();
    let s = counts_series(spec, &MOD_THETA, 2000, 32);
    let fit = cold_fit(model.as_ref(), &s, s.full(), &FitOptions::default()).unwrap();
    let cov = cov_matrices(model.as_ref(), &s, &fit).unwrap();
    let rel = (&cov.f_hat - &cov.g_hat).norm() / cov.f_hat.norm();
    assert!(rel < 0.2, "relative gap {rel}");
}

#[test]
fn weight_matrix_is_positive_semidefinite() {
    for seed in 0..4 {
        let model = ModelSpec::var1(2).build().unwrap();
        let s = var1_series(&AC_LEVEL, 300, 40 + seed);
        let fits = scan_fits(model.as_ref(), &s, &FitOptions::default()).unwrap();
        let omega = omega_hat(model.as_ref(), &s, &fits).unwrap();
        let eig = omega.matrix.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-10, "{eig}");
    }
}

#[test]
fn q_values_invariant_to_contrast_scale() {
    let s = var1_series(&[0.5, -0.2, 0.35, 0.1], 400, 50);
    let base = run_test(&Var1Gaussian::identity(2), &s, 0.05, table4()).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let scaled = Scaled::new(Var1Gaussian::identity(2), c);
        let scan = run_test(&scaled, &s, 0.05, table4()).unwrap();
        for ((k0, q0), (k1, q1)) in base.q_values.iter().zip(&scan.q_values) {
            assert_eq!(k0, k1);
            let rel = (q0 - q1).abs() / q0.abs().max(1e-12);
            assert!(rel <= 1e-6, "c={c} k={k0}: {q0} vs {q1}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reject_is_monotone_in_alpha(seed in 0u64..10_000, change in any::<bool>()) {
        let model = ModelSpec::var1(2).build().unwrap();
        let theta1 = change.then_some(&[0.5, -0.2, 0.1, 0.1][..]);
        let s = wald_cpd::simulate(&scenario(ModelSpec::var1(2), &[0.5, -0.2, 0.35, 0.1], theta1, 300, seed)).unwrap();
        let decisions: Vec<bool> = [0.01, 0.05, 0.1]
            .iter()
            .map(|&a| run_test(model.as_ref(), &s, a, table4()).unwrap().reject)
            .collect();
        prop_assert!(decisions.windows(2).all(|w| !w[0] || w[1]), "{:?}", decisions);
    }

    #[test]
    fn q_values_are_nonnegative(seed in 0u64..10_000) {
        let spec = poisson_spec(2);
        let model = spec.build().unwrap();
        let s = counts_series(spec, &MOD_THETA, 250, seed);
        let scan = run_test(model.as_ref(), &s, 0.05, table4_for(6)).unwrap();
        prop_assert!(scan.q_values.iter().all(|(_, q)| *q >= -1e-10));
        prop_assert_eq!(scan.q_values.len(), 250 - 2 * scan.v_n + 1);
    }
}

fn table4_for(d: usize) -> &'static CriticalValueTable {
    static T: OnceLock<CriticalValueTable> = OnceLock::new();
    T.get_or_init(|| compute_table(d, &[0.05], 400, 4000, 8).unwrap())
}
