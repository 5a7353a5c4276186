mod common;

use nalgebra::{Matrix2, Vector2};
use wald_cpd::models::ComponentDist;
use wald_cpd::{simulate, Innovation, ModelSpec, TimeSeries};

use common::*;

fn column(s: &TimeSeries, j: usize) -> Vec<f64> {
    s.rows().map(|r| r[j]).collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

/// Sample lag-`h` autocovariance `mean(Y_{t+h} Y_t')` after centring.
fn autocov(s: &TimeSeries, h: usize) -> Matrix2<f64> {
    let m0 = s.mean(s.full());
    let mu = Vector2::new(m0[0], m0[1]);
    let n = s.n();
    let mut acc = Matrix2::zeros();
    for t in 1..=n - h {
        let a = Vector2::from_column_slice(s.row(t + h)) - mu;
        let b = Vector2::from_column_slice(s.row(t)) - mu;
        acc += a * b.transpose();
    }
    acc / n as f64
}

/// Solves `G = A G A' + I` by fixed-point iteration.
fn lyapunov(a: &Matrix2<f64>) -> Matrix2<f64> {
    let mut g = Matrix2::identity();
    for _ in 0..500 {
        g = a * g * a.transpose() + Matrix2::identity();
    }
    g
}

#[test]
fn white_noise_when_feedback_is_zero() {
    let n = 5000;
    let s = var1_series(&[0.0; 4], n, 60);
    for j in 0..2 {
        let (mean, var) = mean_var(&column(&s, j));
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((0.85..=1.15).contains(&var), "var {var}");
    }
}

#[test]
fn gaussian_innovations_have_unit_variance() {
    let mut sc = scenario(ModelSpec::var1(2), &[0.0; 4], None, 5000, 61);
    sc.innovation = Innovation::Gaussian;
    let s = simulate(&sc).unwrap();
    let (_, var) = mean_var(&column(&s, 1));
    assert!((0.85..=1.15).contains(&var), "var {var}");
}

#[test]
fn var1_autocovariances_follow_yule_walker() {
    let a = Matrix2::new(0.6, 0.3, 0.0, 0.4);
    let s = var1_series(&AC_LEVEL, 10_000, 62);
    let g0 = autocov(&s, 0);
    let g1 = autocov(&s, 1);
    let oracle0 = lyapunov(&a);
    assert!(
        (g0 - oracle0).norm() / oracle0.norm() < 0.1,
        "{g0} vs {oracle0}"
    );
    let yw = a * g0;
    assert!((g1 - yw).norm() / yw.norm() < 0.1, "{g1} vs {yw}");
}

#[test]
fn iid_poisson_mean() {
    let n = 10_000;
    let s = counts_series(poisson_spec(1), &[2.0, 0.0], n, 63);
    let (mean, _) = mean_var(&column(&s, 0));
    assert!(
        (mean - 2.0).abs() <= 3.0 * (2.0 / n as f64).sqrt(),
        "mean {mean}"
    );
}

#[test]
fn iid_negative_binomial_moments() {
    let spec = ModelSpec::ingarch1(vec![ComponentDist::NegBinomial { r: 2.0 }]);
    let s = counts_series(spec, &[3.0, 0.0], 10_000, 64);
    let (mean, var) = mean_var(&column(&s, 0));
    assert!((mean - 3.0).abs() < 0.15, "mean {mean}");
    assert!((var - 7.5).abs() <= 0.15 * 7.5, "var {var}");
}

#[test]
fn ingarch_stationary_mean_solves_linear_system() {
    let b = Matrix2::new(0.5, 0.2, 0.1, 0.4);
    let d = Vector2::new(1.0, 0.3);
    let mu = (Matrix2::identity() - b).lu().solve(&d).unwrap();
    let s = counts_series(poisson_spec(2), &MOD_THETA, 10_000, 65);
    let sample = s.mean(s.full());
    for j in 0..2 {
        assert!(
            (sample[j] - mu[j]).abs() <= 0.1 * mu[j],
            "component {j}: {} vs {}",
            sample[j],
            mu[j]
        );
    }
}

#[test]
fn counts_are_nonnegative_integers_with_change() {
    let spec = ModelSpec::ingarch1(vec![
        ComponentDist::Poisson,
        ComponentDist::NegBinomial { r: 2.0 },
    ]);
    let sc = scenario(
        spec,
        &[0.5, 0.5, 0.25, 0.5, 0.1, 0.35],
        Some(&[0.5, 1.0, 0.25, 0.5, 0.1, 0.35]),
        1000,
        66,
    );
    let s = simulate(&sc).unwrap();
    assert!(s.as_slice().iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    let before = s.mean(wald_cpd::Segment { lo: 1, hi: 500 });
    let after = s.mean(wald_cpd::Segment { lo: 501, hi: 1000 });
    assert!(after[1] > before[1]);
}
