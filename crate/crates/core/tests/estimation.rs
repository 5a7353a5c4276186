mod common;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wald_cpd::mce::cold_fit;
use wald_cpd::{
    fit_segment, scan_fits, Error, FitOptions, ModelSpec, ParamVector, Segment, TimeSeries,
};

use common::*;

/// Least squares for `Y_t = A Y_{t-1} + e_t` with `Y_0 = 0`, via the 2x2
/// normal equations.
fn ols_oracle(s: &TimeSeries, seg: Segment) -> Vec<f64> {
    let mut sxx = Matrix2::<f64>::zeros();
    let mut syx = Matrix2::<f64>::zeros();
    for t in seg.lo..=seg.hi {
        let x = match s.lagged(t) {
            Some(x) => Vector2::new(x[0], x[1]),
            None => Vector2::zeros(),
        };
        let y = s.row(t);
        let y = Vector2::new(y[0], y[1]);
        sxx += x * x.transpose();
        syx += y * x.transpose();
    }
    let a = syx * sxx.try_inverse().unwrap();
    vec![a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]]
}

#[test]
fn var1_optimizer_matches_least_squares() {
    let model = ModelSpec::var1(2).build().unwrap();
    let s = var1_series(&[0.5, 0.2, 0.1, 0.3], 600, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = ParamVector::zeros(4);
    for _ in 0..50 {
        let lo = rng.random_range(1..=400);
        let hi = rng.random_range(lo + 60..=600);
        let seg = Segment::new(lo, hi).unwrap();
        let fit = fit_segment(model.as_ref(), &s, seg, &zero, &FitOptions::default()).unwrap();
        let oracle = ols_oracle(&s, seg);
        let err = fit.theta_hat.max_abs_diff(&ParamVector(oracle.clone()));
        assert!(
            err <= 1e-4,
            "segment {seg}: {:?} vs {oracle:?}",
            fit.theta_hat
        );
    }
}

#[test]
fn constant_poisson_intensity_is_sample_mean() {
    let spec = poisson_spec(1);
    let model = spec.build().unwrap();
    for seed in 0..5 {
        let s = counts_series(spec.clone(), &[3.0, 0.0], 400, seed);
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
        let mean = s.mean(s.full())[0];
        assert!(
            (fit.theta_hat[0] - mean).abs() <= 1e-8,
            "{} vs {mean}",
            fit.theta_hat[0]
        );
        assert_eq!(fit.theta_hat[1], 0.0);
    }
}

#[test]
fn scan_covers_interior_window() {
    let model = ModelSpec::var1(2).build().unwrap();
    let s = var1_series(&AC_LEVEL, 500, 4);
    let fits = scan_fits(model.as_ref(), &s, &FitOptions::default()).unwrap();
    assert_eq!(fits.k_first, 96);
    assert_eq!(fits.left.len(), 309);
    assert_eq!(fits.right.len(), 309);
    assert_eq!(fits.ks().last(), Some(404));
    let (l, r) = fits.at(200);
    assert_eq!(l.segment, Segment { lo: 1, hi: 200 });
    assert_eq!(r.segment, Segment { lo: 201, hi: 500 });
    assert_eq!(fits.head.segment, Segment { lo: 1, hi: 38 });
    assert_eq!(fits.tail.segment, Segment { lo: 39, hi: 500 });
}

fn warm_equals_cold(spec: ModelSpec, theta: &[f64], seed: u64) {
    let model = spec.build().unwrap();
    let s = simulate_any(spec, theta, seed);
    let opts = FitOptions::default();
    let fits = scan_fits(model.as_ref(), &s, &opts).unwrap();
    let ks: Vec<usize> = fits.ks().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let k = ks[rng.random_range(0..ks.len())];
        let (l, r) = fits.at(k);
        let cl = cold_fit(model.as_ref(), &s, l.segment, &opts).unwrap();
        let cr = cold_fit(model.as_ref(), &s, r.segment, &opts).unwrap();
        assert!(
            l.theta_hat.max_abs_diff(&cl.theta_hat) <= 1e-4,
            "left k={k}"
        );
        assert!(
            r.theta_hat.max_abs_diff(&cr.theta_hat) <= 1e-4,
            "right k={k}"
        );
    }
}

fn simulate_any(spec: ModelSpec, theta: &[f64], seed: u64) -> TimeSeries {
    wald_cpd::simulate(&scenario(spec, theta, None, 500, seed)).unwrap()
}

#[test]
fn warm_started_scan_matches_cold_fits_var1() {
    warm_equals_cold(ModelSpec::var1(2), &AC_LEVEL, 5);
}

#[test]
fn warm_started_scan_matches_cold_fits_ingarch1() {
    warm_equals_cold(poisson_spec(2), &MOD_THETA, 6);
}

#[test]
fn all_zero_segment_is_a_singular_design() {
    let model = ModelSpec::var1(2).build().unwrap();
    let s = TimeSeries::new(vec![0.0; 40], 2, false).unwrap();
    let err = cold_fit(model.as_ref(), &s, s.full(), &FitOptions::default()).unwrap_err();
    assert!(matches!(err, Error::SingularDesign(_)), "{err}");
}
