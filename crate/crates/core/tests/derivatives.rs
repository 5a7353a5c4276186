mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wald_cpd::{ContrastModel, Order, ParamVector, TimeSeries};

use common::*;

const POINTS: usize = 20;

fn value(model: &dyn ContrastModel, s: &TimeSeries, x: &[f64]) -> f64 {
    model
        .segment_contrast(&ParamVector(x.to_vec()), s, s.full(), Order::Value)
        .unwrap()
        .value
}

fn gradient(model: &dyn ContrastModel, s: &TimeSeries, x: &[f64]) -> Vec<f64> {
    model
        .segment_contrast(&ParamVector(x.to_vec()), s, s.full(), Order::Gradient)
        .unwrap()
        .gradient
        .as_slice()
        .to_vec()
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    max_abs(&diff) / max_abs(numeric).max(1.0)
}

/// Worst gradient and Hessian relative errors against central differences.
fn check(model: &dyn ContrastModel, s: &TimeSeries, x: &[f64]) -> (f64, f64) {
    let d = x.len();
    let full = model
        .segment_contrast(&ParamVector(x.to_vec()), s, s.full(), Order::Hessian)
        .unwrap();
    let mut fd_grad = vec![0.0; d];
    let mut hess_err: f64 = 0.0;
    for i in 0..d {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        fd_grad[i] = (value(model, s, &xp) - value(model, s, &xm)) / (2.0 * h);
        let gp = gradient(model, s, &xp);
        let gm = gradient(model, s, &xm);
        let col: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let analytic: Vec<f64> = (0..d).map(|j| full.hessian[(j, i)]).collect();
        hess_err = hess_err.max(rel_err(&analytic, &col));
    }
    (rel_err(full.gradient.as_slice(), &fd_grad), hess_err)
}

#[test]
fn gaussian_var1_derivatives_match_finite_differences() {
    let model = wald_cpd::ModelSpec::var1(2).build().unwrap();
    let s = var1_series(&AC_LEVEL, 300, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..POINTS {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-0.45..0.45)).collect();
        let (g, h) = check(model.as_ref(), &s, &x);
        assert!(g <= 1e-5, "gradient rel err {g:e} at {x:?}");
        assert!(h <= 1e-4, "hessian rel err {h:e} at {x:?}");
    }
}

#[test]
fn poisson_ingarch1_derivatives_match_finite_differences() {
    let spec = poisson_spec(2);
    let model = spec.build().unwrap();
    let s = counts_series(spec, &MOD_THETA, 300, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..POINTS {
        let mut x: Vec<f64> = (0..2).map(|_| rng.random_range(0.3..2.0)).collect();
        x.extend((0..4).map(|_| rng.random_range(0.0..0.45)));
        let (g, h) = check(model.as_ref(), &s, &x);
        assert!(g <= 1e-5, "gradient rel err {g:e} at {x:?}");
        assert!(h <= 1e-4, "hessian rel err {h:e} at {x:?}");
    }
}
