#![allow(dead_code)]

use wald_cpd::models::ComponentDist;
use wald_cpd::{simulate, Innovation, ModelSpec, ParamVector, ScenarioSpec, TimeSeries};

pub const AC_LEVEL: [f64; 4] = [0.6, 0.3, 0.0, 0.4];
pub const MOD_THETA: [f64; 6] = [1.0, 0.3, 0.5, 0.2, 0.1, 0.4];

pub fn scenario(
    model: ModelSpec,
    theta0: &[f64],
    theta1: Option<&[f64]>,
    n: usize,
    seed: u64,
) -> ScenarioSpec {
    ScenarioSpec {
        model,
        theta0: ParamVector(theta0.to_vec()),
        theta1: theta1.map(|t| ParamVector(t.to_vec())),
        t_star: theta1.map(|_| n / 2),
        n,
        seed,
        innovation: Innovation::default(),
        burn_in: 500,
    }
}

pub fn var1_series(a: &[f64], n: usize, seed: u64) -> TimeSeries {
    simulate(&scenario(ModelSpec::var1(2), a, None, n, seed)).unwrap()
}

pub fn poisson_spec(m: usize) -> ModelSpec {
    ModelSpec::ingarch1(vec![ComponentDist::Poisson; m])
}

pub fn counts_series(spec: ModelSpec, theta: &[f64], n: usize, seed: u64) -> TimeSeries {
    simulate(&scenario(spec, theta, None, n, seed)).unwrap()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
