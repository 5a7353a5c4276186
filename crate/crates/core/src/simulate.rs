//! Data-generating processes with an optional single change point.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ComponentDist, ModelSpec};
use crate::series::{ParamVector, TimeSeries};

pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_DF: f64 = 8.0;

/// Innovation law of the VAR(1) simulator, standardised to unit variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    StudentT { df: f64 },
    Gaussian,
}

impl Default for Innovation {
    fn default() -> Self {
        Innovation::StudentT { df: DEFAULT_DF }
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

/// One simulated trajectory: parameter `theta0` up to `t_star`, then `theta1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub model: ModelSpec,
    pub theta0: ParamVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<ParamVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<usize>,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl ScenarioSpec {
    pub fn d(&self) -> usize {
        match self.model.family.as_str() {
            "ingarch1" => self.model.m + self.model.m * self.model.m,
            _ => self.model.m * self.model.m,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let m = self.model.m;
        if m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        let d = self.d();
        match (&self.theta1, self.t_star) {
            (None, None) => {}
            (Some(_), Some(t)) => {
                if !(1 < t && t < self.n) {
                    return bad(format!(
                        "t_star = {t} must satisfy 1 < t_star < n = {}",
                        self.n
                    ));
                }
            }
            _ => return bad("theta1 and t_star must be given together".into()),
        }
        for theta in std::iter::once(&self.theta0).chain(self.theta1.as_ref()) {
            if theta.len() != d {
                return bad(format!(
                    "parameter vector has {} entries, expected {d}",
                    theta.len()
                ));
            }
            if theta.0.iter().any(|v| !v.is_finite()) {
                return bad("non-finite parameter".into());
            }
        }
        match self.model.family.as_str() {
            "var1" => {
                if let Innovation::StudentT { df } = self.innovation {
                    if !(df >= 5.0) {
                        return bad(format!(
                            "Student-t degrees of freedom must be >= 5, got {df}"
                        ));
                    }
                }
                for theta in std::iter::once(&self.theta0).chain(self.theta1.as_ref()) {
                    let rho = spectral_radius(&theta.0, m);
                    if !(rho < 1.0) {
                        return bad(format!(
                            "VAR(1) matrix is not stable (spectral radius {rho:.4})"
                        ));
                    }
                }
            }
            "ingarch1" => {
                let comps = self.components()?;
                for c in &comps {
                    if let ComponentDist::NegBinomial { r } = c {
                        if !(*r > 0.0) {
                            return bad(format!(
                                "negative binomial size must be positive, got {r}"
                            ));
                        }
                    }
                }
                for theta in std::iter::once(&self.theta0).chain(self.theta1.as_ref()) {
                    if theta.0[..m].iter().any(|&v| !(v > 0.0)) {
                        return bad("intercepts d must be positive".into());
                    }
                    if theta.0[m..].iter().any(|&v| v < 0.0) {
                        return bad("entries of B must be non-negative".into());
                    }
                    let rho = spectral_radius(&theta.0[m..], m);
                    if !(rho < 1.0) {
                        return bad(format!(
                            "INGARCH(1) matrix is not contracting (spectral radius {rho:.4})"
                        ));
                    }
                }
            }
            other => return bad(format!("no simulator for family '{other}'")),
        }
        Ok(())
    }

    fn components(&self) -> Result<Vec<ComponentDist>> {
        let comps = self
            .model
            .components
            .clone()
            .unwrap_or_else(|| vec![ComponentDist::Poisson; self.model.m]);
        if comps.len() != self.model.m {
            return Err(Error::InvalidScenario(format!(
                "{} component tags for m = {}",
                comps.len(),
                self.model.m
            )));
        }
        Ok(comps)
    }

    fn theta_at(&self, t: usize) -> &ParamVector {
        match (&self.theta1, self.t_star) {
            (Some(theta1), Some(ts)) if t > ts => theta1,
            _ => &self.theta0,
        }
    }
}

/// Spectral radius of a row-major m x m matrix.
pub fn spectral_radius(a: &[f64], m: usize) -> f64 {
    DMatrix::from_row_slice(m, m, a)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Simulates the scenario with the family's generator.
pub fn simulate(sc: &ScenarioSpec) -> Result<TimeSeries> {
    match sc.model.family.as_str() {
        "var1" => simulate_var1(sc),
        "ingarch1" => simulate_ingarch1(sc),
        other => Err(Error::InvalidScenario(format!(
            "no simulator for family '{other}'"
        ))),
    }
}

/// `Y_t = A Y_{t-1} + xi_t` from `Y = 0`, discarding `burn_in` steps, with
/// independent unit-variance innovation components.
pub fn simulate_var1(sc: &ScenarioSpec) -> Result<TimeSeries> {
    if sc.model.family != "var1" {
        return Err(Error::InvalidScenario("not a var1 scenario".into()));
    }
    sc.validate()?;
    let m = sc.model.m;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let student = match sc.innovation {
        Innovation::StudentT { df } => Some((
            StudentT::new(df).map_err(|e| Error::InvalidScenario(e.to_string()))?,
            ((df - 2.0) / df).sqrt(),
        )),
        Innovation::Gaussian => None,
    };
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        match &student {
            Some((dist, scale)) => dist.sample(rng) * scale,
            None => rng.sample(StandardNormal),
        }
    };
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    let mut data = Vec::with_capacity(sc.n * m);
    for step in 1..=sc.burn_in + sc.n {
        let t = step.saturating_sub(sc.burn_in);
        let a = &sc.theta_at(t).0;
        for i in 0..m {
            let mean: f64 = (0..m).map(|k| a[i * m + k] * prev[k]).sum();
            cur[i] = mean + draw(&mut rng);
        }
        std::mem::swap(&mut prev, &mut cur);
        if t >= 1 {
            data.extend_from_slice(&prev);
        }
    }
    TimeSeries::new(data, m, false)
}

fn draw_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda)
        .expect("positive finite rate")
        .sample(rng)
}

/// `lambda_t = d + B Y_{t-1}` from `Y = 0`; components drawn conditionally
/// independently as Poisson or negative binomial with mean `lambda_t`.
pub fn simulate_ingarch1(sc: &ScenarioSpec) -> Result<TimeSeries> {
    if sc.model.family != "ingarch1" {
        return Err(Error::InvalidScenario("not an ingarch1 scenario".into()));
    }
    sc.validate()?;
    let m = sc.model.m;
    let comps = sc.components()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    let mut data = Vec::with_capacity(sc.n * m);
    for step in 1..=sc.burn_in + sc.n {
        let t = step.saturating_sub(sc.burn_in);
        let theta = &sc.theta_at(t).0;
        for i in 0..m {
            let row = &theta[m + i * m..m + (i + 1) * m];
            let lambda = theta[i] + row.iter().zip(&prev).map(|(b, y)| b * y).sum::<f64>();
            cur[i] = match comps[i] {
                ComponentDist::Poisson => draw_poisson(lambda, &mut rng),
                ComponentDist::NegBinomial { r } => {
                    // Gamma(r, scale lambda / r) mixing gives NB(r, r / (r + lambda))
                    let g = Gamma::new(r, lambda / r)
                        .map_err(|e| Error::InvalidScenario(e.to_string()))?
                        .sample(&mut rng);
                    draw_poisson(g, &mut rng)
                }
            };
        }
        std::mem::swap(&mut prev, &mut cur);
        if t >= 1 {
            data.extend_from_slice(&prev);
        }
    }
    TimeSeries::new(data, m, true)
}
