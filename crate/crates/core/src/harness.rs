//! Monte-Carlo experiments: rejection frequencies and break-location errors
//! over replicated scenarios.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical_values::{CriticalValueTable, DEFAULT_GRID, DEFAULT_REPS, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::models::{ComponentDist, ModelSpec};
use crate::rng::derive_seed;
use crate::series::ParamVector;
use crate::simulate::{simulate, Innovation, ScenarioSpec, DEFAULT_BURN_IN};
use crate::wald::{run_test_with, TestOptions, WeightEstimator};

/// Monte-Carlo settings for the critical values used by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub scenario: ScenarioSpec,
    /// Reference rejection frequency to print alongside ours.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rejection: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub reps: usize,
    pub alpha: f64,
    #[serde(default)]
    pub critical_values: CvSettings,
    #[serde(default)]
    pub weight: WeightEstimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub scenarios: Vec<ScenarioEntry>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.scenarios {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate scenario id '{}'",
                    e.id
                )));
            }
            e.scenario.validate()?;
        }
        Ok(())
    }

    /// Parameter dimensions that need a critical value.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.scenarios.iter().map(|e| e.scenario.d()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Keeps only the listed scenario ids.
    pub fn select(&mut self, ids: &[String]) -> Result<()> {
        if ids.is_empty() {
            return Ok(());
        }
        for id in ids {
            if !self.scenarios.iter().any(|e| &e.id == id) {
                return Err(Error::InvalidArgument(format!(
                    "unknown scenario id '{id}'"
                )));
            }
        }
        self.scenarios.retain(|e| ids.contains(&e.id));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: usize,
    pub seed: u64,
    pub q_max: f64,
    pub t_hat: usize,
    pub reject: bool,
    pub not_converged: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub id: String,
    pub family: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<usize>,
    pub critical_value: f64,
    pub reps: usize,
    /// Replications that produced a decision.
    pub completed: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// `1.96 sqrt(p (1 - p) / completed)`.
    pub half_width: f64,
    /// Mean `|t_hat - t_star|` over rejected runs of a change scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_abs_break_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rejection: Option<f64>,
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub alpha: f64,
    pub weight: WeightEstimator,
    pub seed: u64,
    pub reps: usize,
    pub scenarios: Vec<ScenarioReport>,
}

/// Seed of replication `rep` of scenario `id`.
pub fn replication_seed(config_seed: u64, id: &str, rep: usize) -> u64 {
    derive_seed(config_seed, &format!("{id}/{rep}"))
}

/// Runs every scenario `config.reps` times. Replications are independent of
/// scheduling, so the report is identical for any worker count. Elapsed
/// seconds per scenario are returned separately.
pub fn run_experiment(
    config: &ExperimentConfig,
    cv: &BTreeMap<usize, CriticalValueTable>,
) -> Result<(ExperimentReport, Vec<f64>)> {
    config.validate()?;
    let mut scenarios = Vec::with_capacity(config.scenarios.len());
    let mut timings = Vec::with_capacity(config.scenarios.len());
    for entry in &config.scenarios {
        let started = Instant::now();
        let d = entry.scenario.d();
        let table = cv
            .get(&d)
            .ok_or_else(|| Error::InvalidArgument(format!("no critical values for d = {d}")))?;
        let report = run_scenario(config, entry, table)?;
        log::info!(
            "{}: rejection {:.3} +/- {:.3} ({} reps)",
            report.id,
            report.rejection_rate,
            report.half_width,
            report.completed
        );
        scenarios.push(report);
        timings.push(started.elapsed().as_secs_f64());
    }
    Ok((
        ExperimentReport {
            alpha: config.alpha,
            weight: config.weight,
            seed: config.seed,
            reps: config.reps,
            scenarios,
        },
        timings,
    ))
}

fn run_one(
    entry: &ScenarioEntry,
    table: &CriticalValueTable,
    config: &ExperimentConfig,
    rep: usize,
    seed: u64,
) -> RunRecord {
    let attempt = || -> Result<RunRecord> {
        let sc = entry.scenario.with_seed(seed);
        let series = simulate(&sc)?;
        let model = sc.model.build()?;
        let opts = TestOptions {
            weight: config.weight,
            ..TestOptions::default()
        };
        let scan = run_test_with(model.as_ref(), &series, config.alpha, table, &opts)?;
        Ok(RunRecord {
            rep,
            seed,
            q_max: scan.q_max,
            t_hat: scan.t_hat,
            reject: scan.reject,
            not_converged: scan.not_converged,
            error: None,
        })
    };
    attempt().unwrap_or_else(|e| RunRecord {
        rep,
        seed,
        q_max: f64::NAN,
        t_hat: 0,
        reject: false,
        not_converged: 0,
        error: Some(e.to_string()),
    })
}

pub fn run_scenario(
    config: &ExperimentConfig,
    entry: &ScenarioEntry,
    table: &CriticalValueTable,
) -> Result<ScenarioReport> {
    let critical_value = table.value_at(config.alpha)?;
    let runs: Vec<RunRecord> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(config.seed, &entry.id, rep);
            run_one(entry, table, config, rep, seed)
        })
        .collect();
    Ok(summarize(entry, critical_value, config.reps, runs))
}

fn summarize(
    entry: &ScenarioEntry,
    critical_value: f64,
    reps: usize,
    runs: Vec<RunRecord>,
) -> ScenarioReport {
    let done: Vec<&RunRecord> = runs.iter().filter(|r| r.error.is_none()).collect();
    let completed = done.len();
    let rejections = done.iter().filter(|r| r.reject).count();
    let p = if completed > 0 {
        rejections as f64 / completed as f64
    } else {
        0.0
    };
    let half_width = if completed > 0 {
        1.96 * (p * (1.0 - p) / completed as f64).sqrt()
    } else {
        0.0
    };
    let t_star = entry.scenario.t_star;
    let mean_abs_break_error = t_star.and_then(|ts| {
        let errs: Vec<f64> = done
            .iter()
            .filter(|r| r.reject)
            .map(|r| (r.t_hat as f64 - ts as f64).abs())
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    });
    ScenarioReport {
        id: entry.id.clone(),
        family: entry.scenario.model.family.clone(),
        n: entry.scenario.n,
        t_star,
        critical_value,
        reps,
        completed,
        rejections,
        rejection_rate: p,
        half_width,
        mean_abs_break_error,
        reference_rejection: entry.reference_rejection,
        runs,
    }
}

fn count_model() -> ModelSpec {
    ModelSpec::ingarch1(vec![
        ComponentDist::Poisson,
        ComponentDist::NegBinomial { r: 2.0 },
    ])
}

fn entry(
    id: String,
    model: ModelSpec,
    theta0: &[f64],
    theta1: Option<&[f64]>,
    n: usize,
    reference: f64,
) -> ScenarioEntry {
    ScenarioEntry {
        id,
        scenario: ScenarioSpec {
            model,
            theta0: ParamVector(theta0.to_vec()),
            theta1: theta1.map(|t| ParamVector(t.to_vec())),
            t_star: theta1.map(|_| n / 2),
            n,
            seed: 0,
            innovation: Innovation::default(),
            burn_in: DEFAULT_BURN_IN,
        },
        reference_rejection: Some(reference),
    }
}

/// The eight level/power scenarios of the bivariate VAR(1) and INGARCH(1)
/// study, each at n = 500 and n = 1000, with their published rejection rates.
pub fn table1_config() -> ExperimentConfig {
    type Row = (
        &'static str,
        bool,
        &'static [f64],
        Option<&'static [f64]>,
        [f64; 2],
    );
    let rows: [Row; 8] = [
        (
            "ac-level-1",
            false,
            &[0.6, 0.3, 0.0, 0.4],
            None,
            [0.040, 0.055],
        ),
        (
            "ac-level-2",
            false,
            &[0.5, -0.2, 0.35, 0.1],
            None,
            [0.060, 0.045],
        ),
        (
            "ac-power-1",
            false,
            &[0.6, 0.3, 0.4, 0.4],
            Some(&[0.6, 0.0, 0.0, 0.4]),
            [0.765, 0.965],
        ),
        (
            "ac-power-2",
            false,
            &[0.5, -0.2, 0.35, 0.1],
            Some(&[0.5, -0.2, 0.1, 0.1]),
            [0.680, 0.940],
        ),
        (
            "mod-level-1",
            true,
            &[1.0, 0.3, 0.5, 0.2, 0.1, 0.4],
            None,
            [0.065, 0.055],
        ),
        (
            "mod-level-2",
            true,
            &[0.5, 0.5, 0.25, 0.5, 0.1, 0.35],
            None,
            [0.065, 0.050],
        ),
        (
            "mod-power-1",
            true,
            &[1.0, 0.3, 0.5, 0.2, 0.1, 0.4],
            Some(&[1.0, 0.3, 0.5, 0.0, 0.0, 0.4]),
            [0.840, 0.985],
        ),
        (
            "mod-power-2",
            true,
            &[0.5, 0.5, 0.25, 0.5, 0.1, 0.35],
            Some(&[0.5, 1.0, 0.25, 0.5, 0.1, 0.35]),
            [0.975, 0.995],
        ),
    ];
    let mut scenarios = Vec::new();
    for (name, counts, theta0, theta1, refs) in rows {
        for (n, reference) in [500, 1000].into_iter().zip(refs) {
            let model = if counts {
                count_model()
            } else {
                ModelSpec::var1(2)
            };
            scenarios.push(entry(
                format!("{name}-n{n}"),
                model,
                theta0,
                theta1,
                n,
                reference,
            ));
        }
    }
    ExperimentConfig {
        seed: 2024,
        reps: 200,
        alpha: 0.05,
        critical_values: CvSettings::default(),
        weight: WeightEstimator::Boundary,
        workers: None,
        output: None,
        scenarios,
    }
}
