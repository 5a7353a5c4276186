//! Monte-Carlo quantiles of `sup_{0<=tau<=1} ||W_d(tau)||^2` for a
//! d-dimensional Brownian bridge, with a JSON cache on disk.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_REPS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_501;
/// Below this many replications a table is flagged as not table-grade.
pub const TABLE_GRADE_REPS: usize = 10_000;

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "WALD_CPD_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub d: usize,
    /// Ascending levels; `values[i]` is the `(1 - alphas[i])`-quantile.
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub grid: usize,
    pub reps: usize,
    pub seed: u64,
}

impl CriticalValueTable {
    pub fn value_at(&self, alpha: f64) -> Result<f64> {
        self.alphas
            .iter()
            .position(|a| (a - alpha).abs() < 1e-12)
            .map(|i| self.values[i])
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "level {alpha} not tabulated for d = {} (have {:?})",
                    self.d, self.alphas
                ))
            })
    }

    /// Single-entry table, for a threshold obtained elsewhere.
    pub fn fixed(d: usize, alpha: f64, value: f64) -> Self {
        Self {
            d,
            alphas: vec![alpha],
            values: vec![value],
            grid: 0,
            reps: 0,
            seed: 0,
        }
    }

    fn same_run(&self, grid: usize, reps: usize, seed: u64) -> bool {
        self.grid == grid && self.reps == reps && self.seed == seed
    }

    fn subset(&self, alphas: &[f64]) -> Result<Self> {
        let values = alphas
            .iter()
            .map(|&a| self.value_at(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            alphas: alphas.to_vec(),
            values,
            ..self.clone()
        })
    }
}

/// One draw of `max_j sum_c W_c(j / grid)^2`, where each coordinate is
/// `B(tau) - tau B(1)` for a random walk `B` with `Normal(0, 1/grid)` steps.
pub fn simulate_sup_bridge<R: Rng + ?Sized>(d: usize, grid: usize, rng: &mut R) -> f64 {
    assert!(grid >= 2, "grid must be >= 2");
    let mut walks = vec![0.0f64; d * grid];
    for c in 0..d {
        let w = &mut walks[c * grid..(c + 1) * grid];
        let mut acc = 0.0;
        for v in w.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            acc += z;
            *v = acc;
        }
    }
    let inv_grid = 1.0 / grid as f64;
    let mut best = 0.0f64;
    // j = grid is the right endpoint, where the bridge is exactly zero
    for j in 0..grid - 1 {
        let tau = (j + 1) as f64 * inv_grid;
        let mut s = 0.0;
        for c in 0..d {
            let w = &walks[c * grid..(c + 1) * grid];
            let b = w[j] - tau * w[grid - 1];
            s += b * b;
        }
        best = best.max(s);
    }
    best * inv_grid
}

/// Sorted draws; draw `i` uses stream `i` under `seed`.
pub fn sup_bridge_draws(d: usize, grid: usize, reps: usize, seed: u64) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|i| simulate_sup_bridge(d, grid, &mut stream_rng(seed, i)))
        .collect();
    draws.sort_by(f64::total_cmp);
    draws
}

/// Empirical `(1 - alpha)`-quantile: order statistic `ceil((1 - alpha) reps)`.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let reps = sorted.len();
    let idx = ((1.0 - alpha) * reps as f64 - 1e-9).ceil() as usize;
    sorted[idx.clamp(1, reps) - 1]
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 0.5], got {alpha}"
        )));
    }
    Ok(())
}

fn check_run(d: usize, grid: usize, reps: usize) -> Result<()> {
    if d == 0 || grid < 2 || reps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need d >= 1, grid >= 2, reps >= 1 (got d = {d}, grid = {grid}, reps = {reps})"
        )));
    }
    if reps < TABLE_GRADE_REPS {
        log::warn!("reps = {reps} is below {TABLE_GRADE_REPS}; quantiles are not table-grade");
    }
    Ok(())
}

/// Tabulates `c_{d, alpha}` for each level from one set of draws.
pub fn compute_table(
    d: usize,
    alphas: &[f64],
    grid: usize,
    reps: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    check_run(d, grid, reps)?;
    let mut alphas = alphas.to_vec();
    for &a in &alphas {
        check_alpha(a)?;
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let draws = sup_bridge_draws(d, grid, reps, seed);
    let values = alphas
        .iter()
        .map(|&a| empirical_quantile(&draws, a))
        .collect();
    Ok(CriticalValueTable {
        d,
        alphas,
        values,
        grid,
        reps,
        seed,
    })
}

pub fn critical_value(d: usize, alpha: f64, grid: usize, reps: usize, seed: u64) -> Result<f64> {
    compute_table(d, &[alpha], grid, reps, seed)?.value_at(alpha)
}

/// Directory of `cv_d{d}.json` documents, one per dimension.
#[derive(Clone, Debug)]
pub struct CvCache {
    dir: PathBuf,
}

impl CvCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache in `$WALD_CPD_CACHE_DIR`, else `./.wald-cpd-cache`.
    pub fn from_env() -> Self {
        Self::new(
            std::env::var_os(CACHE_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| ".wald-cpd-cache".into()),
        )
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, d: usize) -> PathBuf {
        self.dir.join(format!("cv_d{d}.json"))
    }

    pub fn load(&self, d: usize) -> Result<Option<CriticalValueTable>> {
        let path = self.path(d);
        if !path.exists() {
            return Ok(None);
        }
        let table: CriticalValueTable = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        if table.d != d || table.alphas.len() != table.values.len() {
            return Err(Error::Cache(format!("{} is inconsistent", path.display())));
        }
        Ok(Some(table))
    }

    fn store(&self, table: &CriticalValueTable) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut text = serde_json::to_string_pretty(table)?;
        text.push('\n');
        fs::write(self.path(table.d), text)?;
        Ok(())
    }

    /// Returns the requested levels, computing and storing whatever the cache
    /// does not hold for this exact `(grid, reps, seed)`.
    pub fn get_or_compute(
        &self,
        d: usize,
        alphas: &[f64],
        grid: usize,
        reps: usize,
        seed: u64,
    ) -> Result<CriticalValueTable> {
        let cached = self.load(d)?;
        if let Some(t) = &cached {
            if t.same_run(grid, reps, seed) {
                if let Ok(hit) = t.subset(alphas) {
                    return Ok(hit);
                }
            } else {
                log::warn!(
                    "cache {} holds grid = {}, reps = {}, seed = {}; recomputing for grid = {grid}, reps = {reps}, seed = {seed}",
                    self.path(d).display(),
                    t.grid,
                    t.reps,
                    t.seed
                );
            }
        }
        let mut all: Vec<f64> = alphas.to_vec();
        if let Some(t) = cached.as_ref().filter(|t| t.same_run(grid, reps, seed)) {
            all.extend(&t.alphas);
        }
        let table = compute_table(d, &all, grid, reps, seed)?;
        self.store(&table)?;
        table.subset(alphas)
    }
}
