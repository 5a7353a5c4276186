//! Minimum-contrast estimation on segments and the warm-started scan over
//! every candidate split point.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastEval, Order};
use crate::error::{Error, Result};
use crate::models::{project_stable, stability_penalty, ContrastModel};
use crate::optim::{minimize_box, BoxProblem, OptimOptions};
use crate::series::{tuning_sequences, ParamVector, Segment, TimeSeries, Tuning};

/// Random restarts tried when a cold fit fails to converge.
pub const MULTI_STARTS: usize = 3;
/// Largest tolerated share of non-converged fits in a scan.
pub const MAX_DIVERGED_SHARE: f64 = 0.10;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Coordinates held at their initial value.
    pub frozen: Option<Vec<bool>>,
}

/// Result of minimising the (penalised) segment contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub theta_hat: ParamVector,
    /// Segment contrast plus stability penalty at `theta_hat`.
    pub contrast: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub segment: Segment,
}

/// Penalised objective used by the optimiser.
pub fn objective(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    seg: Segment,
    theta: &[f64],
    order: Order,
) -> Result<ContrastEval> {
    let mut e = model.segment_contrast(&ParamVector(theta.to_vec()), series, seg, order)?;
    e.add_assign(&stability_penalty(model, theta, order));
    Ok(e)
}

fn check_fit_inputs(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    seg: Segment,
    init: &ParamVector,
) -> Result<()> {
    model.check_series(series)?;
    model.check_theta(init)?;
    series.check_segment(seg)?;
    let min = model.n_params() + 1;
    if seg.len() < min {
        return Err(Error::SegmentTooShort {
            segment: seg,
            len: seg.len(),
            min,
        });
    }
    Ok(())
}

/// Local minimiser of the segment contrast over the parameter box, starting at
/// `init`. A fit that misses the gradient tolerance is returned with
/// `converged == false`.
pub fn fit_segment(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    seg: Segment,
    init: &ParamVector,
    opts: &FitOptions,
) -> Result<SegmentFit> {
    check_fit_inputs(model, series, seg, init)?;
    let space = model.param_space();
    let mut start = space.project(init);
    if opts.frozen.is_none() {
        project_stable(model, &mut start);
    }
    let problem = BoxProblem {
        lower: space.lower(),
        upper: space.upper(),
        frozen: opts.frozen.as_deref(),
    };
    let res = minimize_box(
        |x, order| objective(model, series, seg, x, order),
        &problem,
        &start.0,
        &opts.optim,
    )?;
    let mut theta_hat = ParamVector(res.x);
    let mut contrast = res.f;
    if !model.stability_check(&theta_hat) && opts.frozen.is_none() {
        project_stable(model, &mut theta_hat);
        contrast = objective(model, series, seg, &theta_hat.0, Order::Value)?.value;
    }
    debug_assert!(space.contains(&theta_hat));
    Ok(SegmentFit {
        theta_hat,
        contrast,
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        segment: seg,
    })
}

fn better(a: SegmentFit, b: SegmentFit) -> SegmentFit {
    match (a.converged, b.converged) {
        (true, false) => a,
        (false, true) => b,
        _ if b.contrast < a.contrast => b,
        _ => a,
    }
}

fn random_start(model: &dyn ContrastModel, rng: &mut ChaCha8Rng) -> ParamVector {
    let space = model.param_space();
    let mut theta = ParamVector(
        space
            .lower()
            .iter()
            .zip(space.upper())
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect(),
    );
    project_stable(model, &mut theta);
    theta
}

/// Fit from the family's deterministic start, with random restarts if that
/// does not converge. Restarts are seeded by the segment bounds.
pub fn cold_fit(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    seg: Segment,
    opts: &FitOptions,
) -> Result<SegmentFit> {
    let init = model.initial_guess(series, seg)?;
    let mut best = fit_segment(model, series, seg, &init, opts)?;
    if best.converged {
        return Ok(best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(((seg.lo as u64) << 32) ^ seg.hi as u64);
    for _ in 0..MULTI_STARTS {
        let start = random_start(model, &mut rng);
        let fit = fit_segment(model, series, seg, &start, opts)?;
        best = better(best, fit);
        if best.converged {
            break;
        }
    }
    Ok(best)
}

/// Fit warm-started from a neighbouring solution, falling back to a cold fit.
pub fn warm_fit(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    seg: Segment,
    prev: &ParamVector,
    opts: &FitOptions,
) -> Result<SegmentFit> {
    let fit = fit_segment(model, series, seg, prev, opts)?;
    if fit.converged {
        return Ok(fit);
    }
    Ok(better(fit, cold_fit(model, series, seg, opts)?))
}

/// Unconstrained least-squares estimate of `A` in `Y_t = A Y_{t-1} + e_t` over
/// `seg`, with `Y_0 = 0`. A numerically singular design is ridge-regularised.
pub fn ols_unprojected(series: &TimeSeries, seg: Segment) -> Result<ParamVector> {
    series.check_segment(seg)?;
    let m = series.m();
    if seg.len() < m + 1 {
        return Err(Error::SingularDesign(seg));
    }
    let mut sxx = DMatrix::<f64>::zeros(m, m);
    let mut syx = DMatrix::<f64>::zeros(m, m);
    for t in seg.lo..=seg.hi {
        let Some(x) = series.lagged(t) else { continue };
        let y = series.row(t);
        for i in 0..m {
            for j in 0..m {
                sxx[(i, j)] += x[i] * x[j];
                syx[(i, j)] += y[i] * x[j];
            }
        }
    }
    let trace = sxx.trace();
    let solve = |mat: DMatrix<f64>| -> Option<DMatrix<f64>> {
        let chol = mat.cholesky()?;
        // A = Syx Sxx^{-1}  <=>  Sxx A^T = Syx^T
        Some(chol.solve(&syx.transpose()).transpose())
    };
    let well_conditioned = {
        let eig = sxx.clone().symmetric_eigenvalues();
        eig.min() > 1e-12 * trace.max(f64::MIN_POSITIVE)
    };
    let a = if well_conditioned {
        solve(sxx.clone())
    } else {
        None
    };
    let a = match a {
        Some(a) => a,
        None => {
            if !(trace > 0.0) {
                return Err(Error::SingularDesign(seg));
            }
            let ridge = &sxx + DMatrix::identity(m, m) * (1e-8 * trace);
            solve(ridge).ok_or(Error::SingularDesign(seg))?
        }
    };
    Ok(ParamVector(a.transpose().as_slice().to_vec()))
}

/// Closed-form minimiser of the identity-covariance Gaussian contrast for
/// VAR(1), projected onto the parameter box and the stability set.
pub fn ols_fast_path(series: &TimeSeries, seg: Segment) -> Result<ParamVector> {
    let raw = ols_unprojected(series, seg)?;
    let model = crate::models::Var1Gaussian::identity(series.m());
    let mut theta = model.param_space().project(&raw);
    project_stable(&model, &mut theta);
    Ok(theta)
}

/// All fits needed by the test: `theta(T_{1,k})` and `theta(T_{k+1,n})` for
/// `k` in `[v_n, n - v_n]`, plus the two boundary fits that feed the weight
/// matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFits {
    pub n: usize,
    pub tuning: Tuning,
    /// `k_first = v_n`; `left[i]` and `right[i]` belong to `k = k_first + i`.
    pub k_first: usize,
    pub left: Vec<SegmentFit>,
    pub right: Vec<SegmentFit>,
    /// Fit on `T_{1,u_n}`.
    pub head: SegmentFit,
    /// Fit on `T_{u_n+1,n}`.
    pub tail: SegmentFit,
    pub not_converged: usize,
}

impl ScanFits {
    pub fn ks(&self) -> impl Iterator<Item = usize> + '_ {
        self.k_first..self.k_first + self.left.len()
    }

    pub fn at(&self, k: usize) -> (&SegmentFit, &SegmentFit) {
        let i = k - self.k_first;
        (&self.left[i], &self.right[i])
    }
}

fn left_scan(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    lo_k: usize,
    hi_k: usize,
    opts: &FitOptions,
) -> Result<Vec<SegmentFit>> {
    let mut fits: Vec<SegmentFit> = Vec::with_capacity(hi_k - lo_k + 1);
    for k in lo_k..=hi_k {
        let seg = Segment { lo: 1, hi: k };
        let fit = match fits.last() {
            None => cold_fit(model, series, seg, opts)?,
            Some(prev) => warm_fit(model, series, seg, &prev.theta_hat, opts)?,
        };
        fits.push(fit);
    }
    Ok(fits)
}

fn right_scan(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    lo_k: usize,
    hi_k: usize,
    opts: &FitOptions,
) -> Result<Vec<SegmentFit>> {
    let n = series.n();
    let mut fits: Vec<SegmentFit> = Vec::with_capacity(hi_k - lo_k + 1);
    for k in (lo_k..=hi_k).rev() {
        let seg = Segment { lo: k + 1, hi: n };
        let fit = match fits.last() {
            None => cold_fit(model, series, seg, opts)?,
            Some(prev) => warm_fit(model, series, seg, &prev.theta_hat, opts)?,
        };
        fits.push(fit);
    }
    fits.reverse();
    Ok(fits)
}

/// Left fits ascend in `k` and right fits descend, each warm-started from its
/// neighbour. The two sweeps run concurrently.
pub fn scan_fits(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    opts: &FitOptions,
) -> Result<ScanFits> {
    model.check_series(series)?;
    let n = series.n();
    let tuning = tuning_sequences(n, model.n_params())?;
    let (lo_k, hi_k) = (tuning.v_n, n - tuning.v_n);
    let ((left, right), (head, tail)) = rayon::join(
        || {
            rayon::join(
                || left_scan(model, series, lo_k, hi_k, opts),
                || right_scan(model, series, lo_k, hi_k, opts),
            )
        },
        || {
            rayon::join(
                || {
                    cold_fit(
                        model,
                        series,
                        Segment {
                            lo: 1,
                            hi: tuning.u_n,
                        },
                        opts,
                    )
                },
                || {
                    cold_fit(
                        model,
                        series,
                        Segment {
                            lo: tuning.u_n + 1,
                            hi: n,
                        },
                        opts,
                    )
                },
            )
        },
    );
    let (left, right, head, tail) = (left?, right?, head?, tail?);
    let total = left.len() + right.len() + 2;
    let not_converged = left
        .iter()
        .chain(&right)
        .chain([&head, &tail])
        .filter(|f| !f.converged)
        .count();
    if not_converged as f64 > MAX_DIVERGED_SHARE * total as f64 {
        return Err(Error::ScanDiverged {
            failed: not_converged,
            total,
        });
    }
    if not_converged > 0 {
        log::debug!("{not_converged} of {total} fits missed the gradient tolerance");
    }
    Ok(ScanFits {
        n,
        tuning,
        k_first: lo_k,
        left,
        right,
        head,
        tail,
        not_converged,
    })
}
