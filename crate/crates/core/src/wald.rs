//! Wald-type statistic: gradient/Hessian averages, the sandwich weight matrix,
//! the per-split statistic and the decision.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contrast::Order;
use crate::critical_values::CriticalValueTable;
use crate::error::{Error, Result};
use crate::mce::{cold_fit, scan_fits, FitOptions, ScanFits, SegmentFit};
use crate::models::ContrastModel;
use crate::series::{ParamVector, Segment, TimeSeries};

/// Starting ridge, relative to `trace(G) / d`.
pub const RIDGE_START: f64 = 1e-8;
/// Largest ridge tried before giving up, relative to `trace(G) / d`.
pub const RIDGE_MAX: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrices {
    pub g_hat: DMatrix<f64>,
    pub f_hat: DMatrix<f64>,
    pub segment: Segment,
}

/// `G(T) = |T|^{-1} sum_t g_t g_t^T` with `g_t` the contrast gradient at the fit.
pub fn estimate_g(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    fit: &SegmentFit,
) -> Result<DMatrix<f64>> {
    let d = model.n_params();
    let seg = fit.segment;
    let mut g = DMatrix::zeros(d, d);
    for t in seg.lo..=seg.hi {
        let e = model.term(&fit.theta_hat, series, t, Order::Gradient)?;
        g.ger(1.0, &e.gradient, &e.gradient, 1.0);
    }
    Ok(g / seg.len() as f64)
}

/// `F(T) = |T|^{-1} sum_t` Hessian of the contrast term at the fit.
pub fn estimate_f(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    fit: &SegmentFit,
) -> Result<DMatrix<f64>> {
    let e = model.segment_contrast(&fit.theta_hat, series, fit.segment, Order::Hessian)?;
    let mut f = e.hessian / fit.segment.len() as f64;
    symmetrize(&mut f);
    Ok(f)
}

pub fn cov_matrices(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    fit: &SegmentFit,
) -> Result<CovMatrices> {
    Ok(CovMatrices {
        g_hat: estimate_g(model, series, fit)?,
        f_hat: estimate_f(model, series, fit)?,
        segment: fit.segment,
    })
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}

/// Inverse of a symmetric PSD matrix after adding `eps I`, with `eps` starting
/// at `1e-8 trace/d` and growing tenfold until the Cholesky factorisation
/// succeeds. Returns the inverse and the ridge used.
pub fn ridge_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let d = a.nrows();
    let trace = a.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::IrrecoverablySingular { epsilon: 0.0 });
    }
    let scale = trace / d as f64;
    let mut rel = RIDGE_START;
    loop {
        let eps = rel * scale;
        let reg = a + DMatrix::identity(d, d) * eps;
        if let Some(chol) = reg.cholesky() {
            let mut inv = chol.inverse();
            symmetrize(&mut inv);
            return Ok((inv, eps));
        }
        rel *= 10.0;
        if rel > RIDGE_MAX * (1.0 + 1e-9) {
            return Err(Error::IrrecoverablySingular {
                epsilon: RIDGE_MAX * scale,
            });
        }
    }
}

/// `F G^{-1} F` for one segment, with the ridge used on `G`.
pub fn sandwich_inverse(cov: &CovMatrices) -> Result<(DMatrix<f64>, f64)> {
    let (g_inv, eps) = ridge_inverse(&cov.g_hat)?;
    let mut w = &cov.f_hat * g_inv * &cov.f_hat;
    symmetrize(&mut w);
    Ok((w, eps))
}

/// Sandwich covariance `F^{-1} G F^{-1}` of the estimator (per observation).
pub fn sandwich_covariance(cov: &CovMatrices) -> Result<DMatrix<f64>> {
    let (f_inv, _) = ridge_inverse(&cov.f_hat)?;
    let mut s = &f_inv * &cov.g_hat * &f_inv;
    symmetrize(&mut s);
    Ok(s)
}

/// Weight matrix and the larger of the two ridges applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Omega {
    pub matrix: DMatrix<f64>,
    pub ridge_epsilon: f64,
}

/// Average of the sandwich inverses on `T_{1,u_n}` and `T_{u_n+1,n}`.
pub fn omega_hat(model: &dyn ContrastModel, series: &TimeSeries, fits: &ScanFits) -> Result<Omega> {
    let (w1, e1) = sandwich_inverse(&cov_matrices(model, series, &fits.head)?)?;
    let (w2, e2) = sandwich_inverse(&cov_matrices(model, series, &fits.tail)?)?;
    Ok(Omega {
        matrix: (w1 + w2) * 0.5,
        ridge_epsilon: e1.max(e2),
    })
}

/// Which sandwich estimate weights the statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightEstimator {
    /// Average of the estimates on `T_{1,u_n}` and `T_{u_n+1,n}`.
    #[default]
    Boundary,
    /// `F G^{-1} F` on the whole sample `T_{1,n}`. Not part of the boundary
    /// construction; offered as a diagnostic for short head segments.
    FullSample,
}

/// `F G^{-1} F` estimated on the full sample.
pub fn omega_full_sample(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    opts: &FitOptions,
) -> Result<Omega> {
    let fit = cold_fit(model, series, series.full(), opts)?;
    let (w, eps) = sandwich_inverse(&cov_matrices(model, series, &fit)?)?;
    Ok(Omega {
        matrix: w,
        ridge_epsilon: eps,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TestOptions {
    pub fit: FitOptions,
    pub weight: WeightEstimator,
}

/// `(k (n - k))^2 / n^3 * (theta_l - theta_r)^T Omega (theta_l - theta_r)`.
pub fn q_statistic(
    k: usize,
    n: usize,
    theta_left: &ParamVector,
    theta_right: &ParamVector,
    omega: &DMatrix<f64>,
) -> f64 {
    let d = theta_left.len();
    let delta: Vec<f64> = theta_left
        .0
        .iter()
        .zip(&theta_right.0)
        .map(|(a, b)| a - b)
        .collect();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += delta[i] * omega[(i, j)] * delta[j];
        }
    }
    let (k, n) = (k as f64, n as f64);
    let w = k * (n - k);
    w * w / (n * n * n) * quad
}

/// Outcome of the test on one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaldScan {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub family: String,
    pub alpha: f64,
    pub u_n: usize,
    pub v_n: usize,
    pub q_max: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub t_hat: usize,
    pub ridge_epsilon: f64,
    pub q_values: Vec<(usize, f64)>,
    pub theta_left_at_t_hat: ParamVector,
    pub theta_right_at_t_hat: ParamVector,
    #[serde(skip)]
    pub omega: Vec<f64>,
    #[serde(skip)]
    pub not_converged: usize,
}

impl WaldScan {
    pub fn omega_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.omega)
    }

    /// `k,q` lines for plotting the statistic against the split point.
    pub fn write_qk_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,q")?;
        for (k, q) in &self.q_values {
            writeln!(w, "{k},{q:?}")?;
        }
        Ok(())
    }
}

/// Statistic over every split of an already fitted scan.
pub fn assemble(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    fits: &ScanFits,
    alpha: f64,
    critical_value: f64,
    opts: &TestOptions,
) -> Result<WaldScan> {
    let omega = match opts.weight {
        WeightEstimator::Boundary => omega_hat(model, series, fits)?,
        WeightEstimator::FullSample => omega_full_sample(model, series, &opts.fit)?,
    };
    let n = series.n();
    let q_values: Vec<(usize, f64)> = fits
        .ks()
        .map(|k| {
            let (l, r) = fits.at(k);
            (
                k,
                q_statistic(k, n, &l.theta_hat, &r.theta_hat, &omega.matrix),
            )
        })
        .collect();
    // smallest argmax
    let (t_hat, q_max) = q_values
        .iter()
        .fold((0, f64::NEG_INFINITY), |best, &(k, q)| {
            if q > best.1 {
                (k, q)
            } else {
                best
            }
        });
    let (l, r) = fits.at(t_hat);
    Ok(WaldScan {
        n,
        m: series.m(),
        d: model.n_params(),
        family: model.family().to_owned(),
        alpha,
        u_n: fits.tuning.u_n,
        v_n: fits.tuning.v_n,
        q_max,
        critical_value,
        reject: q_max > critical_value,
        t_hat,
        ridge_epsilon: omega.ridge_epsilon,
        q_values,
        theta_left_at_t_hat: l.theta_hat.clone(),
        theta_right_at_t_hat: r.theta_hat.clone(),
        omega: omega.matrix.transpose().as_slice().to_vec(),
        not_converged: fits.not_converged,
    })
}

/// Fits, scans and decides at level `alpha` using `cv` for the threshold.
pub fn run_test(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    alpha: f64,
    cv: &CriticalValueTable,
) -> Result<WaldScan> {
    run_test_with(model, series, alpha, cv, &TestOptions::default())
}

pub fn run_test_with(
    model: &dyn ContrastModel,
    series: &TimeSeries,
    alpha: f64,
    cv: &CriticalValueTable,
    opts: &TestOptions,
) -> Result<WaldScan> {
    if cv.d != model.n_params() {
        return Err(Error::DimensionMismatch {
            what: "critical value table dimension",
            expected: model.n_params(),
            got: cv.d,
        });
    }
    let c = cv.value_at(alpha)?;
    let fits = scan_fits(model, series, &opts.fit)?;
    assemble(model, series, &fits, alpha, c, opts)
}
