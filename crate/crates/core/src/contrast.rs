//! Contrast terms and their segment sums.
//!
//! Two quasi-likelihood contrasts are provided: the Gaussian one
//! `(y - f)^T H^{-1} (y - f) + log det H` and the Poisson one
//! `sum_i (lambda_i - y_i log lambda_i)`. The Gaussian contrast is used without
//! the conventional factor 1/2; the test statistic does not depend on a
//! positive rescaling of the contrast.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::models::{CondMeanEval, ContrastModel, INTENSITY_FLOOR};
use crate::series::{ParamVector, Segment, TimeSeries};

/// Lower bound on `det H` for the Gaussian contrast.
pub const MIN_COV_DET: f64 = 1e-8;

/// Which derivatives to populate. Higher orders include lower ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl ContrastEval {
    pub fn zeros(d: usize) -> Self {
        Self {
            value: 0.0,
            gradient: DVector::zeros(d),
            hessian: DMatrix::zeros(d, d),
        }
    }

    pub fn add_assign(&mut self, other: &ContrastEval) {
        self.value += other.value;
        self.gradient += &other.gradient;
        self.hessian += &other.hessian;
    }

    pub fn scale(&mut self, c: f64) {
        self.value *= c;
        self.gradient *= c;
        self.hessian *= c;
    }
}

/// Constant conditional covariance, factored once.
#[derive(Clone, Debug)]
pub struct GaussianCov {
    precision: DMatrix<f64>,
    log_det: f64,
    identity: bool,
}

impl GaussianCov {
    pub fn identity(m: usize) -> Self {
        Self {
            precision: DMatrix::identity(m, m),
            log_det: 0.0,
            identity: true,
        }
    }

    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        let m = h.nrows();
        if h.ncols() != m {
            return Err(Error::DimensionMismatch {
                what: "covariance columns",
                expected: m,
                got: h.ncols(),
            });
        }
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + h.abs().max()) {
            return Err(Error::InvalidModel(
                "covariance matrix is not symmetric".into(),
            ));
        }
        let chol: Cholesky<f64, Dyn> =
            Cholesky::new(h.clone()).ok_or(Error::SingularCovariance {
                det: h.determinant(),
            })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|x| x.ln())
                .sum::<f64>();
        if log_det < MIN_COV_DET.ln() {
            return Err(Error::SingularCovariance { det: log_det.exp() });
        }
        let identity = h == DMatrix::identity(m, m);
        Ok(Self {
            precision: chol.inverse(),
            log_det,
            identity,
        })
    }

    pub fn m(&self) -> usize {
        self.precision.nrows()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

/// Gaussian quasi-likelihood term `e^T H^{-1} e + log det H`, `e = y - f`.
pub fn gaussian_term(
    mean: &CondMeanEval,
    cov: &GaussianCov,
    y: &[f64],
    order: Order,
) -> ContrastEval {
    let m = cov.m();
    let d = mean.jacobian.ncols();
    let resid = DVector::from_column_slice(y) - &mean.value;
    let pe = cov.precision() * &resid;
    let mut out = ContrastEval::zeros(d);
    out.value = resid.dot(&pe) + cov.log_det();
    if order >= Order::Gradient {
        out.gradient = mean.jacobian.tr_mul(&pe) * -2.0;
    }
    if order >= Order::Hessian {
        let pj = cov.precision() * &mean.jacobian;
        out.hessian = mean.jacobian.tr_mul(&pj) * 2.0;
        for i in 0..m {
            if pe[i] != 0.0 {
                out.hessian -= &mean.hessians[i] * (2.0 * pe[i]);
            }
        }
    }
    out
}

/// Negative Poisson quasi-log-likelihood term `sum_i (lambda_i - y_i log lambda_i)`.
pub fn poisson_term(mean: &CondMeanEval, y: &[f64], order: Order) -> Result<ContrastEval> {
    let d = mean.jacobian.ncols();
    let mut out = ContrastEval::zeros(d);
    for (i, (&lambda, &yi)) in mean.value.iter().zip(y).enumerate() {
        if !(lambda >= INTENSITY_FLOOR) {
            return Err(Error::IntensityBelowFloor {
                component: i,
                value: lambda,
                floor: INTENSITY_FLOOR,
            });
        }
        out.value += lambda - yi * lambda.ln();
        if order >= Order::Gradient {
            let ji = mean.jacobian.row(i);
            let c = 1.0 - yi / lambda;
            out.gradient += ji.transpose() * c;
            if order >= Order::Hessian {
                out.hessian += ji.transpose() * ji * (yi / (lambda * lambda));
                if c != 0.0 {
                    out.hessian += &mean.hessians[i] * c;
                }
            }
        }
    }
    Ok(out)
}

/// `C(T, theta) = sum_{t in T} phi_t(theta)`.
pub fn segment_contrast(
    model: &dyn ContrastModel,
    theta: &ParamVector,
    series: &TimeSeries,
    seg: Segment,
    order: Order,
) -> Result<ContrastEval> {
    model.check_theta(theta)?;
    model.check_series(series)?;
    model.segment_contrast(theta, series, seg, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_eval(value: &[f64], d: usize) -> CondMeanEval {
        let m = value.len();
        CondMeanEval {
            value: DVector::from_column_slice(value),
            jacobian: DMatrix::zeros(m, d),
            hessians: vec![DMatrix::zeros(d, d); m],
        }
    }

    #[test]
    fn gaussian_known_values() {
        let cov = GaussianCov::identity(2);
        let f = mean_eval(&[0.0, 0.0], 4);
        assert_eq!(
            gaussian_term(&f, &cov, &[1.0, 2.0], Order::Value).value,
            5.0
        );
        let f = mean_eval(&[0.7, -0.3], 4);
        assert_eq!(
            gaussian_term(&f, &cov, &[0.7, -0.3], Order::Value).value,
            0.0
        );

        let cov2 = GaussianCov::new(DMatrix::from_diagonal_element(2, 2, 2.0)).unwrap();
        let f = mean_eval(&[0.0, 0.0], 4);
        let v = gaussian_term(&f, &cov2, &[1.0, 1.0], Order::Value).value;
        assert!((v - 2.386294361119891).abs() < 1e-12);
    }

    #[test]
    fn gaussian_identity_is_squared_norm() {
        let cov = GaussianCov::identity(3);
        let f = mean_eval(&[0.25, -1.5, 3.0], 9);
        let y = [1.0, 2.0, -0.5];
        let expect: f64 = y
            .iter()
            .zip(f.value.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert_eq!(gaussian_term(&f, &cov, &y, Order::Value).value, expect);
    }

    #[test]
    fn singular_covariance_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianCov::new(h).is_err());
        let tiny = DMatrix::from_diagonal_element(2, 2, 1e-5);
        assert!(matches!(
            GaussianCov::new(tiny),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn poisson_known_values() {
        let f = mean_eval(&[1.0, 1.0], 6);
        assert_eq!(
            poisson_term(&f, &[0.0, 0.0], Order::Value).unwrap().value,
            2.0
        );
        let f = mean_eval(&[2.0, 3.0], 6);
        let v = poisson_term(&f, &[2.0, 3.0], Order::Value).unwrap().value;
        assert!((v - (5.0 - 2.0 * 2f64.ln() - 3.0 * 3f64.ln())).abs() < 1e-12);
        assert!((v - 0.317_87).abs() < 1e-5);
    }

    #[test]
    fn poisson_gradient_vanishes_at_fit() {
        let mut f = mean_eval(&[2.0, 3.0], 6);
        f.jacobian = DMatrix::from_fn(2, 6, |i, j| (i + 2 * j) as f64 * 0.1 + 0.3);
        let e = poisson_term(&f, &[2.0, 3.0], Order::Gradient).unwrap();
        assert!(e.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn poisson_floor_enforced() {
        let f = mean_eval(&[1e-4, 1.0], 6);
        assert!(matches!(
            poisson_term(&f, &[0.0, 1.0], Order::Value),
            Err(Error::IntensityBelowFloor { component: 0, .. })
        ));
    }

    #[test]
    fn poisson_matches_log_pmf_up_to_factorial() {
        // -log p(y | lambda) = lambda - y log lambda + log y!
        for &lambda in &[0.3, 1.0, 2.5, 17.0] {
            for y in 0u32..25 {
                let log_fact: f64 = (1..=y).map(|k| (k as f64).ln()).sum();
                let mut log_pmf = -lambda;
                let mut term = 1.0f64;
                for k in 1..=y {
                    term *= lambda / k as f64;
                }
                log_pmf += term.ln();
                let f = mean_eval(&[lambda], 2);
                let v = poisson_term(&f, &[y as f64], Order::Value).unwrap().value;
                assert!(
                    (v - (-log_pmf - log_fact)).abs() < 1e-10,
                    "lambda={lambda} y={y}"
                );
            }
        }
    }
}
