use nalgebra::{DMatrix, DVector};

use super::{CondMeanEval, ContrastModel, ModelSpec};
use crate::contrast::{gaussian_term, ContrastEval, GaussianCov, Order};
use crate::error::{Error, Result};
use crate::mce::ols_fast_path;
use crate::series::{ParamSpace, ParamVector, Segment, TimeSeries};

pub(crate) const NAME: &str = "var1";

/// Box bound on every entry of `A`.
pub const VAR1_ENTRY_BOUND: f64 = 0.95;

/// `Y_t = A Y_{t-1} + xi_t` with the Gaussian quasi-likelihood contrast and a
/// constant conditional covariance `H`. Parameters: `A` flattened row-major.
#[derive(Clone, Debug)]
pub struct Var1Gaussian {
    m: usize,
    cov: GaussianCov,
    space: ParamSpace,
}

impl Var1Gaussian {
    pub fn new(m: usize, cov: GaussianCov) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidModel("m must be >= 1".into()));
        }
        if cov.m() != m {
            return Err(Error::DimensionMismatch {
                what: "covariance dimension",
                expected: m,
                got: cov.m(),
            });
        }
        let d = m * m;
        let space = ParamSpace::new(vec![-VAR1_ENTRY_BOUND; d], vec![VAR1_ENTRY_BOUND; d])?;
        Ok(Self { m, cov, space })
    }

    pub fn identity(m: usize) -> Self {
        Self::new(m, GaussianCov::identity(m)).expect("valid identity model")
    }

    pub(crate) fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let cov = match &spec.covariance {
            None => GaussianCov::identity(spec.m),
            Some(rows) => {
                if rows.len() != spec.m || rows.iter().any(|r| r.len() != spec.m) {
                    return Err(Error::InvalidModel(format!(
                        "covariance must be {0} x {0}",
                        spec.m
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                GaussianCov::new(DMatrix::from_row_slice(spec.m, spec.m, &flat))?
            }
        };
        Self::new(spec.m, cov)
    }

    pub fn covariance(&self) -> &GaussianCov {
        &self.cov
    }
}

impl ContrastModel for Var1Gaussian {
    fn family(&self) -> &str {
        NAME
    }

    fn spec(&self) -> ModelSpec {
        let covariance = (!self.cov.is_identity()).then(|| {
            let h = self
                .cov
                .precision()
                .clone()
                .try_inverse()
                .expect("precision of an SPD matrix is invertible");
            h.row_iter().map(|r| r.iter().copied().collect()).collect()
        });
        ModelSpec {
            family: NAME.into(),
            m: self.m,
            components: None,
            covariance,
        }
    }

    fn m(&self) -> usize {
        self.m
    }

    fn n_params(&self) -> usize {
        self.m * self.m
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn feedback_offset(&self) -> usize {
        0
    }

    fn cond_mean(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        t: usize,
    ) -> Result<CondMeanEval> {
        self.check_theta(theta)?;
        self.check_series(series)?;
        if t < 1 || t > series.n() {
            return Err(Error::InvalidSegment {
                lo: t,
                hi: t,
                n: series.n(),
            });
        }
        let m = self.m;
        let d = m * m;
        let mut value = DVector::zeros(m);
        let mut jacobian = DMatrix::zeros(m, d);
        if let Some(x) = series.lagged(t) {
            for i in 0..m {
                for k in 0..m {
                    value[i] += theta[i * m + k] * x[k];
                    jacobian[(i, i * m + k)] = x[k];
                }
            }
        }
        Ok(CondMeanEval {
            value,
            jacobian,
            hessians: vec![DMatrix::zeros(d, d); m],
        })
    }

    fn term(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        t: usize,
        order: Order,
    ) -> Result<ContrastEval> {
        let mean = self.cond_mean(theta, series, t)?;
        Ok(gaussian_term(&mean, &self.cov, series.row(t), order))
    }

    fn segment_contrast(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        seg: Segment,
        order: Order,
    ) -> Result<ContrastEval> {
        series.check_segment(seg)?;
        let m = self.m;
        let d = m * m;
        let a = theta.as_slice();
        let p = self.cov.precision();
        let zero = vec![0.0; m];
        let mut resid = vec![0.0; m];
        let mut pe = vec![0.0; m];
        let mut out = ContrastEval::zeros(d);
        // sum of x x^T, for the Kronecker-structured Hessian
        let mut sxx = DMatrix::<f64>::zeros(m, m);
        let mut value = 0.0;
        for t in seg.lo..=seg.hi {
            let x = series.lagged(t).unwrap_or(&zero);
            let y = series.row(t);
            for i in 0..m {
                let row = &a[i * m..(i + 1) * m];
                resid[i] = y[i] - row.iter().zip(x).map(|(aik, xk)| aik * xk).sum::<f64>();
            }
            if self.cov.is_identity() {
                pe.copy_from_slice(&resid);
            } else {
                for i in 0..m {
                    pe[i] = (0..m).map(|k| p[(i, k)] * resid[k]).sum();
                }
            }
            value += resid.iter().zip(&pe).map(|(e, q)| e * q).sum::<f64>();
            if order >= Order::Gradient {
                for (i, pi) in pe.iter().enumerate() {
                    for (k, xk) in x.iter().enumerate() {
                        out.gradient[i * m + k] -= 2.0 * pi * xk;
                    }
                }
            }
            if order >= Order::Hessian {
                for j in 0..m {
                    for l in 0..m {
                        sxx[(j, l)] += x[j] * x[l];
                    }
                }
            }
        }
        out.value = value + seg.len() as f64 * self.cov.log_det();
        if order >= Order::Hessian {
            // d^2 / dA_ij dA_kl = 2 P_ik (sum x_j x_l)
            for i in 0..m {
                for k in 0..m {
                    let pik = 2.0 * p[(i, k)];
                    if pik == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        for l in 0..m {
                            out.hessian[(i * m + j, k * m + l)] = pik * sxx[(j, l)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn initial_guess(&self, series: &TimeSeries, seg: Segment) -> Result<ParamVector> {
        ols_fast_path(series, seg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series2(rows: &[[f64; 2]]) -> TimeSeries {
        TimeSeries::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), false).unwrap()
    }

    #[test]
    fn first_point_is_truncated() {
        let s = series2(&[[2.0, 3.0], [1.0, 1.0]]);
        let model = Var1Gaussian::identity(2);
        let theta = ParamVector(vec![0.5, -0.2, 0.35, 0.1]);
        let e = model.cond_mean(&theta, &s, 1).unwrap();
        assert_eq!(e.value.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn known_conditional_means() {
        let s = series2(&[[2.0, 3.0], [1.0, 1.0], [0.0, 0.0]]);
        let model = Var1Gaussian::identity(2);
        let id = ParamVector(vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            model.cond_mean(&id, &s, 2).unwrap().value.as_slice(),
            &[2.0, 3.0]
        );
        let theta = ParamVector(vec![0.5, -0.2, 0.35, 0.1]);
        let v = model.cond_mean(&theta, &s, 3).unwrap().value;
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn stability_examples() {
        let model = Var1Gaussian::identity(2);
        assert!(model.stability_check(&ParamVector::zeros(4)));
        assert!(!model.stability_check(&ParamVector(vec![1.0, 0.0, 0.0, 0.5])));
    }

    #[test]
    fn dimension_mismatch() {
        let s = series2(&[[2.0, 3.0], [1.0, 1.0]]);
        let model = Var1Gaussian::identity(2);
        assert!(model.cond_mean(&ParamVector::zeros(3), &s, 2).is_err());
        let s3 = TimeSeries::new(vec![0.0; 6], 3, false).unwrap();
        assert!(model.cond_mean(&ParamVector::zeros(4), &s3, 2).is_err());
    }

    #[test]
    fn zero_matrix_contrast_is_sum_of_squares() {
        let s = series2(&[[2.0, 3.0], [1.0, -1.0], [0.5, 0.25], [4.0, 0.0]]);
        let model = Var1Gaussian::identity(2);
        let seg = Segment::new(2, 4).unwrap();
        let c = model
            .segment_contrast(&ParamVector::zeros(4), &s, seg, Order::Value)
            .unwrap();
        let brute: f64 = (2..=4)
            .map(|t| s.row(t).iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert_eq!(c.value, brute);
    }

    #[test]
    fn fast_path_matches_term_sum_with_general_covariance() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let model = Var1Gaussian::new(2, GaussianCov::new(h).unwrap()).unwrap();
        let s = series2(&[
            [0.3, -1.0],
            [1.2, 0.4],
            [-0.7, 2.2],
            [0.1, 0.05],
            [1.5, -0.4],
        ]);
        let theta = ParamVector(vec![0.4, -0.3, 0.2, 0.6]);
        let seg = Segment::new(1, 5).unwrap();
        let fast = model
            .segment_contrast(&theta, &s, seg, Order::Hessian)
            .unwrap();
        let mut slow = ContrastEval::zeros(4);
        for t in 1..=5 {
            slow.add_assign(&model.term(&theta, &s, t, Order::Hessian).unwrap());
        }
        assert!((fast.value - slow.value).abs() < 1e-12);
        assert!((fast.gradient - slow.gradient).abs().max() < 1e-12);
        assert!((fast.hessian - slow.hessian).abs().max() < 1e-12);
    }
}
