use nalgebra::{DMatrix, DVector};

use super::{col_sum_norm, feedback_norm, ComponentDist, CondMeanEval, ContrastModel, ModelSpec};
use crate::contrast::{poisson_term, ContrastEval, Order};
use crate::error::{Error, Result};
use crate::series::{ParamSpace, ParamVector, Segment, TimeSeries};

pub(crate) const NAME: &str = "ingarch1";

/// Lower bound `c` on every intercept and hence on every intensity.
pub const INTENSITY_FLOOR: f64 = 1e-3;
/// Upper box bound on the intercepts `d`.
pub const INTERCEPT_UPPER: f64 = 10.0;
/// Upper box bound on the entries of `B`.
pub const FEEDBACK_UPPER: f64 = 0.95;

/// Multivariate INGARCH(1): `lambda_t = d + B Y_{t-1}` with the Poisson
/// quasi-likelihood contrast. Parameters: `d` (m values) then `B` row-major.
#[derive(Clone, Debug)]
pub struct Ingarch1Poisson {
    m: usize,
    components: Vec<ComponentDist>,
    space: ParamSpace,
}

impl Ingarch1Poisson {
    pub fn new(components: Vec<ComponentDist>) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(Error::InvalidModel("m must be >= 1".into()));
        }
        for c in &components {
            if let ComponentDist::NegBinomial { r } = c {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "negative binomial size must be positive, got {r}"
                    )));
                }
            }
        }
        let mut lower = vec![INTENSITY_FLOOR; m];
        lower.extend(std::iter::repeat_n(0.0, m * m));
        let mut upper = vec![INTERCEPT_UPPER; m];
        upper.extend(std::iter::repeat_n(FEEDBACK_UPPER, m * m));
        Ok(Self {
            m,
            components,
            space: ParamSpace::new(lower, upper)?,
        })
    }

    pub fn poisson(m: usize) -> Self {
        Self::new(vec![ComponentDist::Poisson; m]).expect("valid Poisson model")
    }

    pub(crate) fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let components = spec
            .components
            .clone()
            .unwrap_or_else(|| vec![ComponentDist::Poisson; spec.m]);
        if components.len() != spec.m {
            return Err(Error::DimensionMismatch {
                what: "component distribution tags",
                expected: spec.m,
                got: components.len(),
            });
        }
        if spec.covariance.is_some() {
            return Err(Error::InvalidModel(
                "ingarch1 takes no covariance matrix".into(),
            ));
        }
        Self::new(components)
    }

    pub fn components(&self) -> &[ComponentDist] {
        &self.components
    }

    fn intensity(&self, theta: &[f64], x: Option<&[f64]>, i: usize) -> f64 {
        let m = self.m;
        let mut lambda = theta[i];
        if let Some(x) = x {
            let row = &theta[m + i * m..m + (i + 1) * m];
            lambda += row.iter().zip(x).map(|(b, xk)| b * xk).sum::<f64>();
        }
        lambda
    }
}

impl ContrastModel for Ingarch1Poisson {
    fn family(&self) -> &str {
        NAME
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec::ingarch1(self.components.clone())
    }

    fn m(&self) -> usize {
        self.m
    }

    fn n_params(&self) -> usize {
        self.m + self.m * self.m
    }

    fn param_space(&self) -> &ParamSpace {
        &self.space
    }

    fn requires_counts(&self) -> bool {
        true
    }

    fn feedback_offset(&self) -> usize {
        self.m
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
        let d = self.n_params();
        let x = series.lagged(t);
        let mut value = DVector::zeros(m);
        let mut jacobian = DMatrix::zeros(m, d);
        for i in 0..m {
            value[i] = self.intensity(theta.as_slice(), x, i);
            jacobian[(i, i)] = 1.0;
            if let Some(x) = x {
                for k in 0..m {
                    jacobian[(i, m + i * m + k)] = x[k];
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
        poisson_term(&mean, series.row(t), order)
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
        let d = self.n_params();
        let th = theta.as_slice();
        let mut out = ContrastEval::zeros(d);
        // per-component accumulators over z = (1, Y_{t-1})
        let mut zz: Vec<DMatrix<f64>> = if order >= Order::Hessian {
            vec![DMatrix::zeros(m + 1, m + 1); m]
        } else {
            Vec::new()
        };
        let mut z = vec![0.0; m + 1];
        z[0] = 1.0;
        for t in seg.lo..=seg.hi {
            let x = series.lagged(t);
            match x {
                Some(x) => z[1..].copy_from_slice(x),
                None => z[1..].iter_mut().for_each(|v| *v = 0.0),
            }
            let y = series.row(t);
            for i in 0..m {
                let lambda = self.intensity(th, x, i);
                if !(lambda >= INTENSITY_FLOOR) {
                    return Err(Error::IntensityBelowFloor {
                        component: i,
                        value: lambda,
                        floor: INTENSITY_FLOOR,
                    });
                }
                out.value += lambda - y[i] * lambda.ln();
                if order >= Order::Gradient {
                    let c = 1.0 - y[i] / lambda;
                    out.gradient[i] += c;
                    for k in 0..m {
                        out.gradient[m + i * m + k] += c * z[k + 1];
                    }
                }
                if order >= Order::Hessian && y[i] != 0.0 {
                    let w = y[i] / (lambda * lambda);
                    let acc = &mut zz[i];
                    for a in 0..=m {
                        let wa = w * z[a];
                        if wa == 0.0 {
                            continue;
                        }
                        for b in 0..=m {
                            acc[(a, b)] += wa * z[b];
                        }
                    }
                }
            }
        }
        if order >= Order::Hessian {
            let idx = |i: usize, a: usize| if a == 0 { i } else { m + i * m + a - 1 };
            for (i, acc) in zz.iter().enumerate() {
                for a in 0..=m {
                    for b in 0..=m {
                        out.hessian[(idx(i, a), idx(i, b))] = acc[(a, b)];
                    }
                }
            }
        }
        Ok(out)
    }

    fn stability_check(&self, theta: &ParamVector) -> bool {
        let m = self.m;
        theta.len() == self.n_params()
            && theta.0[..m].iter().all(|&d| d >= INTENSITY_FLOOR)
            && theta.0[m..].iter().all(|&b| b >= 0.0)
            && feedback_norm(self, theta) < 1.0
    }

    fn initial_guess(&self, series: &TimeSeries, seg: Segment) -> Result<ParamVector> {
        series.check_segment(seg)?;
        let m = self.m;
        let b_init = 0.1;
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            b[i * m + i] = b_init;
        }
        let shrink = 1.0 - col_sum_norm(&b, m);
        let mut theta: Vec<f64> = series.mean(seg).iter().map(|ybar| shrink * ybar).collect();
        theta.extend(b);
        let mut theta = ParamVector(theta);
        self.space.project_in_place(&mut theta.0);
        Ok(theta)
    }
}
