//! Model families: conditional-mean maps with truncated-past evaluation and
//! analytic derivatives, each paired with its contrast.
//!
//! Every family implements [`ContrastModel`] and is registered by name in a
//! [`ModelRegistry`]; callers pick one at runtime through a [`ModelSpec`].

mod ingarch1;
mod registry;
mod scaled;
mod var1;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastEval, Order};
use crate::error::{Error, Result};
use crate::series::{ParamSpace, ParamVector, Segment, TimeSeries};

pub use ingarch1::{Ingarch1Poisson, INTENSITY_FLOOR};
pub use registry::{ModelFactory, ModelRegistry};
pub use scaled::Scaled;
pub use var1::Var1Gaussian;

/// Weight of the stability barrier.
pub const PENALTY_WEIGHT: f64 = 1e4;
/// Norm level at which the stability barrier switches on.
pub const PENALTY_THRESHOLD: f64 = 0.98;
/// Norm that [`project_stable`] shrinks unstable feedback matrices to.
pub const STABILITY_CAP: f64 = 0.999;

/// Conditional mean at one time point with its first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct CondMeanEval {
    /// `f_t(theta)`, length m.
    pub value: DVector<f64>,
    /// `d f_t / d theta^T`, m x d.
    pub jacobian: DMatrix<f64>,
    /// `d^2 f_{t,i} / d theta d theta^T`, one d x d matrix per component.
    pub hessians: Vec<DMatrix<f64>>,
}

/// Component law used when simulating count data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ComponentDist {
    Poisson,
    /// `NB(r, r / (r + lambda))`: mean `lambda`, variance `lambda (1 + lambda / r)`.
    NegBinomial {
        r: f64,
    },
}

/// Which model family to use, its dimension, and family-specific constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Registry name, e.g. `"var1"` or `"ingarch1"`.
    pub family: String,
    pub m: usize,
    /// Per-component conditional laws (count families, simulation only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentDist>>,
    /// Constant conditional covariance `H` (Gaussian families); identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl ModelSpec {
    pub fn var1(m: usize) -> Self {
        Self {
            family: var1::NAME.into(),
            m,
            components: None,
            covariance: None,
        }
    }

    pub fn ingarch1(components: Vec<ComponentDist>) -> Self {
        Self {
            family: ingarch1::NAME.into(),
            m: components.len(),
            components: Some(components),
            covariance: None,
        }
    }

    /// Instantiates the family through the built-in registry.
    pub fn build(&self) -> Result<Box<dyn ContrastModel>> {
        ModelRegistry::builtin().build(self)
    }
}

/// A parametric family of conditional means together with its contrast.
///
/// Parameters are laid out so that the m x m feedback matrix (`A` for VAR(1),
/// `B` for INGARCH(1)) occupies `feedback_offset()..feedback_offset() + m*m`
/// in row-major order; stability and the barrier penalty are defined on it.
pub trait ContrastModel: Send + Sync + fmt::Debug {
    fn family(&self) -> &str;

    fn spec(&self) -> ModelSpec;

    /// Observation dimension m.
    fn m(&self) -> usize;

    /// Parameter dimension d.
    fn n_params(&self) -> usize;

    fn param_space(&self) -> &ParamSpace;

    fn requires_counts(&self) -> bool {
        false
    }

    fn feedback_offset(&self) -> usize;

    /// Conditional mean given `Y_{t-1}, ..., Y_1, 0, ...`.
    fn cond_mean(&self, theta: &ParamVector, series: &TimeSeries, t: usize)
        -> Result<CondMeanEval>;

    /// Contrast term `phi_t(theta)` and the requested derivatives.
    fn term(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        t: usize,
        order: Order,
    ) -> Result<ContrastEval>;

    /// Segment contrast: terms summed left to right over `seg`.
    fn segment_contrast(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        seg: Segment,
        order: Order,
    ) -> Result<ContrastEval> {
        series.check_segment(seg)?;
        let mut acc = ContrastEval::zeros(self.n_params());
        for t in seg.lo..=seg.hi {
            acc.add_assign(&self.term(theta, series, t, order)?);
        }
        Ok(acc)
    }

    /// Unit in which the contrast is measured; the stability barrier is
    /// multiplied by it.
    fn contrast_scale(&self) -> f64 {
        1.0
    }

    /// Contraction condition of the family.
    fn stability_check(&self, theta: &ParamVector) -> bool {
        feedback_norm(self, theta) < 1.0
    }

    /// Deterministic starting point for a cold fit on `seg`.
    fn initial_guess(&self, series: &TimeSeries, seg: Segment) -> Result<ParamVector>;

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn check_series(&self, series: &TimeSeries) -> Result<()> {
        if series.m() != self.m() {
            return Err(Error::DimensionMismatch {
                what: "series dimension",
                expected: self.m(),
                got: series.m(),
            });
        }
        if self.requires_counts() && !series.is_counts() {
            return Err(Error::InvalidSeries(format!(
                "family '{}' needs integer-valued (count) data",
                self.family()
            )));
        }
        Ok(())
    }
}

pub fn stability_check(model: &dyn ContrastModel, theta: &ParamVector) -> bool {
    model.stability_check(theta)
}

/// Maximum absolute column sum of a row-major m x m matrix.
pub fn col_sum_norm(a: &[f64], m: usize) -> f64 {
    argmax_column(a, m).1
}

fn argmax_column(a: &[f64], m: usize) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..m {
        let s: f64 = (0..m).map(|i| a[i * m + j].abs()).sum();
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

fn feedback<'a, M: ContrastModel + ?Sized>(model: &M, theta: &'a [f64]) -> &'a [f64] {
    let m = model.m();
    let off = model.feedback_offset();
    &theta[off..off + m * m]
}

pub fn feedback_norm<M: ContrastModel + ?Sized>(model: &M, theta: &ParamVector) -> f64 {
    col_sum_norm(feedback(model, theta.as_slice()), model.m())
}

/// Barrier `kappa * max(0, ||A|| - rho)^2` on the feedback matrix norm, in
/// units of [`ContrastModel::contrast_scale`].
pub fn stability_penalty(model: &dyn ContrastModel, theta: &[f64], order: Order) -> ContrastEval {
    let d = model.n_params();
    let m = model.m();
    let off = model.feedback_offset();
    let mut out = ContrastEval::zeros(d);
    let (col, norm) = argmax_column(feedback(model, theta), m);
    let excess = norm - PENALTY_THRESHOLD;
    if excess <= 0.0 {
        return out;
    }
    let kappa = PENALTY_WEIGHT * model.contrast_scale();
    out.value = kappa * excess * excess;
    if order >= Order::Gradient {
        let mut s = DVector::zeros(d);
        for i in 0..m {
            let k = off + i * m + col;
            s[k] = theta[k].signum();
        }
        out.gradient = &s * (2.0 * kappa * excess);
        if order >= Order::Hessian {
            out.hessian = &s * s.transpose() * (2.0 * kappa);
        }
    }
    out
}

/// Shrinks the feedback matrix to norm [`STABILITY_CAP`] when the norm
/// reaches 1; the result stays inside any box symmetric about, or anchored
/// at, zero for those coordinates.
pub fn project_stable(model: &dyn ContrastModel, theta: &mut ParamVector) {
    let m = model.m();
    let off = model.feedback_offset();
    let norm = col_sum_norm(&theta.0[off..off + m * m], m);
    if norm >= 1.0 {
        let scale = STABILITY_CAP / norm;
        theta.0[off..off + m * m]
            .iter_mut()
            .for_each(|v| *v *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_sum_norm() {
        assert_eq!(col_sum_norm(&[1.0, 0.0, 0.0, 0.5], 2), 1.0);
        assert!((col_sum_norm(&[0.25, 0.5, 0.1, 0.35], 2) - 0.85).abs() < 1e-15);
        assert!((col_sum_norm(&[0.5, -0.2, 0.35, 0.1], 2) - 0.85).abs() < 1e-15);
    }

    #[test]
    fn penalty_zero_inside_threshold_and_matches_fd() {
        let model = Var1Gaussian::identity(2);
        let inside = [0.3, 0.1, 0.2, 0.4];
        assert_eq!(
            stability_penalty(&model, &inside, Order::Hessian).value,
            0.0
        );

        let theta = [0.7, -0.1, 0.45, 0.2];
        let p = stability_penalty(&model, &theta, Order::Hessian);
        assert!(p.value > 0.0);
        for k in 0..4 {
            let h = 1e-7;
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (stability_penalty(&model, &up, Order::Value).value
                - stability_penalty(&model, &dn, Order::Value).value)
                / (2.0 * h);
            assert!(
                (fd - p.gradient[k]).abs() < 1e-4 * (1.0 + fd.abs()),
                "k={k}"
            );
        }
    }

    #[test]
    fn projection_restores_stability() {
        let model = Var1Gaussian::identity(2);
        let mut theta = ParamVector(vec![0.6, 0.3, 0.4, 0.4]);
        assert!(!model.stability_check(&theta));
        project_stable(&model, &mut theta);
        assert!(model.stability_check(&theta));
        assert!((feedback_norm(&model, &theta) - STABILITY_CAP).abs() < 1e-12);
    }

    #[test]
    fn spec_json_shape() {
        let spec = ModelSpec::ingarch1(vec![
            ComponentDist::Poisson,
            ComponentDist::NegBinomial { r: 2.0 },
        ]);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"family":"ingarch1","m":2,"components":[{"dist":"poisson"},{"dist":"neg_binomial","r":2.0}]}"#
        );
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
