use super::{CondMeanEval, ContrastModel, ModelSpec};
use crate::contrast::{ContrastEval, Order};
use crate::error::Result;
use crate::series::{ParamSpace, ParamVector, Segment, TimeSeries};

/// Wraps a family and multiplies its contrast by a positive constant.
#[derive(Debug)]
pub struct Scaled<M> {
    inner: M,
    factor: f64,
}

impl<M: ContrastModel> Scaled<M> {
    pub fn new(inner: M, factor: f64) -> Self {
        assert!(factor > 0.0, "contrast scale must be positive");
        Self { inner, factor }
    }
}

impl<M: ContrastModel> ContrastModel for Scaled<M> {
    fn family(&self) -> &str {
        self.inner.family()
    }

    fn spec(&self) -> ModelSpec {
        self.inner.spec()
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn param_space(&self) -> &ParamSpace {
        self.inner.param_space()
    }

    fn requires_counts(&self) -> bool {
        self.inner.requires_counts()
    }

    fn feedback_offset(&self) -> usize {
        self.inner.feedback_offset()
    }

    fn cond_mean(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        t: usize,
    ) -> Result<CondMeanEval> {
        self.inner.cond_mean(theta, series, t)
    }

    fn term(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        t: usize,
        order: Order,
    ) -> Result<ContrastEval> {
        let mut e = self.inner.term(theta, series, t, order)?;
        e.scale(self.factor);
        Ok(e)
    }

    fn segment_contrast(
        &self,
        theta: &ParamVector,
        series: &TimeSeries,
        seg: Segment,
        order: Order,
    ) -> Result<ContrastEval> {
        let mut e = self.inner.segment_contrast(theta, series, seg, order)?;
        e.scale(self.factor);
        Ok(e)
    }

    fn contrast_scale(&self) -> f64 {
        self.factor * self.inner.contrast_scale()
    }

    fn stability_check(&self, theta: &ParamVector) -> bool {
        self.inner.stability_check(theta)
    }

    fn initial_guess(&self, series: &TimeSeries, seg: Segment) -> Result<ParamVector> {
        self.inner.initial_guess(series, seg)
    }
}
