//! Retrospective change-point test for multivariate time series built on
//! minimum-contrast estimation.
//!
//! For every candidate split `k` the parameter is estimated on `T_{1,k}` and
//! on `T_{k+1,n}`; the Wald-type distance between the two estimates, weighted
//! by a sandwich matrix estimated on boundary segments, is maximised over `k`
//! and compared with a Monte-Carlo quantile of the supremum of a squared
//! Brownian-bridge norm.
//!
//! Model families implement [`models::ContrastModel`] and are looked up by
//! name in a [`models::ModelRegistry`]. Two are built in: `var1` (Gaussian
//! quasi-likelihood) and `ingarch1` (Poisson quasi-likelihood for counts).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contrast;
pub mod critical_values;
pub mod error;
pub mod harness;
pub mod mce;
pub mod models;
pub mod optim;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod wald;

pub use contrast::{ContrastEval, Order};
pub use critical_values::{CriticalValueTable, CvCache};
pub use error::{Error, Result};
pub use mce::{fit_segment, scan_fits, FitOptions, ScanFits, SegmentFit};
pub use models::{ComponentDist, ContrastModel, ModelRegistry, ModelSpec};
pub use series::{tuning_sequences, ParamSpace, ParamVector, Segment, TimeSeries, Tuning};
pub use simulate::{simulate, Innovation, ScenarioSpec};
pub use wald::{run_test, run_test_with, TestOptions, WaldScan, WeightEstimator};
