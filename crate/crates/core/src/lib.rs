//! Subsampling and bootstrap inference with uniform-validity diagnostics.
//!
//! The crate builds resampling estimates of a root's sampling distribution,
//! turns them into confidence intervals and tests, and runs Monte Carlo
//! experiments that measure how well coverage and size hold uniformly over a
//! family of data-generating laws.

pub mod bootstrap;
pub mod dist;
pub mod error;
pub mod families;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod rng;
pub mod roots;
pub mod subsample;

pub use bootstrap::{BootstrapMode, BootstrapPlan};
pub use dist::{dkw_bound, edf, kolmogorov_distance, quantile, sup_diff, QuantileLevel, Sample, StepDistribution};
pub use error::{Error, Result};
pub use families::{boundary_theta, Family, FamilySpec, OracleMode};
pub use linalg::SquareMatrix;
pub use roots::{CdfSpec, Kernel, OracleParams, ParamSource, RootSpec};
pub use subsample::{BRule, SubsampleMode, SubsamplePlan};
pub use harness::{ExperimentReport, ExperimentSpec, Resampling, Summary, REPORT_HEADER};
pub use inference::{
    confidence_interval, critical_value, moment_test_bootstrap_aqlr, moment_test_subsampling, stepdown_fwer,
    DecisionRecord, Interval, IntervalMethod, IntervalSpec, StepdownMethod, StepdownPlan, StepdownResult,
};
