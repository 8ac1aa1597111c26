//! Monte Carlo experiments: coverage, size and familywise error rate over a
//! grid of laws, DKW and finite-sample deficit diagnostics, and the boundary
//! and drift failure demonstrations.
//!
//! Every replicate draws its data from the stream `(seed, [grid, replicate, 0])`
//! and its resamples from `(seed, [grid, replicate, 1 + purpose])`, so reports
//! are identical for a given spec and seed whatever the thread count.

pub mod coverage;
pub mod deficit;
pub mod dkw;
pub mod drift;
pub mod fwer;
pub mod report;
pub mod size;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapMode, BootstrapPlan};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::subsample::{BRule, SubsampleMode, SubsamplePlan, DEFAULT_DRAWS};

pub use coverage::{mc_coverage, CoverageReport, CoverageRow, CoverageSpec, FailureDemoSpec, FailureReport};
pub use deficit::{coverage_deficit, DeficitReport, DeficitRow, DeficitSpec};
pub use dkw::{dkw_check, DkwReport, DkwRow, DkwSpec};
pub use drift::{drift_demo, DriftReport, DriftRow, DriftSpec};
pub use fwer::{mc_fwer, FwerReport, FwerRow, FwerSpec};
pub use report::{ExperimentReport, Summary, REPORT_HEADER};
pub use size::{mc_size, SizeReport, SizeRow, SizeSpec, TestSpec};

/// Smallest accepted replicate count.
pub const MIN_REPLICATES: usize = 100;

/// Resampling settings shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resampling {
    /// Fixed subsample size; overrides `b_rule`.
    pub b: Option<usize>,
    pub b_rule: BRule,
    /// Subsamples or bootstrap resamples per replicate.
    pub draws: usize,
    /// Enumerate every subsample / bootstrap resample instead of drawing.
    pub exhaustive: bool,
}

impl Default for Resampling {
    fn default() -> Self {
        Self { b: None, b_rule: BRule::default(), draws: DEFAULT_DRAWS, exhaustive: false }
    }
}

impl Resampling {
    pub fn b_for(&self, n: usize) -> Result<usize> {
        match self.b {
            Some(b) if b >= 1 && b < n => Ok(b),
            Some(b) => Err(Error::invalid(format!("subsample size b = {b} must satisfy 1 <= b < n = {n}"))),
            None => self.b_rule.b_for(n),
        }
    }

    pub fn subsample_plan(&self, n: usize, seed: u64) -> Result<SubsamplePlan> {
        self.subsample_plan_with_b(n, self.b_for(n)?, seed)
    }

    pub fn subsample_plan_with_b(&self, n: usize, b: usize, seed: u64) -> Result<SubsamplePlan> {
        let mode = if self.exhaustive { SubsampleMode::Exhaustive } else { SubsampleMode::Random { draws: self.draws } };
        SubsamplePlan::new(n, b, mode, seed)
    }

    pub fn bootstrap_plan(&self, seed: u64) -> BootstrapPlan {
        if self.exhaustive {
            BootstrapPlan { replicates: 0, mode: BootstrapMode::Exhaustive, seed }
        } else {
            BootstrapPlan::monte_carlo(self.draws, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.exhaustive && self.draws == 0 {
            return Err(Error::invalid("draws must be positive"));
        }
        Ok(())
    }
}

/// An experiment, selected by the `experiment` field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Coverage(CoverageSpec),
    Size(SizeSpec),
    Fwer(FwerSpec),
    DkwCheck(DkwSpec),
    FailureDemo(FailureDemoSpec),
    DriftDemo(DriftSpec),
    Deficit(DeficitSpec),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Coverage(_) => "coverage",
            ExperimentSpec::Size(_) => "size",
            ExperimentSpec::Fwer(_) => "fwer",
            ExperimentSpec::DkwCheck(_) => "dkw-check",
            ExperimentSpec::FailureDemo(_) => "failure-demo",
            ExperimentSpec::DriftDemo(_) => "drift-demo",
            ExperimentSpec::Deficit(_) => "deficit",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentSpec::Coverage(s) => s.seed,
            ExperimentSpec::Size(s) => s.seed,
            ExperimentSpec::Fwer(s) => s.seed,
            ExperimentSpec::DkwCheck(s) => s.seed,
            ExperimentSpec::FailureDemo(s) => s.seed,
            ExperimentSpec::DriftDemo(s) => s.seed,
            ExperimentSpec::Deficit(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentSpec::Coverage(s) => s.seed = seed,
            ExperimentSpec::Size(s) => s.seed = seed,
            ExperimentSpec::Fwer(s) => s.seed = seed,
            ExperimentSpec::DkwCheck(s) => s.seed = seed,
            ExperimentSpec::FailureDemo(s) => s.seed = seed,
            ExperimentSpec::DriftDemo(s) => s.seed = seed,
            ExperimentSpec::Deficit(s) => s.seed = seed,
        }
    }

    /// All checks that can run before any computation.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentSpec::Coverage(s) => s.validate(),
            ExperimentSpec::Size(s) => s.validate(),
            ExperimentSpec::Fwer(s) => s.validate(),
            ExperimentSpec::DkwCheck(s) => s.validate(),
            ExperimentSpec::FailureDemo(s) => s.validate(),
            ExperimentSpec::DriftDemo(s) => s.validate(),
            ExperimentSpec::Deficit(s) => s.validate(),
        }
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        self.validate()?;
        Ok(match self {
            ExperimentSpec::Coverage(s) => ExperimentReport::Coverage(mc_coverage(s)?),
            ExperimentSpec::Size(s) => ExperimentReport::Size(mc_size(s)?),
            ExperimentSpec::Fwer(s) => ExperimentReport::Fwer(mc_fwer(s)?),
            ExperimentSpec::DkwCheck(s) => ExperimentReport::Dkw(dkw_check(s)?),
            ExperimentSpec::FailureDemo(s) => ExperimentReport::Failure(s.run()?),
            ExperimentSpec::DriftDemo(s) => ExperimentReport::Drift(drift_demo(s)?),
            ExperimentSpec::Deficit(s) => ExperimentReport::Deficit(coverage_deficit(s)?),
        })
    }
}

pub(crate) fn check_replicates(r: usize) -> Result<()> {
    if r < MIN_REPLICATES {
        return Err(Error::invalid(format!("replicates must be at least {MIN_REPLICATES}, got {r}")));
    }
    Ok(())
}

pub(crate) fn check_grid<T>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{what} must be nonempty")));
    }
    Ok(())
}

pub(crate) fn data_rng(seed: u64, grid: usize, rep: usize) -> StreamRng {
    stream(seed, &[grid as u64, rep as u64, 0])
}

pub(crate) fn resample_seed(seed: u64, grid: usize, rep: usize, purpose: u64) -> u64 {
    derive_seed(seed, &[grid as u64, rep as u64, 1 + purpose])
}

/// Binomial standard error `√(p(1−p)/R)`.
pub fn binomial_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

/// Mean of a boolean outcome and its binomial standard error.
pub(crate) fn rate(hits: impl Iterator<Item = bool>) -> (f64, f64, usize) {
    let (mut k, mut r) = (0usize, 0usize);
    for h in hits {
        k += h as usize;
        r += 1;
    }
    let p = if r == 0 { f64::NAN } else { k as f64 / r as f64 };
    (p, binomial_se(p, r), r)
}

fn default_tau() -> f64 {
    0.5
}
