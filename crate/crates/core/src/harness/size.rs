//! Rejection frequencies of moment-inequality tests over a grid of laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, check_replicates, data_rng, rate, resample_seed, Resampling};
use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::inference::{moment_test_bootstrap_aqlr, moment_test_subsampling};
use crate::roots::{DEFAULT_EPS, MAX_EXACT_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestSpec {
    /// Subsample the max studentized mean itself.
    SubsamplingMax {},
    /// Bootstrap the AQLR root recentered at the sample mean.
    BootstrapAqlr {
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

impl TestSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TestSpec::SubsamplingMax {} => "subsampling-max",
            TestSpec::BootstrapAqlr { .. } => "bootstrap-aqlr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeSpec {
    pub families: Vec<FamilySpec>,
    pub n: usize,
    pub tests: Vec<TestSpec>,
    pub alpha: f64,
    #[serde(default)]
    pub resampling: Resampling,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SizeSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.families, "families")?;
        check_grid(&self.tests, "tests")?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        for t in &self.tests {
            match t {
                TestSpec::SubsamplingMax {} => {
                    self.resampling.b_for(self.n)?;
                }
                TestSpec::BootstrapAqlr { eps } if !(*eps > 0.0) => {
                    return Err(Error::invalid("aqlr eps must be positive"));
                }
                TestSpec::BootstrapAqlr { .. } => {}
            }
        }
        for f in &self.families {
            if f.at(self.n)?.dim() > MAX_EXACT_DIM && self.tests.iter().any(|t| matches!(t, TestSpec::BootstrapAqlr { .. })) {
                return Err(Error::ExactSolverLimit(f.at(self.n)?.dim()));
            }
        }
        self.resampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub grid: usize,
    pub family: String,
    pub n: usize,
    pub test: String,
    pub alpha: f64,
    /// Whether every coordinate mean is ≤ 0 (the null holds).
    pub null: bool,
    pub rejection_rate: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    pub error: String,
}

/// Largest rejection rate over null grid points for one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstSize {
    pub test: String,
    pub max_size: Option<f64>,
    pub se: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub rows: Vec<SizeRow>,
    pub worst: Vec<WorstSize>,
}

impl SizeReport {
    pub fn worst_for(&self, test: &str) -> Option<&WorstSize> {
        self.worst.iter().find(|w| w.test == test)
    }

    pub fn row(&self, grid: usize, test: &str) -> Option<&SizeRow> {
        self.rows.iter().find(|r| r.grid == grid && r.test == test)
    }
}

/// Per-grid-point rejection frequency of each test; the maximum over null
/// points estimates the size.
pub fn mc_size(spec: &SizeSpec) -> Result<SizeReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for (grid, fspec) in spec.families.iter().enumerate() {
        let label = fspec.label();
        let result = (|| -> Result<(bool, Vec<Vec<bool>>)> {
            let family = fspec.at(spec.n)?;
            let null = family.mean().iter().all(|&m| m <= 0.0);
            let per_rep: Vec<Vec<bool>> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| {
                    let s = family.sample(spec.n, &mut data_rng(spec.seed, grid, rep))?;
                    spec.tests
                        .iter()
                        .enumerate()
                        .map(|(ti, t)| {
                            let seed = resample_seed(spec.seed, grid, rep, ti as u64);
                            Ok(match t {
                                TestSpec::SubsamplingMax {} => {
                                    moment_test_subsampling(&s, spec.alpha, &spec.resampling.subsample_plan(spec.n, seed)?)?
                                }
                                TestSpec::BootstrapAqlr { eps } => {
                                    moment_test_bootstrap_aqlr(&s, spec.alpha, *eps, &spec.resampling.bootstrap_plan(seed))?
                                }
                            }
                            .reject)
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok((null, per_rep))
        })();
        match &result {
            Ok(_) => log::info!("size grid point {grid} ({label}) done"),
            Err(e) => log::warn!("size grid point {grid} ({label}) failed: {e}"),
        }
        for (ti, t) in spec.tests.iter().enumerate() {
            let mut row = SizeRow {
                grid,
                family: label.clone(),
                n: spec.n,
                test: t.name().into(),
                alpha: spec.alpha,
                null: false,
                rejection_rate: None,
                se: None,
                replicates: 0,
                error: String::new(),
            };
            match &result {
                Ok((null, per_rep)) => {
                    let (p, se, r) = rate(per_rep.iter().map(|v| v[ti]));
                    row.null = *null;
                    row.rejection_rate = Some(p);
                    row.se = Some(se);
                    row.replicates = r;
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    let worst = spec
        .tests
        .iter()
        .map(|t| {
            let best = rows
                .iter()
                .filter(|r| r.test == t.name() && r.null && r.rejection_rate.is_some())
                .max_by(|a, b| a.rejection_rate.unwrap().total_cmp(&b.rejection_rate.unwrap()).then(b.grid.cmp(&a.grid)));
            WorstSize {
                test: t.name().into(),
                max_size: best.and_then(|r| r.rejection_rate),
                se: best.and_then(|r| r.se),
                grid: best.map(|r| r.grid),
            }
        })
        .collect();
    Ok(SizeReport { rows, worst })
}
