//! Familywise error rate of the stepdown procedure over a grid of laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, check_replicates, data_rng, rate, resample_seed, Resampling};
use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::inference::{stepdown_fwer, StepdownMethod, StepdownPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FwerSpec {
    pub families: Vec<FamilySpec>,
    pub n: usize,
    pub methods: Vec<StepdownMethod>,
    pub alpha: f64,
    #[serde(default)]
    pub resampling: Resampling,
    /// Redraw resamples at every step.
    #[serde(default)]
    pub fresh_draws: bool,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl FwerSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.families, "families")?;
        check_grid(&self.methods, "methods")?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.methods.contains(&StepdownMethod::Subsampling) {
            self.resampling.b_for(self.n)?;
        }
        self.resampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerRow {
    pub grid: usize,
    pub family: String,
    pub n: usize,
    pub method: String,
    pub alpha: f64,
    /// Number of coordinates with `μ_j ≤ 0`.
    pub true_nulls: usize,
    pub fwer: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    pub mean_rejections: Option<f64>,
    /// Replicates whose step trace was not monotone (should be 0 with common draws).
    pub trace_violations: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstFwer {
    pub method: String,
    pub max_fwer: Option<f64>,
    pub se: Option<f64>,
    pub grid: Option<usize>,
    pub trace_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerReport {
    pub rows: Vec<FwerRow>,
    pub worst: Vec<WorstFwer>,
}

impl FwerReport {
    pub fn worst_for(&self, method: StepdownMethod) -> Option<&WorstFwer> {
        self.worst.iter().find(|w| w.method == method_name(method))
    }

    pub fn row(&self, grid: usize, method: StepdownMethod) -> Option<&FwerRow> {
        self.rows.iter().find(|r| r.grid == grid && r.method == method_name(method))
    }
}

fn method_name(m: StepdownMethod) -> &'static str {
    match m {
        StepdownMethod::Subsampling => "subsampling",
        StepdownMethod::Bootstrap => "bootstrap",
    }
}

struct RepOutcome {
    false_rejection: bool,
    rejections: usize,
    monotone: bool,
}

/// Frequency of rejecting any true null `μ_j ≤ 0`, per grid point and method.
pub fn mc_fwer(spec: &FwerSpec) -> Result<FwerReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for (grid, fspec) in spec.families.iter().enumerate() {
        let label = fspec.label();
        let result = (|| -> Result<(Vec<usize>, Vec<Vec<RepOutcome>>)> {
            let family = fspec.at(spec.n)?;
            let nulls: Vec<usize> = family.mean().iter().enumerate().filter(|(_, &m)| m <= 0.0).map(|(j, _)| j).collect();
            let per_rep: Vec<Vec<RepOutcome>> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| {
                    let s = family.sample(spec.n, &mut data_rng(spec.seed, grid, rep))?;
                    let seed = resample_seed(spec.seed, grid, rep, 0);
                    let plan = StepdownPlan {
                        subsample: match spec.methods.contains(&StepdownMethod::Subsampling) {
                            true => Some(spec.resampling.subsample_plan(spec.n, seed)?),
                            false => None,
                        },
                        bootstrap: Some(spec.resampling.bootstrap_plan(seed)),
                        fresh_draws: spec.fresh_draws,
                    };
                    spec.methods
                        .iter()
                        .map(|&m| {
                            let r = stepdown_fwer(&s, spec.alpha, m, &plan)?;
                            Ok(RepOutcome {
                                false_rejection: r.rejected.iter().any(|j| nulls.contains(j)),
                                rejections: r.rejected.len(),
                                monotone: r.trace_is_monotone(),
                            })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok((nulls, per_rep))
        })();
        match &result {
            Ok(_) => log::info!("fwer grid point {grid} ({label}) done"),
            Err(e) => log::warn!("fwer grid point {grid} ({label}) failed: {e}"),
        }
        for (mi, &m) in spec.methods.iter().enumerate() {
            let mut row = FwerRow {
                grid,
                family: label.clone(),
                n: spec.n,
                method: method_name(m).into(),
                alpha: spec.alpha,
                true_nulls: 0,
                fwer: None,
                se: None,
                replicates: 0,
                mean_rejections: None,
                trace_violations: 0,
                error: String::new(),
            };
            match &result {
                Ok((nulls, per_rep)) => {
                    let (p, se, r) = rate(per_rep.iter().map(|v| v[mi].false_rejection));
                    row.true_nulls = nulls.len();
                    row.fwer = Some(p);
                    row.se = Some(se);
                    row.replicates = r;
                    row.mean_rejections =
                        Some(per_rep.iter().map(|v| v[mi].rejections as f64).sum::<f64>() / r as f64);
                    row.trace_violations = per_rep.iter().filter(|v| !v[mi].monotone).count();
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    let worst = spec
        .methods
        .iter()
        .map(|&m| {
            let name = method_name(m);
            let cell: Vec<&FwerRow> = rows.iter().filter(|r| r.method == name && r.fwer.is_some()).collect();
            let best = cell
                .iter()
                .max_by(|a, b| a.fwer.unwrap().total_cmp(&b.fwer.unwrap()).then(b.grid.cmp(&a.grid)));
            WorstFwer {
                method: name.into(),
                max_fwer: best.and_then(|r| r.fwer),
                se: best.and_then(|r| r.se),
                grid: best.map(|r| r.grid),
                trace_violations: cell.iter().map(|r| r.trace_violations).sum(),
            }
        })
        .collect();
    Ok(FwerReport { rows, worst })
}
