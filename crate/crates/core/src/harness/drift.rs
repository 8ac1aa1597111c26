//! The constrained-mean root under `N(h/√n, 1)` drifting laws: one-sided
//! coverage per `(h, n)` and the behavior of the lower critical value.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::coverage::{point_outcomes, Outcome, Point};
use super::{check_grid, check_replicates, rate, Resampling};
use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::inference::{validate_alphas, IntervalMethod};
use crate::roots::RootSpec;

fn default_methods() -> Vec<IntervalMethod> {
    vec![IntervalMethod::SubsamplingOracle, IntervalMethod::SubsamplingFeasible]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    /// Drift values; negative `h` is clamped to 0 so that `μ ≥ 0`.
    pub h_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub alphas: Vec<(f64, f64)>,
    #[serde(default = "default_methods")]
    pub methods: Vec<IntervalMethod>,
    #[serde(default)]
    pub resampling: Resampling,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.h_grid, "h_grid")?;
        check_grid(&self.n_grid, "n_grid")?;
        check_grid(&self.alphas, "alphas")?;
        check_grid(&self.methods, "methods")?;
        for &(a1, a2) in &self.alphas {
            validate_alphas(a1, a2)?;
        }
        if self.methods.contains(&IntervalMethod::Bootstrap) {
            return Err(Error::Unsupported("the drift demonstration uses subsampling methods".into()));
        }
        for &n in &self.n_grid {
            self.resampling.b_for(n)?;
        }
        self.resampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub grid: usize,
    pub h: f64,
    pub n: usize,
    pub method: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub nominal: f64,
    pub coverage: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    /// Coverage below `nominal − 3·SE`.
    pub undercovers: Option<bool>,
    /// Mean of `ĉ(α₁)` over replicates.
    pub mean_lower: Option<f64>,
    /// `Φ⁻¹(α₁)`, the limit of `ĉ(α₁)` for `α₁ > 1/2`; empty for `α₁ = 0`.
    pub normal_quantile: Option<f64>,
    /// Mean of `|ĉ(α₁) − Φ⁻¹(α₁)|` over replicates.
    pub mean_abs_deviation: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub rows: Vec<DriftRow>,
}

impl DriftReport {
    pub fn rows_for(&self, method: IntervalMethod, alpha1: f64, alpha2: f64) -> impl Iterator<Item = &DriftRow> {
        self.rows.iter().filter(move |r| r.method == method.name() && r.alpha1 == alpha1 && r.alpha2 == alpha2)
    }
}

/// One-sided coverage of the constrained-mean root along drifting laws.
pub fn drift_demo(spec: &DriftSpec) -> Result<DriftReport> {
    spec.validate()?;
    let std_normal = Normal::new(0.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let root = RootSpec::ConstrainedMean;
    let mut rows = Vec::new();
    let mut grid = 0;
    for &n in &spec.n_grid {
        for &h in &spec.h_grid {
            let h = h.max(0.0);
            let family = FamilySpec::NormalDrift { h };
            let point = Point {
                family: &family,
                n,
                root: &root,
                methods: &spec.methods,
                alphas: &spec.alphas,
                resampling: &spec.resampling,
                tau_exponent: 0.5,
                replicates: spec.replicates,
                seed: spec.seed,
                grid,
            };
            let result = point_outcomes(&point);
            match &result {
                Ok(_) => log::info!("drift grid point h = {h}, n = {n} done"),
                Err(e) => log::warn!("drift grid point h = {h}, n = {n} failed: {e}"),
            }
            for (mi, m) in spec.methods.iter().enumerate() {
                for (ai, &(a1, a2)) in spec.alphas.iter().enumerate() {
                    let limit = (a1 > 0.0).then(|| std_normal.inverse_cdf(a1));
                    let mut row = DriftRow {
                        grid,
                        h,
                        n,
                        method: m.name().into(),
                        alpha1: a1,
                        alpha2: a2,
                        nominal: 1.0 - a1 - a2,
                        coverage: None,
                        se: None,
                        replicates: 0,
                        undercovers: None,
                        mean_lower: None,
                        normal_quantile: limit,
                        mean_abs_deviation: None,
                        error: String::new(),
                    };
                    match &result {
                        Ok(cells) => {
                            let cell: &[Outcome] = &cells[mi * spec.alphas.len() + ai];
                            let (cov, se, r) = rate(cell.iter().map(Outcome::covered));
                            row.coverage = Some(cov);
                            row.se = Some(se);
                            row.replicates = r;
                            row.undercovers = Some(cov < row.nominal - 3.0 * se);
                            row.mean_lower = Some(cell.iter().map(|o| o.lower).sum::<f64>() / r as f64);
                            row.mean_abs_deviation =
                                limit.map(|q| cell.iter().map(|o| (o.lower - q).abs()).sum::<f64>() / r as f64);
                        }
                        Err(e) => row.error = e.to_string(),
                    }
                    rows.push(row);
                }
            }
            grid += 1;
        }
    }
    Ok(DriftReport { rows })
}
