//! Coverage of resampling intervals for the oracle root, and the boundary
//! failure demonstration built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, check_replicates, data_rng, default_tau, rate, resample_seed, Resampling};
use crate::bootstrap::bootstrap_distribution;
use crate::dist::{Sample, StepDistribution};
use crate::error::{Error, Result};
use crate::families::{boundary_theta, Family, FamilySpec};
use crate::inference::{critical_value, validate_alphas, IntervalMethod};
use crate::roots::{OracleParams, RootSpec};
use crate::subsample::{correction_factor, studentized_subsampling_distribution, subsampling_distribution};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSpec {
    pub families: Vec<FamilySpec>,
    pub n: usize,
    pub root: RootSpec,
    pub methods: Vec<IntervalMethod>,
    /// `(α₁, α₂)` pairs, all evaluated on the same replicates.
    pub alphas: Vec<(f64, f64)>,
    #[serde(default)]
    pub resampling: Resampling,
    #[serde(default = "default_tau")]
    pub tau_exponent: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CoverageSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.families, "families")?;
        check_grid(&self.methods, "methods")?;
        check_grid(&self.alphas, "alphas")?;
        for &(a1, a2) in &self.alphas {
            validate_alphas(a1, a2)?;
        }
        self.root.validate()?;
        self.resampling.validate()?;
        if self.methods.iter().any(|m| *m != IntervalMethod::Bootstrap) {
            self.resampling.b_for(self.n)?;
        }
        Ok(())
    }
}

/// One replicate's root value and critical values for one (method, α) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub root: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Outcome {
    pub fn covered(&self) -> bool {
        self.lower <= self.root && self.root <= self.upper
    }
}

/// Everything needed to simulate one grid point.
pub(crate) struct Point<'a> {
    pub family: &'a FamilySpec,
    pub n: usize,
    pub root: &'a RootSpec,
    pub methods: &'a [IntervalMethod],
    pub alphas: &'a [(f64, f64)],
    pub resampling: &'a Resampling,
    pub tau_exponent: f64,
    pub replicates: usize,
    pub seed: u64,
    pub grid: usize,
}

/// Distribution used for the critical values, the scale applied to its
/// quantiles and the root value they are compared with.
fn method_distribution(
    p: &Point<'_>,
    method: IntervalMethod,
    sample: &Sample,
    oracle: &OracleParams,
    oracle_root: f64,
    plug: &OracleParams,
    rep: usize,
) -> Result<(StepDistribution, f64, f64)> {
    let (n, root) = (p.n, p.root);
    let sub_plan = || p.resampling.subsample_plan(n, resample_seed(p.seed, p.grid, rep, 0));
    Ok(match method {
        IntervalMethod::SubsamplingOracle => (subsampling_distribution(sample, root, oracle, &sub_plan()?)?, 1.0, oracle_root),
        IntervalMethod::SubsamplingFeasible => (subsampling_distribution(sample, root, plug, &sub_plan()?)?, 1.0, oracle_root),
        IntervalMethod::SubsamplingCorrected => {
            let plan = sub_plan()?;
            let f = correction_factor(n, plan.b, p.tau_exponent);
            (subsampling_distribution(sample, root, plug, &plan)?, f, oracle_root)
        }
        IntervalMethod::SubsamplingStudentized => match root {
            RootSpec::Mean => {
                let sd = |s: &Sample| {
                    let m = s.n() as f64;
                    Ok(s.column_moments()[0].1 * (m / (m - 1.0)).sqrt())
                };
                let d = studentized_subsampling_distribution(sample, |s| Ok(s.means()[0]), sd, &sub_plan()?, p.tau_exponent)?;
                let s_n = sd(sample)?;
                if !(s_n > 0.0) {
                    return Err(Error::DegenerateCoordinate(0));
                }
                (d, 1.0, oracle_root / s_n)
            }
            RootSpec::MaxStudentizedMean | RootSpec::GeneralF { .. } | RootSpec::AqlrStat { .. } => {
                (subsampling_distribution(sample, root, plug, &sub_plan()?)?, 1.0, oracle_root)
            }
            other => {
                return Err(Error::Unsupported(format!("studentized subsampling for root `{}`", other.name())));
            }
        },
        IntervalMethod::Bootstrap => {
            let plan = p.resampling.bootstrap_plan(resample_seed(p.seed, p.grid, rep, 1));
            (bootstrap_distribution(sample, root, plug, &plan)?, 1.0, oracle_root)
        }
    })
}

fn replicate(p: &Point<'_>, family: &Family, oracle: &OracleParams, rep: usize) -> Result<Vec<Outcome>> {
    let sample = family.sample(p.n, &mut data_rng(p.seed, p.grid, rep))?;
    let oracle_root = p.root.evaluate(&sample, oracle)?;
    let plug = p.root.plug_in_params(&sample, p.tau_exponent)?;
    let mut out = Vec::with_capacity(p.methods.len() * p.alphas.len());
    for &method in p.methods {
        let (dist, scale, r) = method_distribution(p, method, &sample, oracle, oracle_root, &plug, rep)?;
        for &(a1, a2) in p.alphas {
            out.push(Outcome {
                root: r,
                lower: scale * critical_value(&dist, a1),
                upper: scale * critical_value(&dist, 1.0 - a2),
            });
        }
    }
    Ok(out)
}

/// Outcomes indexed `[method × alphas.len() + alpha][replicate]`.
pub(crate) fn point_outcomes(p: &Point<'_>) -> Result<Vec<Vec<Outcome>>> {
    let family = p.family.at(p.n)?;
    let oracle = family.oracle_params(p.root, p.tau_exponent)?;
    let per_rep: Vec<Vec<Outcome>> =
        (0..p.replicates).into_par_iter().map(|rep| replicate(p, &family, &oracle, rep)).collect::<Result<_>>()?;
    let cells = p.methods.len() * p.alphas.len();
    Ok((0..cells).map(|c| per_rep.iter().map(|r| r[c]).collect()).collect())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for x in xs {
        s += x;
        k += 1;
    }
    s / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub grid: usize,
    pub family: String,
    pub n: usize,
    pub method: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub nominal: f64,
    pub coverage: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    /// Mean over replicates of the lower critical value `ĉ(α₁)`.
    pub mean_lower: Option<f64>,
    /// Mean over replicates of the upper critical value `ĉ(1−α₂)`.
    pub mean_upper: Option<f64>,
    pub error: String,
}

/// Minimum coverage over the grid for one (method, α) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCoverage {
    pub method: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub nominal: f64,
    pub min_coverage: Option<f64>,
    pub se: Option<f64>,
    pub grid: Option<usize>,
    pub failed_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub worst: Vec<WorstCoverage>,
}

impl CoverageReport {
    /// The row for `(grid, method, α₁, α₂)`.
    pub fn row(&self, grid: usize, method: IntervalMethod, alpha1: f64, alpha2: f64) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.grid == grid && r.method == method.name() && r.alpha1 == alpha1 && r.alpha2 == alpha2)
    }

    pub fn worst_for(&self, method: IntervalMethod, alpha1: f64, alpha2: f64) -> Option<&WorstCoverage> {
        self.worst.iter().find(|w| w.method == method.name() && w.alpha1 == alpha1 && w.alpha2 == alpha2)
    }

    fn summarize(rows: Vec<CoverageRow>, methods: &[IntervalMethod], alphas: &[(f64, f64)]) -> Self {
        let mut worst = Vec::new();
        for m in methods {
            for &(a1, a2) in alphas {
                let cell: Vec<&CoverageRow> =
                    rows.iter().filter(|r| r.method == m.name() && r.alpha1 == a1 && r.alpha2 == a2).collect();
                let best = cell
                    .iter()
                    .filter(|r| r.coverage.is_some())
                    .min_by(|a, b| a.coverage.unwrap().total_cmp(&b.coverage.unwrap()).then(a.grid.cmp(&b.grid)));
                worst.push(WorstCoverage {
                    method: m.name().into(),
                    alpha1: a1,
                    alpha2: a2,
                    nominal: 1.0 - a1 - a2,
                    min_coverage: best.and_then(|r| r.coverage),
                    se: best.and_then(|r| r.se),
                    grid: best.map(|r| r.grid),
                    failed_points: cell.iter().filter(|r| r.coverage.is_none()).count(),
                });
            }
        }
        Self { rows, worst }
    }
}

/// Coverage rows for one grid point; an engine error becomes a diagnostic
/// on every row of that point.
pub(crate) fn point_rows(p: &Point<'_>) -> Vec<CoverageRow> {
    let result = point_outcomes(p);
    let label = p.family.label();
    let mut rows = Vec::new();
    for (mi, m) in p.methods.iter().enumerate() {
        for (ai, &(a1, a2)) in p.alphas.iter().enumerate() {
            let mut row = CoverageRow {
                grid: p.grid,
                family: label.clone(),
                n: p.n,
                method: m.name().into(),
                alpha1: a1,
                alpha2: a2,
                nominal: 1.0 - a1 - a2,
                coverage: None,
                se: None,
                replicates: 0,
                mean_lower: None,
                mean_upper: None,
                error: String::new(),
            };
            match &result {
                Ok(cells) => {
                    let cell = &cells[mi * p.alphas.len() + ai];
                    let (cov, se, r) = rate(cell.iter().map(Outcome::covered));
                    row.coverage = Some(cov);
                    row.se = Some(se);
                    row.replicates = r;
                    row.mean_lower = Some(mean(cell.iter().map(|o| o.lower)));
                    row.mean_upper = Some(mean(cell.iter().map(|o| o.upper)));
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    match &result {
        Ok(_) => log::info!("coverage grid point {} ({label}) done", p.grid),
        Err(e) => log::warn!("coverage grid point {} ({label}) failed: {e}", p.grid),
    }
    rows
}

/// Per-grid-point coverage of `ĉ(α₁) ≤ R_n(X, P) ≤ ĉ(1−α₂)` and its minimum over the grid.
pub fn mc_coverage(spec: &CoverageSpec) -> Result<CoverageReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for (grid, family) in spec.families.iter().enumerate() {
        rows.extend(point_rows(&Point {
            family,
            n: spec.n,
            root: &spec.root,
            methods: &spec.methods,
            alphas: &spec.alphas,
            resampling: &spec.resampling,
            tau_exponent: spec.tau_exponent,
            replicates: spec.replicates,
            seed: spec.seed,
            grid,
        }));
    }
    Ok(CoverageReport::summarize(rows, &spec.methods, &spec.alphas))
}

/// Coverage for the mean root under Bernoulli laws whose success
/// probability `(1 − δ)^(1/n)` makes an all-ones sample have probability `1 − δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureDemoSpec {
    pub deltas: Vec<f64>,
    pub n: usize,
    pub alphas: Vec<(f64, f64)>,
    #[serde(default = "bootstrap_only")]
    pub methods: Vec<IntervalMethod>,
    #[serde(default)]
    pub resampling: Resampling,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

fn bootstrap_only() -> Vec<IntervalMethod> {
    vec![IntervalMethod::Bootstrap]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub grid: usize,
    pub delta: f64,
    pub theta: f64,
    pub n: usize,
    pub method: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub nominal: f64,
    pub coverage: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    /// Upper bound on coverage implied by the all-ones event: `δ` when `α₂ > 0`.
    pub predicted_max: f64,
    /// `coverage ≤ predicted_max + 3·SE`.
    pub within_prediction: Option<bool>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub rows: Vec<FailureRow>,
}

impl FailureDemoSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.deltas, "deltas")?;
        check_grid(&self.alphas, "alphas")?;
        check_grid(&self.methods, "methods")?;
        for &(a1, a2) in &self.alphas {
            validate_alphas(a1, a2)?;
        }
        for &d in &self.deltas {
            boundary_theta(d, self.n)?;
        }
        self.resampling.validate()
    }

    pub fn run(&self) -> Result<FailureReport> {
        self.validate()?;
        let root = RootSpec::Mean;
        let mut rows = Vec::new();
        for (grid, &delta) in self.deltas.iter().enumerate() {
            let family = FamilySpec::BernoulliBoundary { delta };
            let theta = boundary_theta(delta, self.n)?;
            let point = Point {
                family: &family,
                n: self.n,
                root: &root,
                methods: &self.methods,
                alphas: &self.alphas,
                resampling: &self.resampling,
                tau_exponent: 0.5,
                replicates: self.replicates,
                seed: self.seed,
                grid,
            };
            for r in point_rows(&point) {
                let predicted_max = if r.alpha2 > 0.0 { delta } else { 1.0 };
                rows.push(FailureRow {
                    grid,
                    delta,
                    theta,
                    n: self.n,
                    method: r.method,
                    alpha1: r.alpha1,
                    alpha2: r.alpha2,
                    nominal: r.nominal,
                    coverage: r.coverage,
                    se: r.se,
                    replicates: r.replicates,
                    predicted_max,
                    within_prediction: r.coverage.zip(r.se).map(|(c, se)| c <= predicted_max + 3.0 * se),
                    error: r.error,
                });
            }
        }
        Ok(FailureReport { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(root: RootSpec, families: Vec<FamilySpec>, methods: Vec<IntervalMethod>, alphas: Vec<(f64, f64)>) -> CoverageSpec {
        CoverageSpec {
            families,
            n: 60,
            root,
            methods,
            alphas,
            resampling: Resampling { draws: 200, ..Resampling::default() },
            tau_exponent: 0.5,
            replicates: 100,
            seed: 3,
        }
    }

    #[test]
    fn vacuous_level_covers_always() {
        let s = spec(
            RootSpec::Mean,
            vec![FamilySpec::Normal { mu: vec![0.0], sd: None, rho: 0.0 }, FamilySpec::Bernoulli { p: 0.3 }],
            vec![IntervalMethod::SubsamplingFeasible, IntervalMethod::Bootstrap, IntervalMethod::SubsamplingOracle],
            vec![(0.0, 0.0)],
        );
        let r = mc_coverage(&s).unwrap();
        assert!(r.rows.iter().all(|row| row.coverage == Some(1.0)));
        assert!(r.worst.iter().all(|w| w.min_coverage == Some(1.0)));
    }

    #[test]
    fn min_over_grid_is_consistent_and_deterministic() {
        let s = spec(
            RootSpec::MaxStudentizedMean,
            vec![
                FamilySpec::Normal { mu: vec![0.0, 0.0], sd: None, rho: 0.5 },
                FamilySpec::ScaledMixture { mu: vec![0.0, 1.0], p: 0.2, w: 0.5, rho: 0.0 },
            ],
            vec![IntervalMethod::SubsamplingFeasible, IntervalMethod::Bootstrap],
            vec![(0.05, 0.05), (0.0, 0.1)],
        );
        let a = mc_coverage(&s).unwrap();
        for w in &a.worst {
            let min = w.min_coverage.unwrap();
            for row in a.rows.iter().filter(|r| r.method == w.method && r.alpha1 == w.alpha1 && r.alpha2 == w.alpha2) {
                assert!(min <= row.coverage.unwrap());
                assert!((0.0..=1.0).contains(&row.coverage.unwrap()));
            }
        }
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| mc_coverage(&s).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn grid_point_error_is_reported_not_fatal() {
        // Bernoulli(1) makes the studentized root degenerate.
        let s = spec(
            RootSpec::MaxStudentizedMean,
            vec![FamilySpec::Bernoulli { p: 1.0 }, FamilySpec::Normal { mu: vec![0.0], sd: None, rho: 0.0 }],
            vec![IntervalMethod::Bootstrap],
            vec![(0.05, 0.05)],
        );
        let r = mc_coverage(&s).unwrap();
        assert!(!r.rows[0].error.is_empty() && r.rows[0].coverage.is_none());
        assert!(r.rows[1].coverage.is_some());
        assert_eq!(r.worst[0].grid, Some(1));
        assert_eq!(r.worst[0].failed_points, 1);
    }

    #[test]
    fn corrected_bounds_shrink_toward_zero() {
        let s = spec(
            RootSpec::Mean,
            vec![FamilySpec::Normal { mu: vec![0.0], sd: None, rho: 0.0 }],
            vec![IntervalMethod::SubsamplingFeasible, IntervalMethod::SubsamplingCorrected],
            vec![(0.05, 0.05)],
        );
        let r = mc_coverage(&s).unwrap();
        let f = correction_factor(60, 7, 0.5);
        let (a, b) = (&r.rows[0], &r.rows[1]);
        assert!((b.mean_upper.unwrap() - f * a.mean_upper.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn boundary_failure_small_case() {
        let spec = FailureDemoSpec {
            deltas: vec![0.1],
            n: 100,
            alphas: vec![(0.025, 0.025), (0.05, 0.0)],
            methods: bootstrap_only(),
            resampling: Resampling { draws: 200, ..Resampling::default() },
            replicates: 400,
            seed: 1,
        };
        let r = spec.run().unwrap();
        assert_eq!(r.rows[0].within_prediction, Some(true));
        // With α₂ = 0 the upper critical value is +∞ and coverage is not capped.
        assert_eq!(r.rows[1].predicted_max, 1.0);
        assert!(r.rows[1].coverage.unwrap() > 0.9);
    }
}
