//! Finite-sample coverage lower bounds for oracle subsampling,
//!
//! (i)   `P{R_n ≤ L_n⁻¹(1−α₂)} ≥ 1 − (α₂ + ε + δ₁)`,
//! (ii)  `P{R_n ≥ L_n⁻¹(α₁)} ≥ 1 − (α₁ + ε + δ₂)`,
//! (iii) `P{L_n⁻¹(α₁) ≤ R_n ≤ L_n⁻¹(1−α₂)} ≥ 1 − (α₁ + α₂ + ε + δ₃)`,
//!
//! with `δ = (1/(γε))·√(2π/k_n) + I{d > (1−γ)ε}` where `d` is
//! `sup(J_b − J_n)`, `sup(J_n − J_b)` and `sup|J_b − J_n|` respectively,
//! checked against Monte Carlo coverage.

use serde::{Deserialize, Serialize};

use super::coverage::{point_outcomes, Outcome, Point};
use super::{check_grid, check_replicates, default_tau, rate, Resampling};
use crate::dist::{dkw_bound, sup_diff};
use crate::error::{Error, Result};
use crate::families::{oracle_root_distribution, FamilySpec, OracleMode};
use crate::inference::{validate_alphas, IntervalMethod};
use crate::roots::RootSpec;

fn mean_root() -> RootSpec {
    RootSpec::Mean
}

fn exact() -> OracleMode {
    OracleMode::Exact
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeficitSpec {
    pub families: Vec<FamilySpec>,
    pub n: usize,
    pub b: usize,
    #[serde(default = "mean_root")]
    pub root: RootSpec,
    pub epsilon: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// How `J_n` and `J_b` are computed.
    #[serde(default = "exact")]
    pub oracle: OracleMode,
    #[serde(default)]
    pub resampling: Resampling,
    #[serde(default = "default_tau")]
    pub tau_exponent: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DeficitSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.families, "families")?;
        validate_alphas(self.alpha1, self.alpha2)?;
        dkw_bound(self.epsilon, 1)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(1 <= self.b && self.b < self.n) {
            return Err(Error::invalid(format!("b = {} must satisfy 1 <= b < n = {}", self.b, self.n)));
        }
        self.root.validate()?;
        self.resampling.validate()
    }
}

/// The three deficit terms at one law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub markov: f64,
    pub sup_b_minus_n: f64,
    pub sup_n_minus_b: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

/// `δ₁, δ₂, δ₃` from the two one-sided distances between `J_b` and `J_n`.
pub fn deltas(sup_b_minus_n: f64, sup_n_minus_b: f64, k_n: usize, epsilon: f64, gamma: f64) -> Result<Deltas> {
    let markov = dkw_bound(gamma * epsilon, k_n)?;
    let thr = (1.0 - gamma) * epsilon;
    let ind = |d: f64| if d > thr { 1.0 } else { 0.0 };
    Ok(Deltas {
        markov,
        sup_b_minus_n,
        sup_n_minus_b,
        delta1: markov + ind(sup_b_minus_n),
        delta2: markov + ind(sup_n_minus_b),
        delta3: markov + ind(sup_b_minus_n.max(sup_n_minus_b)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitRow {
    pub grid: usize,
    pub family: String,
    pub n: usize,
    pub b: usize,
    pub k_n: usize,
    /// `upper` (i), `lower` (ii) or `two-sided` (iii).
    pub part: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub sup_distance: Option<f64>,
    pub indicator: Option<bool>,
    pub delta: Option<f64>,
    pub lower_bound: Option<f64>,
    pub coverage: Option<f64>,
    pub se: Option<f64>,
    pub replicates: usize,
    /// The bound is at most 0.
    pub vacuous: Option<bool>,
    /// `coverage ≥ lower_bound − 3·SE`.
    pub holds: Option<bool>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub rows: Vec<DeficitRow>,
}

impl DeficitReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds == Some(true))
    }
}

struct PointResult {
    d: Deltas,
    outcomes: Vec<Outcome>,
}

/// Deficit terms and bound checks at each grid point.
pub fn coverage_deficit(spec: &DeficitSpec) -> Result<DeficitReport> {
    spec.validate()?;
    let k_n = spec.n / spec.b;
    let methods = [IntervalMethod::SubsamplingOracle];
    let alphas = [(spec.alpha1, spec.alpha2)];
    let resampling = Resampling { b: Some(spec.b), ..spec.resampling };
    let mut rows = Vec::new();
    for (grid, fspec) in spec.families.iter().enumerate() {
        let label = fspec.label();
        let result = (|| -> Result<PointResult> {
            let family = fspec.at(spec.n)?;
            let params = family.oracle_params(&spec.root, spec.tau_exponent)?;
            let j_n = oracle_root_distribution(&family, &spec.root, &params, spec.n, spec.oracle)?;
            let j_b = oracle_root_distribution(&family, &spec.root, &params, spec.b, spec.oracle)?;
            let d = deltas(sup_diff(&j_b, &j_n), sup_diff(&j_n, &j_b), k_n, spec.epsilon, spec.gamma)?;
            let point = Point {
                family: fspec,
                n: spec.n,
                root: &spec.root,
                methods: &methods,
                alphas: &alphas,
                resampling: &resampling,
                tau_exponent: spec.tau_exponent,
                replicates: spec.replicates,
                seed: spec.seed,
                grid,
            };
            let outcomes = point_outcomes(&point)?.swap_remove(0);
            Ok(PointResult { d, outcomes })
        })();
        match &result {
            Ok(_) => log::info!("deficit grid point {grid} ({label}) done"),
            Err(e) => log::warn!("deficit grid point {grid} ({label}) failed: {e}"),
        }
        let (a1, a2) = (spec.alpha1, spec.alpha2);
        for part in ["upper", "lower", "two-sided"] {
            let mut row = DeficitRow {
                grid,
                family: label.clone(),
                n: spec.n,
                b: spec.b,
                k_n,
                part: part.into(),
                epsilon: spec.epsilon,
                gamma: spec.gamma,
                alpha1: a1,
                alpha2: a2,
                sup_distance: None,
                indicator: None,
                delta: None,
                lower_bound: None,
                coverage: None,
                se: None,
                replicates: 0,
                vacuous: None,
                holds: None,
                error: String::new(),
            };
            match &result {
                Ok(PointResult { d, outcomes }) => {
                    let (dist, delta, alpha, event): (f64, f64, f64, fn(&Outcome) -> bool) = match part {
                        "upper" => (d.sup_b_minus_n, d.delta1, a2, |o| o.root <= o.upper),
                        "lower" => (d.sup_n_minus_b, d.delta2, a1, |o| o.root >= o.lower),
                        _ => (d.sup_b_minus_n.max(d.sup_n_minus_b), d.delta3, a1 + a2, Outcome::covered),
                    };
                    let bound = 1.0 - (alpha + spec.epsilon + delta);
                    let (cov, se, r) = rate(outcomes.iter().map(event));
                    row.sup_distance = Some(dist);
                    row.indicator = Some(delta > d.markov);
                    row.delta = Some(delta);
                    row.lower_bound = Some(bound);
                    row.coverage = Some(cov);
                    row.se = Some(se);
                    row.replicates = r;
                    row.vacuous = Some(bound <= 0.0);
                    row.holds = Some(cov >= bound - 3.0 * se);
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    Ok(DeficitReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_structure() {
        // Close J_b and J_n: indicator off, δ equals the Markov term.
        let d = deltas(0.01, 0.02, 100, 0.5, 0.5).unwrap();
        let markov = (2.0 * std::f64::consts::PI / 100.0).sqrt() / 0.25;
        assert!((d.delta1 - markov).abs() < 1e-15);
        assert_eq!(d.delta1, d.delta3);
        // Far apart in one direction only.
        let d = deltas(0.0, 0.3, 100, 0.5, 0.5).unwrap();
        assert_eq!(d.delta1, d.markov);
        assert_eq!(d.delta2, d.markov + 1.0);
        assert_eq!(d.delta3, d.markov + 1.0);
    }

    #[test]
    fn bernoulli_bound_holds() {
        let spec = DeficitSpec {
            families: vec![FamilySpec::Bernoulli { p: 0.5 }],
            n: 400,
            b: 20,
            root: RootSpec::Mean,
            epsilon: 0.05,
            gamma: 0.5,
            alpha1: 0.025,
            alpha2: 0.025,
            oracle: OracleMode::Exact,
            resampling: Resampling { draws: 300, ..Resampling::default() },
            tau_exponent: 0.5,
            replicates: 200,
            seed: 3,
        };
        let r = coverage_deficit(&spec).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.all_hold());
    }

    #[test]
    fn drift_law_sets_indicator() {
        // Constrained mean under N(h/√n, 1): J_n − J_b is large just below 0.
        let spec = DeficitSpec {
            families: vec![FamilySpec::NormalDrift { h: 3.0 }],
            n: 400,
            b: 20,
            root: RootSpec::ConstrainedMean,
            epsilon: 0.2,
            gamma: 0.5,
            alpha1: 0.25,
            alpha2: 0.0,
            oracle: OracleMode::MonteCarlo { replicates: 20000, seed: 5 },
            resampling: Resampling { draws: 200, ..Resampling::default() },
            tau_exponent: 0.5,
            replicates: 100,
            seed: 3,
        };
        let r = coverage_deficit(&spec).unwrap();
        let lower = r.rows.iter().find(|row| row.part == "lower").unwrap();
        assert_eq!(lower.indicator, Some(true), "{lower:?}");
        assert_eq!(lower.vacuous, Some(true));
        assert_eq!(lower.holds, Some(true));
    }
}
