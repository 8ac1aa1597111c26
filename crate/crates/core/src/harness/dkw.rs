//! Frequency of `sup_x |L_n(x, P) − J_b(x, P)| > ε` against the bound
//! `(1/ε)·√(2π/k_n)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_grid, check_replicates, data_rng, default_tau, rate, resample_seed, Resampling};
use crate::dist::{dkw_bound, kolmogorov_distance};
use crate::error::{Error, Result};
use crate::families::{oracle_root_distribution, FamilySpec, OracleMode};
use crate::roots::RootSpec;
use crate::subsample::subsampling_distribution;

fn mean_root() -> RootSpec {
    RootSpec::Mean
}

fn exact() -> OracleMode {
    OracleMode::Exact
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DkwSpec {
    pub family: FamilySpec,
    #[serde(default = "mean_root")]
    pub root: RootSpec,
    /// Sample sizes; the subsample size `b` is held fixed so `k_n = ⌊n/b⌋` grows.
    pub ns: Vec<usize>,
    pub b: usize,
    pub epsilons: Vec<f64>,
    /// Oracle `J_b`: exact enumeration for finite-support laws, else Monte Carlo.
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

impl DkwSpec {
    pub fn validate(&self) -> Result<()> {
        check_replicates(self.replicates)?;
        check_grid(&self.ns, "ns")?;
        check_grid(&self.epsilons, "epsilons")?;
        for &e in &self.epsilons {
            dkw_bound(e, 1)?;
        }
        for &n in &self.ns {
            if !(1 <= self.b && self.b < n) {
                return Err(Error::invalid(format!("b = {} must satisfy 1 <= b < n = {n}", self.b)));
            }
        }
        self.root.validate()?;
        self.resampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkwRow {
    pub epsilon: f64,
    pub k_n: usize,
    pub violation_rate: Option<f64>,
    /// `min(1, (1/ε)·√(2π/k_n))`.
    pub bound: f64,
    pub se: Option<f64>,
    pub replicates: usize,
    pub n: usize,
    pub b: usize,
    /// The uncapped bound is at least 1, so the check is trivially satisfied.
    pub vacuous: bool,
    /// `violation_rate ≤ bound + 3·SE`.
    pub holds: Option<bool>,
    pub mean_distance: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkwReport {
    pub rows: Vec<DkwRow>,
}

impl DkwReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds == Some(true))
    }

    pub fn row(&self, n: usize, epsilon: f64) -> Option<&DkwRow> {
        self.rows.iter().find(|r| r.n == n && r.epsilon == epsilon)
    }
}

/// For each `n` and `ε`: how often the oracle subsampling distribution
/// `L_n(·, P)` is more than `ε` from `J_b(·, P)` in Kolmogorov distance.
pub fn dkw_check(spec: &DkwSpec) -> Result<DkwReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    for (grid, &n) in spec.ns.iter().enumerate() {
        let result = (|| -> Result<Vec<f64>> {
            let family = spec.family.at(n)?;
            let params = family.oracle_params(&spec.root, spec.tau_exponent)?;
            let j_b = oracle_root_distribution(&family, &spec.root, &params, spec.b, spec.oracle)?;
            (0..spec.replicates)
                .into_par_iter()
                .map(|rep| {
                    let s = family.sample(n, &mut data_rng(spec.seed, grid, rep))?;
                    let plan = spec.resampling.subsample_plan_with_b(n, spec.b, resample_seed(spec.seed, grid, rep, 0))?;
                    let l_n = subsampling_distribution(&s, &spec.root, &params, &plan)?;
                    Ok(kolmogorov_distance(&l_n, &j_b))
                })
                .collect()
        })();
        let k_n = n / spec.b;
        match &result {
            Ok(_) => log::info!("dkw grid point n = {n} done"),
            Err(e) => log::warn!("dkw grid point n = {n} failed: {e}"),
        }
        for &eps in &spec.epsilons {
            let raw = dkw_bound(eps, k_n)?;
            let mut row = DkwRow {
                epsilon: eps,
                k_n,
                violation_rate: None,
                bound: raw.min(1.0),
                se: None,
                replicates: 0,
                n,
                b: spec.b,
                vacuous: raw >= 1.0,
                holds: None,
                mean_distance: None,
                error: String::new(),
            };
            match &result {
                Ok(d) => {
                    let (p, se, r) = rate(d.iter().map(|&x| x > eps));
                    row.violation_rate = Some(p);
                    row.se = Some(se);
                    row.replicates = r;
                    row.holds = Some(p <= row.bound + 3.0 * se);
                    row.mean_distance = Some(d.iter().sum::<f64>() / r as f64);
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
    }
    Ok(DkwReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_small_run() {
        let spec = DkwSpec {
            family: FamilySpec::Bernoulli { p: 0.5 },
            root: RootSpec::Mean,
            ns: vec![100, 400],
            b: 20,
            epsilons: vec![0.1, 0.6],
            oracle: OracleMode::Exact,
            resampling: Resampling { draws: 300, ..Resampling::default() },
            tau_exponent: 0.5,
            replicates: 100,
            seed: 1,
        };
        let r = dkw_check(&spec).unwrap();
        assert!(r.all_hold());
        let small = r.row(100, 0.6).unwrap();
        assert!(small.vacuous && small.bound == 1.0 && small.k_n == 5);
        let big = r.row(400, 0.6).unwrap();
        assert!(!big.vacuous);
        assert!((big.bound - (2.0 * std::f64::consts::PI / 20.0).sqrt() / 0.6).abs() < 1e-12);
        // Larger k_n: L_n concentrates around J_b.
        assert!(r.row(400, 0.1).unwrap().mean_distance.unwrap() < r.row(100, 0.1).unwrap().mean_distance.unwrap());
    }
}
