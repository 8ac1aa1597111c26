//! Nonparametric bootstrap: resamples of size `n` drawn with replacement from
//! the empirical distribution, represented by per-row multiplicities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{QuantileLevel, Sample, StepDistribution};
use crate::error::{Error, Result};
use crate::rng::{index_below, stream};
use crate::roots::{OracleParams, ResampleBase, RootSpec};
use crate::subsample::{collect_dropping, Resampled};

/// Largest `n^n` allowed in exhaustive mode.
pub const EXHAUSTIVE_CAP: f64 = 1e7;
pub const DEFAULT_REPLICATES: usize = 2000;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMode {
    #[default]
    MonteCarlo,
    /// Every distinct resample composition with its multinomial probability.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub mode: BootstrapMode,
    pub seed: u64,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, mode: BootstrapMode::MonteCarlo, seed: 0 }
    }
}

impl BootstrapPlan {
    pub fn monte_carlo(replicates: usize, seed: u64) -> Self {
        Self { replicates, mode: BootstrapMode::MonteCarlo, seed }
    }

    pub fn exhaustive() -> Self {
        Self { replicates: 0, mode: BootstrapMode::Exhaustive, seed: 0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        match self.mode {
            BootstrapMode::MonteCarlo if self.replicates == 0 => Err(Error::invalid("replicates must be positive")),
            BootstrapMode::Exhaustive => {
                let count = (n as f64).powi(n as i32);
                if count > EXHAUSTIVE_CAP {
                    Err(Error::EnumerationCap { count, cap: EXHAUSTIVE_CAP })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Multiplicities of the `r`-th Monte Carlo resample.
pub fn resample_counts(seed: u64, r: usize, n: usize, counts: &mut Vec<u32>) {
    counts.clear();
    counts.resize(n, 0);
    let mut rng = stream(seed, &[r as u64]);
    for _ in 0..n {
        counts[index_below(&mut rng, n)] += 1;
    }
}

/// All compositions of `n` into `n` nonnegative parts with probabilities
/// `n! / (∏ c_i! · n^n)`.
fn compositions(n: usize) -> (Vec<Vec<u32>>, Vec<f64>) {
    let fact: Vec<f64> = (0..=n).scan(1.0, |f, i| {
        if i > 0 {
            *f *= i as f64;
        }
        Some(*f)
    })
    .collect();
    let total = (n as f64).powi(n as i32);
    let mut out = Vec::new();
    let mut weights = Vec::new();
    let mut c = vec![0u32; n];
    fn rec(i: usize, left: u32, c: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == c.len() {
            c[i] = left;
            out.push(c.clone());
            return;
        }
        for v in (0..=left).rev() {
            c[i] = v;
            rec(i + 1, left - v, c, out);
        }
    }
    rec(0, n as u32, &mut c, &mut out);
    for comp in &out {
        let denom: f64 = comp.iter().map(|&k| fact[k as usize]).product();
        weights.push(fact[n] / denom / total);
    }
    (out, weights)
}

/// Evaluate `f(base, counts)` over the plan's resamples. Single-column bases
/// are sorted (see [`ResampleBase`]); output order follows replicate order.
pub fn bootstrap_values<T, F>(sample: &Sample, plan: &BootstrapPlan, f: F) -> Result<Resampled<T>>
where
    T: Send,
    F: Fn(&ResampleBase, &[u32]) -> Result<T> + Sync,
{
    let n = sample.n();
    plan.validate(n)?;
    let base = ResampleBase::new(sample);
    match plan.mode {
        BootstrapMode::MonteCarlo => {
            let total = plan.replicates;
            let results: Vec<Result<T>> = (0..total.div_ceil(CHUNK))
                .into_par_iter()
                .flat_map_iter(|c| {
                    let (lo, hi) = (c * CHUNK, ((c + 1) * CHUNK).min(total));
                    let mut counts = Vec::with_capacity(n);
                    let mut out = Vec::with_capacity(hi - lo);
                    for r in lo..hi {
                        resample_counts(plan.seed, r, n, &mut counts);
                        out.push(f(&base, &counts));
                    }
                    out
                })
                .collect();
            collect_dropping(results, None)
        }
        BootstrapMode::Exhaustive => {
            let (comps, weights) = compositions(n);
            let results: Vec<Result<T>> = comps.par_iter().map(|c| f(&base, c)).collect();
            collect_dropping(results, Some(weights))
        }
    }
}

/// `J_n(·, P̂_n)`: distribution of `root` over bootstrap resamples, with the
/// root centered at `params` (normally the plug-in parameters of `sample`).
pub fn bootstrap_distribution(
    sample: &Sample,
    root: &RootSpec,
    params: &OracleParams,
    plan: &BootstrapPlan,
) -> Result<StepDistribution> {
    let k = sample.k();
    bootstrap_values(sample, plan, |base, counts| {
        let mut scratch = Sample::scratch(k);
        root.evaluate_counts(base, counts, params, &mut scratch)
    })?
    .distribution()
}

/// [`bootstrap_distribution`] with the plug-in parameters of `sample`.
pub fn feasible_bootstrap_distribution(
    sample: &Sample,
    root: &RootSpec,
    plan: &BootstrapPlan,
    tau_exponent: f64,
) -> Result<StepDistribution> {
    let params = root.plug_in_params(sample, tau_exponent)?;
    bootstrap_distribution(sample, root, &params, plan)
}

/// `J_n⁻¹(α, P̂_n)`; `α = 0` gives `−∞`.
pub fn bootstrap_quantile(
    sample: &Sample,
    root: &RootSpec,
    params: &OracleParams,
    plan: &BootstrapPlan,
    level: QuantileLevel,
) -> Result<f64> {
    Ok(bootstrap_distribution(sample, root, params, plan)?.quantile(level))
}
