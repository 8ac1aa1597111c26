//! Kolmogorov–Smirnov root `sup_t √n |P̂_n(−∞,t] − F(t)|`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist::{kolmogorov_distance, Sample, StepDistribution};
use crate::error::{Error, Result};

/// A distribution function the KS root can be evaluated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CdfSpec {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// Step-function CDF (discrete law or an empirical distribution).
    #[serde(skip)]
    Step(Arc<StepDistribution>),
}

impl CdfSpec {
    pub fn step(dist: StepDistribution) -> Self {
        CdfSpec::Step(Arc::new(dist))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CdfSpec::Uniform { lo, hi } if !(lo < hi) => Err(Error::invalid("uniform cdf needs lo < hi")),
            CdfSpec::Normal { sd, .. } if !(sd > 0.0) => Err(Error::invalid("normal cdf needs sd > 0")),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CdfSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            CdfSpec::Normal { mean, sd } => Normal::new(*mean, *sd).map(|d| d.cdf(x)).unwrap_or(f64::NAN),
            CdfSpec::Step(d) => d.cdf(x),
        }
    }
}

/// KS root of a 1-column sample.
///
/// Continuous `F`: `√n · max_i max(i/n − F(X_(i)), F(X_(i)) − (i−1)/n)`.
/// Step `F`: the Kolmogorov distance on the merged support.
pub fn ks_root(sample: &Sample, cdf: &CdfSpec) -> Result<f64> {
    if sample.k() != 1 {
        return Err(Error::invalid("ks root needs a 1-column sample"));
    }
    let mut xs = sample.column_vec(0);
    xs.sort_unstable_by(f64::total_cmp);
    ks_root_sorted(&xs, cdf)
}

pub(crate) fn ks_root_sorted(xs: &[f64], cdf: &CdfSpec) -> Result<f64> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let d = match cdf {
        CdfSpec::Step(f) => kolmogorov_distance(&StepDistribution::from_sorted_values(xs), f),
        _ => {
            let normal = match *cdf {
                CdfSpec::Normal { mean, sd } => Some(Normal::new(mean, sd).map_err(|e| Error::invalid(e.to_string()))?),
                _ => None,
            };
            let mut d = 0.0f64;
            for (i, &x) in xs.iter().enumerate() {
                let fx = match &normal {
                    Some(nd) => nd.cdf(x),
                    None => cdf.eval(x),
                };
                d = d.max((i + 1) as f64 / nf - fx).max(fx - i as f64 / nf);
            }
            d
        }
    };
    Ok(nf.sqrt() * d)
}

/// KS root of the resample repeating `sorted_base[i]` `counts[i]` times.
/// `sorted_base` must be ascending.
pub(crate) fn ks_root_counts(sorted_base: &[f64], counts: &[u32], cdf: &CdfSpec) -> Result<f64> {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let d = match cdf {
        CdfSpec::Step(f) => {
            // Walk the union of both supports; at every point compare the
            // right-continuous values, which also covers left limits.
            let (fs, fc) = (f.support(), f.cum_probs());
            let (mut i, mut j) = (0usize, 0usize);
            let mut cum = 0u64;
            let mut fcur = 0.0;
            let mut d = 0.0f64;
            loop {
                while i < sorted_base.len() && counts[i] == 0 {
                    i += 1;
                }
                let x = match (sorted_base.get(i), fs.get(j)) {
                    (Some(&a), Some(&b)) => a.min(b),
                    (Some(&a), None) => a,
                    (None, Some(&b)) => b,
                    (None, None) => break,
                };
                while i < sorted_base.len() && sorted_base[i] <= x {
                    cum += counts[i] as u64;
                    i += 1;
                }
                while j < fs.len() && fs[j] <= x {
                    fcur = fc[j];
                    j += 1;
                }
                d = d.max((cum as f64 / nf - fcur).abs());
            }
            d
        }
        _ => {
            let mut cum = 0u64;
            let mut d = 0.0f64;
            for (i, &x) in sorted_base.iter().enumerate() {
                let c = counts[i] as u64;
                if c == 0 {
                    continue;
                }
                let fx = cdf.eval(x);
                d = d.max(fx - cum as f64 / nf);
                cum += c;
                d = d.max(cum as f64 / nf - fx);
            }
            d
        }
    };
    Ok(nf.sqrt() * d)
}
