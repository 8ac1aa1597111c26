//! Subsampling: all (or randomly drawn) size-`b` subsets without replacement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{edf, QuantileLevel, Sample, StepDistribution};
use crate::error::{Error, Result};
use crate::rng::{distinct_indices, stream};
use crate::roots::ustat::{binomial, next_combination};
use crate::roots::{OracleParams, RootSpec};

/// Largest `C(n, b)` enumerated in exhaustive mode.
pub const EXHAUSTIVE_CAP: f64 = 1e6;
pub const DEFAULT_DRAWS: usize = 2000;

/// Draws handled per parallel task.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", try_from = "ModeFields")]
pub enum SubsampleMode {
    /// Every size-`b` subset, in lexicographic order.
    Exhaustive,
    /// `draws` subsets, each uniform over size-`b` subsets, independent across draws.
    Random { draws: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeFields {
    mode: String,
    draws: Option<usize>,
}

impl TryFrom<ModeFields> for SubsampleMode {
    type Error = String;

    fn try_from(m: ModeFields) -> std::result::Result<Self, String> {
        match (m.mode.as_str(), m.draws) {
            ("exhaustive", None) => Ok(SubsampleMode::Exhaustive),
            ("exhaustive", Some(_)) => Err("unknown field `draws` for exhaustive mode".into()),
            ("random", Some(draws)) => Ok(SubsampleMode::Random { draws }),
            ("random", None) => Ok(SubsampleMode::Random { draws: DEFAULT_DRAWS }),
            (other, _) => Err(format!("unknown subsample mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsamplePlan {
    pub n: usize,
    pub b: usize,
    pub mode: SubsampleMode,
    pub seed: u64,
}

impl SubsamplePlan {
    pub fn new(n: usize, b: usize, mode: SubsampleMode, seed: u64) -> Result<Self> {
        let plan = Self { n, b, mode, seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn random(n: usize, b: usize, draws: usize, seed: u64) -> Result<Self> {
        Self::new(n, b, SubsampleMode::Random { draws }, seed)
    }

    pub fn exhaustive(n: usize, b: usize) -> Result<Self> {
        Self::new(n, b, SubsampleMode::Exhaustive, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.b && self.b < self.n) {
            return Err(Error::invalid(format!("subsample size must satisfy 1 <= b < n (b = {}, n = {})", self.b, self.n)));
        }
        match self.mode {
            SubsampleMode::Exhaustive => {
                let count = binomial(self.n, self.b);
                if count > EXHAUSTIVE_CAP {
                    return Err(Error::EnumerationCap { count, cap: EXHAUSTIVE_CAP });
                }
            }
            SubsampleMode::Random { draws } if draws == 0 => return Err(Error::invalid("draws must be positive")),
            SubsampleMode::Random { .. } => {}
        }
        Ok(())
    }

    /// Number of subsets the plan produces.
    pub fn len(&self) -> usize {
        match self.mode {
            SubsampleMode::Exhaustive => binomial(self.n, self.b) as usize,
            SubsampleMode::Random { draws } => draws,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `⌊n / b⌋`, the number of disjoint blocks.
    pub fn k_n(&self) -> usize {
        self.n / self.b
    }

    /// The `i`-th index set of the plan, written into `out` (sorted ascending).
    fn subset_into(&self, i: usize, out: &mut Vec<usize>, mark: &mut Vec<bool>) {
        match self.mode {
            SubsampleMode::Exhaustive => unrank_combination(i, self.n, self.b, out),
            SubsampleMode::Random { .. } => {
                let mut rng = stream(self.seed, &[i as u64]);
                distinct_indices(&mut rng, self.n, self.b, out, mark);
            }
        }
    }
}

/// Subsample-size rule `b = max(floor, ⌊n^γ⌋)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BRule {
    pub gamma: f64,
    pub floor: usize,
}

impl Default for BRule {
    fn default() -> Self {
        Self { gamma: 0.5, floor: 2 }
    }
}

impl BRule {
    pub fn b_for(&self, n: usize) -> Result<usize> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        let b = ((n as f64).powf(self.gamma) + 1e-9).floor() as usize;
        let b = b.max(self.floor);
        if b >= n {
            return Err(Error::invalid(format!("rule gives b = {b}, not below n = {n}")));
        }
        Ok(b)
    }
}

/// The `rank`-th `b`-subset of `0..n` in lexicographic order.
pub fn unrank_combination(mut rank: usize, n: usize, b: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut start = 0;
    for slot in 0..b {
        let remaining = b - slot - 1;
        let mut x = start;
        loop {
            let count = binomial(n - x - 1, remaining) as usize;
            if rank < count {
                break;
            }
            rank -= count;
            x += 1;
        }
        out.push(x);
        start = x + 1;
    }
}

/// Iterator over the plan's index sets.
pub fn generate_subsamples(plan: &SubsamplePlan) -> Result<impl Iterator<Item = Vec<usize>> + '_> {
    plan.validate()?;
    let mut state: Option<Vec<usize>> = None;
    let mut mark = Vec::new();
    let mut i = 0usize;
    let total = plan.len();
    Ok(std::iter::from_fn(move || {
        if i >= total {
            return None;
        }
        let next = match (plan.mode, state.as_mut()) {
            (SubsampleMode::Exhaustive, Some(prev)) => {
                next_combination(prev, plan.n);
                prev.clone()
            }
            _ => {
                let mut out = Vec::with_capacity(plan.b);
                plan.subset_into(i, &mut out, &mut mark);
                out
            }
        };
        if plan.mode == SubsampleMode::Exhaustive {
            state = Some(next.clone());
        }
        i += 1;
        Some(next)
    }))
}

/// Values of a statistic over resamples, with dropped degenerate draws counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled<T> {
    pub values: Vec<T>,
    /// Weight per value; `None` means equal weights.
    pub weights: Option<Vec<f64>>,
    pub dropped: usize,
    pub total: usize,
}

impl Resampled<f64> {
    pub fn distribution(&self) -> Result<StepDistribution> {
        match &self.weights {
            None => edf(&self.values),
            Some(w) => StepDistribution::from_weighted(self.values.iter().copied().zip(w.iter().copied()).collect()),
        }
    }
}

/// Keep degenerate draws out of the result; fail if more than 1% were dropped.
pub(crate) fn collect_dropping<T>(results: Vec<Result<T>>, weights: Option<Vec<f64>>) -> Result<Resampled<T>> {
    let total = results.len();
    let mut values = Vec::with_capacity(total);
    let mut kept_w = weights.as_ref().map(|_| Vec::with_capacity(total));
    let mut dropped = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => {
                values.push(v);
                if let (Some(kw), Some(w)) = (kept_w.as_mut(), weights.as_ref()) {
                    kw.push(w[i]);
                }
            }
            Err(e) if e.is_degenerate() => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped * 100 > total || values.is_empty() {
        return Err(Error::TooManyDegenerate { dropped, total });
    }
    if dropped > 0 {
        log::debug!("dropped {dropped} of {total} degenerate resamples");
    }
    Ok(Resampled { values, weights: kept_w, dropped, total })
}

/// Evaluate `f` on every subsample of the plan. Output order follows the
/// plan's draw order regardless of the thread count.
pub fn subsample_values<T, F>(sample: &Sample, plan: &SubsamplePlan, f: F) -> Result<Resampled<T>>
where
    T: Send,
    F: Fn(&Sample) -> Result<T> + Sync,
{
    plan.validate()?;
    if sample.n() != plan.n {
        return Err(Error::invalid(format!("plan is for n = {}, sample has {} rows", plan.n, sample.n())));
    }
    let total = plan.len();
    let chunks = total.div_ceil(CHUNK);
    let results: Vec<Result<T>> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let (lo, hi) = (c * CHUNK, ((c + 1) * CHUNK).min(total));
            let mut idx = Vec::with_capacity(plan.b);
            let mut mark = Vec::new();
            let mut sub = Sample::scratch(sample.k());
            let mut out = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                if plan.mode == SubsampleMode::Exhaustive && i > lo {
                    next_combination(&mut idx, plan.n);
                } else {
                    plan.subset_into(i, &mut idx, &mut mark);
                }
                sample.gather_rows_into(&idx, &mut sub);
                out.push(f(&sub));
            }
            out
        })
        .collect();
    collect_dropping(results, None)
}

/// `L_n(·)`: the distribution of `root` (at `params`) over the plan's subsamples.
/// Oracle parameters give `L_n(·, P)`; plug-in parameters of the full sample give `L̂_n`.
pub fn subsampling_distribution(
    sample: &Sample,
    root: &RootSpec,
    params: &OracleParams,
    plan: &SubsamplePlan,
) -> Result<StepDistribution> {
    subsample_values(sample, plan, |s| root.evaluate(s, params))?.distribution()
}

/// `L̂_n` with the root centered at the full sample's plug-in parameters.
pub fn feasible_subsampling_distribution(
    sample: &Sample,
    root: &RootSpec,
    plan: &SubsamplePlan,
    tau_exponent: f64,
) -> Result<StepDistribution> {
    let params = root.plug_in_params(sample, tau_exponent)?;
    subsampling_distribution(sample, root, &params, plan)
}

/// `τ_n / (τ_n + τ_b)` with `τ_m = m^τ`.
pub fn correction_factor(n: usize, b: usize, tau_exponent: f64) -> f64 {
    let (tn, tb) = ((n as f64).powf(tau_exponent), (b as f64).powf(tau_exponent));
    tn / (tn + tb)
}

/// Rate-corrected quantile `τ_n/(τ_n+τ_b) · L̂_n⁻¹(α)` for a centered,
/// non-studentized root whose subsample version is recentered at `θ̂_n`.
pub fn corrected_quantile(l_hat: &StepDistribution, n: usize, b: usize, level: QuantileLevel, tau_exponent: f64) -> f64 {
    correction_factor(n, b, tau_exponent) * l_hat.quantile(level)
}

/// Distribution of `τ_b (θ̂_b − θ̂_n) / σ̂_b` over subsamples. Draws with
/// `σ̂_b ≤ 0` count as degenerate.
pub fn studentized_subsampling_distribution<E, S>(
    sample: &Sample,
    theta_hat: E,
    sigma_hat: S,
    plan: &SubsamplePlan,
    tau_exponent: f64,
) -> Result<StepDistribution>
where
    E: Fn(&Sample) -> Result<f64> + Sync,
    S: Fn(&Sample) -> Result<f64> + Sync,
{
    let theta_n = theta_hat(sample)?;
    let tau_b = (plan.b as f64).powf(tau_exponent);
    subsample_values(sample, plan, |s| {
        let sd = sigma_hat(s)?;
        if !(sd > 0.0) {
            return Err(Error::DegenerateCoordinate(0));
        }
        Ok(tau_b * (theta_hat(s)? - theta_n) / sd)
    })?
    .distribution()
}

/// Quantile of [`studentized_subsampling_distribution`]; no rate correction.
pub fn studentized_subsampling_quantile<E, S>(
    sample: &Sample,
    theta_hat: E,
    sigma_hat: S,
    plan: &SubsamplePlan,
    level: QuantileLevel,
    tau_exponent: f64,
) -> Result<f64>
where
    E: Fn(&Sample) -> Result<f64> + Sync,
    S: Fn(&Sample) -> Result<f64> + Sync,
{
    Ok(studentized_subsampling_distribution(sample, theta_hat, sigma_hat, plan, tau_exponent)?.quantile(level))
}
