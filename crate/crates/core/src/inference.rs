//! Confidence intervals, moment-inequality tests and the stepdown
//! multiple-testing procedure built on the resampling engines.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_distribution, bootstrap_values, BootstrapPlan};
use crate::dist::{edf, QuantileLevel, Sample, StepDistribution};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::roots::{aqlr_root, moment_max_stat, OracleParams, ParamSource, RootSpec, SampleStats};
use crate::subsample::{
    correction_factor, subsample_values, subsampling_distribution, SubsamplePlan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Subsampling with the root evaluated at hypothesized parameter values
    /// (test inversion over a grid).
    SubsamplingOracle,
    /// Subsampling with the root recentered at the full-sample estimate.
    SubsamplingFeasible,
    /// Feasible subsampling with the `τ_n/(τ_n+τ_b)` rate correction.
    SubsamplingCorrected,
    /// Subsampling of the studentized root, no rate correction.
    SubsamplingStudentized,
    Bootstrap,
}

impl IntervalMethod {
    pub fn name(self) -> &'static str {
        match self {
            IntervalMethod::SubsamplingOracle => "subsampling-oracle",
            IntervalMethod::SubsamplingFeasible => "subsampling-feasible",
            IntervalMethod::SubsamplingCorrected => "subsampling-corrected",
            IntervalMethod::SubsamplingStudentized => "subsampling-studentized",
            IntervalMethod::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub alpha1: f64,
    pub alpha2: f64,
    pub method: IntervalMethod,
}

impl IntervalSpec {
    pub fn new(alpha1: f64, alpha2: f64, method: IntervalMethod) -> Result<Self> {
        validate_alphas(alpha1, alpha2)?;
        Ok(Self { alpha1, alpha2, method })
    }

    pub fn validate(&self) -> Result<()> {
        validate_alphas(self.alpha1, self.alpha2)
    }
}

/// `α₁, α₂ ≥ 0` and `α₁ + α₂ < 1`.
pub fn validate_alphas(alpha1: f64, alpha2: f64) -> Result<()> {
    if !(alpha1 >= 0.0 && alpha2 >= 0.0) {
        return Err(Error::invalid(format!("alpha1 and alpha2 must be nonnegative (got {alpha1}, {alpha2})")));
    }
    if !(alpha1 + alpha2 < 1.0) {
        return Err(Error::invalid(format!("alpha1 + alpha2 must be below 1 (got {})", alpha1 + alpha2)));
    }
    Ok(())
}

/// `ĉ(α)` with `ĉ(0) = −∞` and `ĉ(1) = +∞`; otherwise the generalized inverse.
pub fn critical_value(dist: &StepDistribution, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        f64::NEG_INFINITY
    } else if alpha >= 1.0 {
        f64::INFINITY
    } else {
        dist.quantile(QuantileLevel::clamped(alpha))
    }
}

/// Whether `ĉ(α₁) ≤ r ≤ ĉ(1−α₂)`.
pub fn covers(dist: &StepDistribution, r: f64, alpha1: f64, alpha2: f64) -> bool {
    critical_value(dist, alpha1) <= r && r <= critical_value(dist, 1.0 - alpha2)
}

/// A (possibly unbounded or empty) interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// No parameter value was accepted.
    pub empty: bool,
    /// Accepted grid values were not contiguous; `lower..upper` is their hull.
    pub non_convex: bool,
}

impl Interval {
    pub fn bounded(lower: f64, upper: f64) -> Self {
        Self { lower, upper, empty: false, non_convex: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && self.lower <= x && x <= self.upper
    }
}

/// `[θ̂ − scale·ĉ(1−α₂)/τ_n, θ̂ − scale·ĉ(α₁)/τ_n]` for a root `τ_n(θ̂ − θ)/scale`.
pub fn location_interval(theta_hat: f64, tau_n: f64, scale: f64, dist: &StepDistribution, alpha1: f64, alpha2: f64) -> Interval {
    let hi_q = critical_value(dist, 1.0 - alpha2);
    let lo_q = critical_value(dist, alpha1);
    Interval::bounded(theta_hat - scale * hi_q / tau_n, theta_hat - scale * lo_q / tau_n)
}

/// The set of grid values accepted by `accept`, reported as its hull.
pub fn invert_over_grid<F>(grid: &[f64], mut accept: F) -> Result<Interval>
where
    F: FnMut(f64) -> Result<bool>,
{
    let mut hits = Vec::with_capacity(grid.len());
    for &theta in grid {
        hits.push(accept(theta)?);
    }
    let first = hits.iter().position(|&h| h);
    let last = hits.iter().rposition(|&h| h);
    Ok(match (first, last) {
        (Some(a), Some(b)) => Interval {
            lower: grid[a],
            upper: grid[b],
            empty: false,
            non_convex: hits[a..=b].iter().any(|&h| !h),
        },
        _ => Interval { lower: f64::NAN, upper: f64::NAN, empty: true, non_convex: false },
    })
}

/// Resampling plans available to [`confidence_interval`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Plans {
    pub subsample: Option<SubsamplePlan>,
    pub bootstrap: Option<BootstrapPlan>,
}

/// Point estimate of a location-type root's parameter.
fn location_estimate(root: &RootSpec, params: &OracleParams) -> Option<f64> {
    match root {
        RootSpec::Mean => params.mu.first().copied(),
        RootSpec::UStat { .. } => params.theta,
        _ => None,
    }
}

fn with_theta(root: &RootSpec, base: &OracleParams, theta: f64) -> OracleParams {
    let mut p = base.clone();
    p.source = ParamSource::Oracle;
    match root {
        RootSpec::UStat { .. } => p.theta = Some(theta),
        _ => p.mu = vec![theta],
    }
    p
}

/// Confidence set for the scalar parameter of a 1-column root.
///
/// Location roots (`mean`, `u-stat`) are inverted in closed form. The oracle
/// method and all other roots invert `{ĉ_θ(α₁) ≤ R_n(θ) ≤ ĉ_θ(1−α₂)}` over
/// `theta_grid`, where `ĉ_θ` subsamples the root at the hypothesized value.
pub fn confidence_interval(
    sample: &Sample,
    root: &RootSpec,
    spec: &IntervalSpec,
    plans: &Plans,
    tau_exponent: f64,
    theta_grid: Option<&[f64]>,
) -> Result<Interval> {
    spec.validate()?;
    let (a1, a2) = (spec.alpha1, spec.alpha2);
    if a1 == 0.0 && a2 == 0.0 {
        return Ok(Interval::bounded(f64::NEG_INFINITY, f64::INFINITY));
    }
    let n = sample.n();
    let tau_n = (n as f64).powf(tau_exponent);
    let plug = root.plug_in_params(sample, tau_exponent)?;
    let need_sub = || plans.subsample.ok_or_else(|| Error::invalid("method needs a subsample plan"));
    let theta_hat = location_estimate(root, &plug);

    match (spec.method, theta_hat) {
        (IntervalMethod::SubsamplingFeasible, Some(th)) => {
            let d = subsampling_distribution(sample, root, &plug, &need_sub()?)?;
            Ok(location_interval(th, tau_n, 1.0, &d, a1, a2))
        }
        (IntervalMethod::SubsamplingCorrected, Some(th)) => {
            let plan = need_sub()?;
            let d = subsampling_distribution(sample, root, &plug, &plan)?;
            let f = correction_factor(n, plan.b, tau_exponent);
            Ok(location_interval(th, tau_n, f, &d, a1, a2))
        }
        (IntervalMethod::Bootstrap, Some(th)) => {
            let plan = plans.bootstrap.ok_or_else(|| Error::invalid("bootstrap method needs a bootstrap plan"))?;
            let d = bootstrap_distribution(sample, root, &plug, &plan)?;
            Ok(location_interval(th, tau_n, 1.0, &d, a1, a2))
        }
        (IntervalMethod::SubsamplingStudentized, _) => {
            if !matches!(root, RootSpec::Mean) {
                return Err(Error::Unsupported("studentized intervals are implemented for the mean root".into()));
            }
            let plan = need_sub()?;
            let d = crate::subsample::studentized_subsampling_distribution(
                sample,
                |s| Ok(s.means()[0]),
                |s| Ok(s.column_moments()[0].1),
                &plan,
                tau_exponent,
            )?;
            let sd = sample.column_moments()[0].1;
            Ok(location_interval(sample.means()[0], tau_n, sd, &d, a1, a2))
        }
        (IntervalMethod::Bootstrap, None) => {
            Err(Error::Unsupported(format!("bootstrap interval for non-location root `{}`", root.name())))
        }
        _ => {
            let grid = theta_grid.ok_or_else(|| Error::invalid("test inversion needs a theta grid"))?;
            let plan = need_sub()?;
            let feasible = spec.method != IntervalMethod::SubsamplingOracle;
            let shared = if feasible { Some(subsampling_distribution(sample, root, &plug, &plan)?) } else { None };
            invert_over_grid(grid, |theta| {
                let p = with_theta(root, &plug, theta);
                let r = root.evaluate(sample, &p)?;
                let owned;
                let d = match &shared {
                    Some(d) => d,
                    None => {
                        owned = subsampling_distribution(sample, root, &p, &plan)?;
                        &owned
                    }
                };
                Ok(covers(d, r, a1, a2))
            })
        }
    }
}

/// One step of a stepdown run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub active: Vec<usize>,
    pub critical_value: f64,
    pub rejected: Vec<usize>,
}

/// Serializable outcome of a test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub method: String,
    pub reject: bool,
    pub step_trace: Vec<StepRecord>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Reject iff `max_j √n X̄_j/S_j` exceeds the `1−α` quantile of the same
/// statistic over subsamples.
pub fn moment_test_subsampling(sample: &Sample, alpha: f64, plan: &SubsamplePlan) -> Result<DecisionRecord> {
    check_alpha(alpha)?;
    let t = moment_max_stat(sample)?;
    let d = subsampling_distribution(sample, &RootSpec::MomentMaxStat, &OracleParams::default(), plan)?;
    let cv = critical_value(&d, 1.0 - alpha);
    Ok(DecisionRecord {
        statistic: t,
        critical_value: cv,
        alpha,
        method: "subsampling".into(),
        reject: t > cv,
        step_trace: Vec::new(),
    })
}

/// Reject iff the AQLR statistic exceeds the `1−α` bootstrap quantile of the
/// AQLR root recentered at the sample mean.
pub fn moment_test_bootstrap_aqlr(sample: &Sample, alpha: f64, eps: f64, plan: &BootstrapPlan) -> Result<DecisionRecord> {
    check_alpha(alpha)?;
    let k = sample.k();
    let t = aqlr_root(sample, &vec![0.0; k], eps)?;
    let root = RootSpec::AqlrStat { eps };
    let params = root.plug_in_params(sample, 0.5)?;
    let d = bootstrap_distribution(sample, &root, &params, plan)?;
    let cv = critical_value(&d, 1.0 - alpha);
    Ok(DecisionRecord {
        statistic: t,
        critical_value: cv,
        alpha,
        method: "bootstrap-aqlr".into(),
        reject: t > cv,
        step_trace: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepdownMethod {
    /// Subsample the uncentered studentized means `√b X̄_{b,j} / S_{b,j}`.
    Subsampling,
    /// Bootstrap the centered studentized means `√n (X̄*_j − X̄_j) / S*_j`.
    Bootstrap,
}

/// Per-draw, per-coordinate resampled statistics shared by every step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepdownDraws {
    k: usize,
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl StepdownDraws {
    pub fn subsampling(sample: &Sample, plan: &SubsamplePlan) -> Result<Self> {
        let k = sample.k();
        let zeros = vec![0.0; k];
        let r = subsample_values(sample, plan, |s| Ok(SampleStats::from_sample(s, false)?.z(&zeros)))?;
        Ok(Self { k, values: r.values.concat(), weights: r.weights })
    }

    pub fn bootstrap(sample: &Sample, plan: &BootstrapPlan) -> Result<Self> {
        let k = sample.k();
        let r = bootstrap_values(sample, plan, |base, counts| {
            Ok(SampleStats::from_counts(base.sample(), counts, base.means(), false)?.z(base.means()))
        })?;
        Ok(Self { k, values: r.values.concat(), weights: r.weights })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.k.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distribution over draws of `max_{j ∈ active} value_j`.
    pub fn max_distribution(&self, active: &[usize]) -> Result<StepDistribution> {
        let maxes: Vec<f64> = self
            .values
            .chunks(self.k)
            .map(|row| active.iter().map(|&j| row[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        match &self.weights {
            None => edf(&maxes),
            Some(w) => StepDistribution::from_weighted(maxes.into_iter().zip(w.iter().copied()).collect()),
        }
    }
}

/// Rejected hypotheses and the full step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepdownResult {
    pub statistics: Vec<f64>,
    pub rejected: Vec<usize>,
    pub trace: Vec<StepRecord>,
}

impl StepdownResult {
    pub fn record(&self, alpha: f64, method: StepdownMethod) -> DecisionRecord {
        DecisionRecord {
            statistic: self.statistics.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            critical_value: self.trace.first().map_or(f64::INFINITY, |s| s.critical_value),
            alpha,
            method: match method {
                StepdownMethod::Subsampling => "stepdown-subsampling".into(),
                StepdownMethod::Bootstrap => "stepdown-bootstrap".into(),
            },
            reject: !self.rejected.is_empty(),
            step_trace: self.trace.clone(),
        }
    }

    /// Critical values nonincreasing and rejections only growing.
    pub fn trace_is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| {
            w[1].critical_value <= w[0].critical_value && w[0].rejected.iter().all(|j| !w[1].active.contains(j))
        })
    }
}

/// Stepdown over hypotheses `H_j: μ_j ≤ 0` given their statistics.
/// `critical_value_for(step, active)` returns the step's critical value.
pub fn stepdown_with<C>(statistics: &[f64], alpha: f64, mut critical_value_for: C) -> Result<StepdownResult>
where
    C: FnMut(usize, &[usize]) -> Result<f64>,
{
    check_alpha(alpha)?;
    let mut active: Vec<usize> = (0..statistics.len()).collect();
    let mut rejected = Vec::new();
    let mut trace = Vec::new();
    let mut step = 1;
    while !active.is_empty() {
        let cv = critical_value_for(step, &active)?;
        let newly: Vec<usize> = active.iter().copied().filter(|&j| statistics[j] > cv).collect();
        trace.push(StepRecord { step, active: active.clone(), critical_value: cv, rejected: newly.clone() });
        if newly.is_empty() {
            break;
        }
        active.retain(|j| !newly.contains(j));
        rejected.extend(newly);
        step += 1;
    }
    rejected.sort_unstable();
    Ok(StepdownResult { statistics: statistics.to_vec(), rejected, trace })
}

/// Options for [`stepdown_fwer`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepdownPlan {
    pub subsample: Option<SubsamplePlan>,
    pub bootstrap: Option<BootstrapPlan>,
    /// Redraw resamples at every step instead of reusing one set.
    pub fresh_draws: bool,
}

impl StepdownPlan {
    /// Resampled statistics for `step`; every step shares step 1's draws
    /// unless `fresh_draws` is set.
    pub fn draws(&self, sample: &Sample, method: StepdownMethod, step: usize) -> Result<StepdownDraws> {
        let salt = |seed: u64| if self.fresh_draws && step > 1 { derive_seed(seed, &[step as u64]) } else { seed };
        match method {
            StepdownMethod::Subsampling => {
                let mut p = self.subsample.ok_or_else(|| Error::invalid("subsampling stepdown needs a subsample plan"))?;
                p.seed = salt(p.seed);
                StepdownDraws::subsampling(sample, &p)
            }
            StepdownMethod::Bootstrap => {
                let mut p = self.bootstrap.ok_or_else(|| Error::invalid("bootstrap stepdown needs a bootstrap plan"))?;
                p.seed = salt(p.seed);
                StepdownDraws::bootstrap(sample, &p)
            }
        }
    }
}

/// `√n X̄_j / S_j` for every column.
pub fn studentized_means(sample: &Sample) -> Result<Vec<f64>> {
    Ok(SampleStats::from_sample(sample, false)?.z(&vec![0.0; sample.k()]))
}

/// Stepdown control of the familywise error rate for `H_j: μ_j ≤ 0`.
pub fn stepdown_fwer(sample: &Sample, alpha: f64, method: StepdownMethod, plan: &StepdownPlan) -> Result<StepdownResult> {
    check_alpha(alpha)?;
    let stats = studentized_means(sample)?;
    let level = 1.0 - alpha;
    if plan.fresh_draws {
        stepdown_with(&stats, alpha, |step, active| {
            Ok(critical_value(&plan.draws(sample, method, step)?.max_distribution(active)?, level))
        })
    } else {
        let common = plan.draws(sample, method, 1)?;
        stepdown_with(&stats, alpha, |_, active| Ok(critical_value(&common.max_distribution(active)?, level)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Family;
    use crate::rng::stream;

    #[test]
    fn vacuous_level_is_whole_line() {
        let s = Sample::from_column(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let spec = IntervalSpec::new(0.0, 0.0, IntervalMethod::SubsamplingFeasible).unwrap();
        let plans = Plans { subsample: Some(SubsamplePlan::exhaustive(4, 2).unwrap()), bootstrap: None };
        let i = confidence_interval(&s, &RootSpec::Mean, &spec, &plans, 0.5, None).unwrap();
        assert_eq!((i.lower, i.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn alpha_sum_rejected() {
        assert!(IntervalSpec::new(0.5, 0.5, IntervalMethod::Bootstrap).is_err());
        assert!(IntervalSpec::new(-0.1, 0.05, IntervalMethod::Bootstrap).is_err());
    }

    #[test]
    fn point_mass_gives_degenerate_interval() {
        let d = StepDistribution::point_mass(0.0);
        let i = location_interval(1.7, 10.0, 1.0, &d, 0.05, 0.05);
        assert_eq!((i.lower, i.upper), (1.7, 1.7));
    }

    #[test]
    fn four_point_one_sided_interval() {
        // Subsample roots √2(X̄_b − 1.5) over the six pairs of {0,1,2,3}:
        // √2·{−1, −0.5, 0, 0, 0.5, 1}. ĉ(0.5) = 0 (F(0) = 4/6 ≥ 0.5, F(−0.5√2) = 2/6).
        let s = Sample::from_column(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let spec = IntervalSpec::new(0.0, 0.5, IntervalMethod::SubsamplingFeasible).unwrap();
        let plans = Plans { subsample: Some(SubsamplePlan::exhaustive(4, 2).unwrap()), bootstrap: None };
        let i = confidence_interval(&s, &RootSpec::Mean, &spec, &plans, 0.5, None).unwrap();
        assert_eq!(i.lower, 1.5);
        assert_eq!(i.upper, f64::INFINITY);
        // α₂ = 0.2: ĉ(0.8) = 0.5√2 → lower = 1.5 − 0.5√2/2.
        let spec = IntervalSpec::new(0.0, 0.2, IntervalMethod::SubsamplingFeasible).unwrap();
        let i = confidence_interval(&s, &RootSpec::Mean, &spec, &plans, 0.5, None).unwrap();
        assert!((i.lower - (1.5 - 0.5 * 2f64.sqrt() / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_inversion_flags() {
        let grid = [0.0, 1.0, 2.0, 3.0, 4.0];
        let i = invert_over_grid(&grid, |t| Ok(t == 1.0 || t == 3.0)).unwrap();
        assert!(i.non_convex && !i.empty);
        assert_eq!((i.lower, i.upper), (1.0, 3.0));
        let i = invert_over_grid(&grid, |_| Ok(false)).unwrap();
        assert!(i.empty);
    }

    #[test]
    fn oracle_inversion_matches_location_form_for_mean() {
        // For the mean root the oracle subsampling distribution centered at θ
        // is a shift of the feasible one, so inversion recovers a similar set.
        let f = Family::normal(vec![0.3], vec![1.0], 0.0).unwrap();
        let s = f.sample(40, &mut stream(2, &[])).unwrap();
        let plans = Plans { subsample: Some(SubsamplePlan::random(40, 6, 1000, 5).unwrap()), bootstrap: None };
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 * 0.005).collect();
        let spec = IntervalSpec::new(0.05, 0.05, IntervalMethod::SubsamplingOracle).unwrap();
        let i = confidence_interval(&s, &RootSpec::Mean, &spec, &plans, 0.5, Some(&grid)).unwrap();
        assert!(!i.empty && i.contains(s.means()[0]));
    }

    #[test]
    fn interval_nesting_and_scale_equivariance() {
        let data = vec![0.3, 1.9, -0.4, 2.2, 0.0, 1.1, 0.7];
        let s = Sample::from_column(data.clone()).unwrap();
        let plans = Plans { subsample: Some(SubsamplePlan::exhaustive(7, 3).unwrap()), bootstrap: None };
        let ci = |s: &Sample, a1, a2| {
            let spec = IntervalSpec::new(a1, a2, IntervalMethod::SubsamplingFeasible).unwrap();
            confidence_interval(s, &RootSpec::Mean, &spec, &plans, 0.5, None).unwrap()
        };
        let wide = ci(&s, 0.05, 0.05);
        for (a1, a2) in [(0.1, 0.05), (0.05, 0.2), (0.25, 0.25)] {
            let narrow = ci(&s, a1, a2);
            assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
        }
        // Scaling by a power of two keeps every operation exact.
        let c = 4.0;
        let scaled = Sample::from_column(data.iter().map(|x| c * x).collect()).unwrap();
        let (a, b) = (ci(&s, 0.1, 0.1), ci(&scaled, 0.1, 0.1));
        let (m, mc) = (s.means()[0], scaled.means()[0]);
        assert_eq!(c * (m - a.lower), mc - b.lower);
        assert_eq!(c * (a.upper - m), b.upper - mc);
    }

    #[test]
    fn moment_test_accepts_below_support_and_rejects_large_means() {
        let f = Family::normal(vec![3.0, 3.0], vec![1.0, 1.0], 0.0).unwrap();
        let s = f.sample(200, &mut stream(1, &[])).unwrap();
        let plan = SubsamplePlan::random(200, 14, 500, 3).unwrap();
        assert!(moment_test_subsampling(&s, 0.05, &plan).unwrap().reject);
        assert!(moment_test_bootstrap_aqlr(&s, 0.05, 0.05, &BootstrapPlan::monte_carlo(300, 2)).unwrap().reject);

        let neg = Family::normal(vec![-1.0, -1.0], vec![1.0, 1.0], 0.0).unwrap();
        let s = neg.sample(200, &mut stream(2, &[])).unwrap();
        let r = moment_test_bootstrap_aqlr(&s, 0.05, 0.05, &BootstrapPlan::monte_carlo(300, 2)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject && r.critical_value >= 0.0);
    }

    #[test]
    fn moment_test_statistic_below_support() {
        // Statistic far below every subsample statistic → accept.
        let mut v = vec![-5.0, -4.0];
        v.extend((0..10).map(|i| 1.0 + i as f64 * 0.1));
        let s = Sample::from_column(v).unwrap();
        let plan = SubsamplePlan::exhaustive(12, 2).unwrap();
        let r = moment_test_subsampling(&s, 0.05, &plan).unwrap();
        assert!(!r.reject);
    }

    #[test]
    fn symmetric_boundary_rejects_about_half() {
        // k = 1, μ = 0, α = 0.5.
        let f = Family::normal(vec![0.0], vec![1.0], 0.0).unwrap();
        let reps = 400;
        let mut rejections = 0;
        for r in 0..reps {
            let s = f.sample(200, &mut stream(10, &[r])).unwrap();
            let plan = SubsamplePlan::random(200, 14, 300, r).unwrap();
            rejections += moment_test_subsampling(&s, 0.5, &plan).unwrap().reject as usize;
        }
        let rate = rejections as f64 / reps as f64;
        let se = (0.25 / reps as f64).sqrt();
        assert!((rate - 0.5).abs() <= 3.0 * se, "{rate}");
    }

    #[test]
    fn aqlr_k1_matches_scalar_implementation() {
        // Independent scalar version: T = max(t, 0)² with bootstrap roots
        // max(t*, 0)² where t* = √n (X̄* − X̄)/S*.
        let f = Family::normal(vec![0.1], vec![1.0], 0.0).unwrap();
        for d in 0..100u64 {
            let s = f.sample(30, &mut stream(20, &[d])).unwrap();
            let plan = BootstrapPlan::monte_carlo(199, d);
            let rec = moment_test_bootstrap_aqlr(&s, 0.1, 0.05, &plan).unwrap();
            let xs = s.as_slice();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            let t = (n.sqrt() * mean / sd).max(0.0).powi(2);
            let mut sorted = xs.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut roots = Vec::new();
            for r in 0..199 {
                let mut counts = Vec::new();
                crate::bootstrap::resample_counts(d, r, xs.len(), &mut counts);
                let vals: Vec<f64> =
                    sorted.iter().zip(&counts).flat_map(|(x, &c)| std::iter::repeat(*x).take(c as usize)).collect();
                let m = vals.iter().sum::<f64>() / n;
                let sdr = (vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
                roots.push((n.sqrt() * (m - mean) / sdr).max(0.0).powi(2));
            }
            roots.sort_by(f64::total_cmp);
            let idx = ((0.9 * 199.0f64) - 1e-9).ceil() as usize - 1;
            let cv = roots[idx];
            assert!((rec.statistic - t).abs() < 1e-9);
            assert!((rec.critical_value - cv).abs() < 1e-9, "dataset {d}: {} vs {cv}", rec.critical_value);
            assert_eq!(rec.reject, t > cv);
        }
    }

    fn synthetic_two_column() -> Sample {
        // Column 0 has a huge mean relative to its spread; column 1 is moderate.
        let rows: Vec<Vec<f64>> =
            (0..10).map(|i| vec![100.0 + i as f64, (i as f64 - 4.0) * 0.5 + 0.01 * (i * i) as f64]).collect();
        Sample::from_rows(&rows).unwrap()
    }

    #[test]
    fn stepdown_extreme_then_moderate() {
        let s = synthetic_two_column();
        let plan = StepdownPlan { subsample: Some(SubsamplePlan::exhaustive(10, 2).unwrap()), ..Default::default() };
        let r = stepdown_fwer(&s, 0.5, StepdownMethod::Subsampling, &plan).unwrap();
        assert!(r.rejected.contains(&0));
        assert_eq!(r.trace[0].rejected, vec![0]);
        assert_eq!(r.trace[1].active, vec![1]);
        assert!(r.trace[1].critical_value <= r.trace[0].critical_value);
        assert!(r.trace_is_monotone());

        // Direct enumeration: a pair {x, y} has √2·mean/(|x − y|/2).
        let pair_stat = |x: f64, y: f64| 2f64.sqrt() * (x + y) / 2.0 / ((x - y).abs() / 2.0);
        let median_over_pairs = |cols: &[usize]| {
            let mut v = Vec::new();
            for a in 0..10 {
                for b in a + 1..10 {
                    v.push(cols.iter().map(|&j| pair_stat(s.get(a, j), s.get(b, j))).fold(f64::NEG_INFINITY, f64::max));
                }
            }
            v.sort_by(f64::total_cmp);
            v[22] // smallest x with F(x) ≥ 1/2 over 45 pairs
        };
        assert!((r.trace[0].critical_value - median_over_pairs(&[0, 1])).abs() < 1e-9);
        assert!((r.trace[1].critical_value - median_over_pairs(&[1])).abs() < 1e-9);
    }

    #[test]
    fn stepdown_stops_when_nothing_exceeds() {
        let f = Family::normal(vec![-2.0, -2.0, -2.0], vec![1.0; 3], 0.0).unwrap();
        let s = f.sample(100, &mut stream(4, &[])).unwrap();
        let plan = StepdownPlan { subsample: Some(SubsamplePlan::random(100, 10, 400, 1).unwrap()), ..Default::default() };
        let r = stepdown_fwer(&s, 0.05, StepdownMethod::Subsampling, &plan).unwrap();
        assert!(r.rejected.is_empty());
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn stepdown_k1_matches_single_test() {
        let f = Family::normal(vec![0.15], vec![1.0], 0.0).unwrap();
        for seed in 0..20 {
            let s = f.sample(100, &mut stream(30, &[seed])).unwrap();
            let sp = SubsamplePlan::random(100, 10, 500, seed).unwrap();
            let single = moment_test_subsampling(&s, 0.05, &sp).unwrap();
            let plan = StepdownPlan { subsample: Some(sp), ..Default::default() };
            let r = stepdown_fwer(&s, 0.05, StepdownMethod::Subsampling, &plan).unwrap();
            assert_eq!(r.trace[0].critical_value, single.critical_value);
            assert_eq!(!r.rejected.is_empty(), single.reject);
        }
    }

    #[test]
    fn stepdown_monotone_in_alpha_and_nested_quantiles() {
        let f = Family::normal(vec![0.2, 0.1, 0.0, 0.25], vec![1.0; 4], 0.3).unwrap();
        for seed in 0..15 {
            let s = f.sample(120, &mut stream(40, &[seed])).unwrap();
            for method in [StepdownMethod::Subsampling, StepdownMethod::Bootstrap] {
                let plan = StepdownPlan {
                    subsample: Some(SubsamplePlan::random(120, 10, 400, seed).unwrap()),
                    bootstrap: Some(BootstrapPlan::monte_carlo(400, seed)),
                    fresh_draws: false,
                };
                let mut prev: Vec<usize> = Vec::new();
                for alpha in [0.01, 0.05, 0.1, 0.2, 0.4] {
                    let r = stepdown_fwer(&s, alpha, method, &plan).unwrap();
                    assert!(r.trace_is_monotone());
                    assert!(prev.iter().all(|j| r.rejected.contains(j)), "alpha {alpha}");
                    prev = r.rejected;
                }
            }
            let draws = StepdownDraws::subsampling(&s, &SubsamplePlan::random(120, 10, 400, seed).unwrap()).unwrap();
            let q = |k: &[usize]| critical_value(&draws.max_distribution(k).unwrap(), 0.95);
            assert!(q(&[1]) <= q(&[1, 2]) && q(&[1, 2]) <= q(&[0, 1, 2, 3]));
        }
    }

    #[test]
    fn fresh_draws_option_runs() {
        let s = synthetic_two_column();
        let plan = StepdownPlan {
            bootstrap: Some(BootstrapPlan::monte_carlo(200, 3)),
            fresh_draws: true,
            ..Default::default()
        };
        let r = stepdown_fwer(&s, 0.1, StepdownMethod::Bootstrap, &plan).unwrap();
        assert!(r.rejected.contains(&0));
        let json = serde_json::to_value(r.record(0.1, StepdownMethod::Bootstrap)).unwrap();
        for key in ["statistic", "critical_value", "alpha", "method", "step_trace"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
