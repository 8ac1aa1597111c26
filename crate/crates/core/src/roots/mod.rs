//! Roots `R_n(X^(n), P)` and test statistics, in oracle form (true parameters
//! of `P`) and feasible form (plug-in parameters of the empirical law).

pub mod aqlr;
pub mod ks;
pub mod mean;
pub mod stats;
pub mod ustat;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{edf, Sample};
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

pub use aqlr::{aqlr_root, omega_tilde, orthant_projection, OrthantProjection, DEFAULT_EPS, MAX_EXACT_DIM};
pub use ks::{ks_root, CdfSpec};
pub use mean::{
    centered_mean_root, constrained_mean_root, general_f_root, max_studentized_mean_root, moment_max_stat, z_vector,
};
pub use stats::SampleStats;
pub use ustat::{
    g_and_sigma_h, h_prime, symmetrize, u_root, u_statistic, BuiltinKernel, Kernel, KernelProjection,
    ProjectionConfig, UStatConfig, UStatistic,
};

/// Where the parameters in [`OracleParams`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSource {
    /// True parameters of the data-generating law.
    #[default]
    Oracle,
    /// Estimates from a sample (the empirical law).
    PlugIn,
}

/// Parameters of `P` a root may depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub mu: Vec<f64>,
    pub sigma: Option<SquareMatrix>,
    pub omega: Option<SquareMatrix>,
    pub theta: Option<f64>,
    pub sigma_h: Option<f64>,
    #[serde(skip)]
    pub cdf: Option<CdfSpec>,
    /// `τ_n = n^tau_exponent`.
    pub tau_exponent: f64,
    pub source: ParamSource,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            mu: Vec::new(),
            sigma: None,
            omega: None,
            theta: None,
            sigma_h: None,
            cdf: None,
            tau_exponent: 0.5,
            source: ParamSource::Oracle,
        }
    }
}

impl OracleParams {
    pub fn with_mu(mu: Vec<f64>) -> Self {
        Self { mu, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.sigma {
            if !s.is_symmetric(1e-10) {
                return Err(Error::invalid("sigma must be symmetric"));
            }
            // Positive semidefinite: a tiny ridge must make it factorizable.
            let scale = (0..s.dim()).map(|i| s.get(i, i)).fold(0.0, f64::max).max(1.0);
            if s.dim() > 0 && s.add_ridge(1e-9 * scale).cholesky().is_err() {
                return Err(Error::invalid("sigma must be positive semidefinite"));
            }
        }
        if let Some(o) = &self.omega {
            if (0..o.dim()).any(|i| (o.get(i, i) - 1.0).abs() > 1e-12) {
                return Err(Error::invalid("omega must have unit diagonal"));
            }
        }
        if let Some(sh) = self.sigma_h {
            if !(sh >= 0.0) {
                return Err(Error::invalid("sigma_h must be nonnegative"));
            }
        }
        if let Some(c) = &self.cdf {
            c.validate()?;
        }
        Ok(())
    }

    fn mu1(&self) -> Result<f64> {
        match self.mu.as_slice() {
            [m] => Ok(*m),
            _ => Err(Error::invalid("root needs a scalar mu")),
        }
    }
}

/// Function `f(z, Ω̂)` for the general studentized root.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FFunction {
    /// `max_j z_j`.
    Max,
    /// `max_j |z_j|`.
    MaxAbs,
    /// `Σ z_j²`.
    SumSquares,
    /// `Σ max(z_j, 0)²`.
    SumPositiveSquares,
    #[serde(skip)]
    Custom(Arc<dyn Fn(&[f64], &SquareMatrix) -> f64 + Send + Sync>),
}

impl fmt::Debug for FFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FFunction::Max => "Max",
            FFunction::MaxAbs => "MaxAbs",
            FFunction::SumSquares => "SumSquares",
            FFunction::SumPositiveSquares => "SumPositiveSquares",
            FFunction::Custom(_) => "Custom",
        };
        f.write_str(name)
    }
}

impl FFunction {
    pub fn custom(f: impl Fn(&[f64], &SquareMatrix) -> f64 + Send + Sync + 'static) -> Self {
        FFunction::Custom(Arc::new(f))
    }

    pub fn apply(&self, z: &[f64], omega: &SquareMatrix) -> f64 {
        match self {
            FFunction::Max => mean::max_of(z),
            FFunction::MaxAbs => z.iter().fold(0.0, |m, v| m.max(v.abs())),
            FFunction::SumSquares => z.iter().map(|v| v * v).sum(),
            FFunction::SumPositiveSquares => z.iter().map(|v| v.max(0.0).powi(2)).sum(),
            FFunction::Custom(f) => f(z, omega),
        }
    }
}

/// A root, selected by kind name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RootSpecFields")]
pub enum RootSpec {
    /// `τ_n (X̄ − μ)` for a single column.
    Mean,
    MaxStudentizedMean,
    GeneralF {
        f: FFunction,
    },
    /// `√n (max(X̄, 0) − μ)`; `μ ≥ 0` is enforced for oracle parameters only.
    ConstrainedMean,
    /// `max_j √n X̄_j / S_j`, ignoring `μ`.
    MomentMaxStat,
    AqlrStat {
        eps: f64,
    },
    Ks,
    UStat {
        kernel: Kernel,
        config: UStatConfig,
    },
}

// serde's `deny_unknown_fields` does not reach unit variants of internally
// tagged enums, so configs are parsed through this flat form.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RootSpecFields {
    kind: String,
    f: Option<FFunction>,
    eps: Option<f64>,
    kernel: Option<Kernel>,
    config: Option<UStatConfig>,
}

impl TryFrom<RootSpecFields> for RootSpec {
    type Error = String;

    fn try_from(r: RootSpecFields) -> std::result::Result<Self, String> {
        let present = [("f", r.f.is_some()), ("eps", r.eps.is_some()), ("kernel", r.kernel.is_some()), ("config", r.config.is_some())];
        let allowed: &[&str] = match r.kind.as_str() {
            "general-f" => &["f"],
            "aqlr-stat" => &["eps"],
            "u-stat" => &["kernel", "config"],
            _ => &[],
        };
        if let Some((name, _)) = present.iter().find(|(name, set)| *set && !allowed.contains(name)) {
            return Err(format!("unknown field `{name}` for root kind `{}`", r.kind));
        }
        let missing = |name: &str| format!("missing field `{name}` for root kind `{}`", r.kind);
        Ok(match r.kind.as_str() {
            "mean" => RootSpec::Mean,
            "max-studentized-mean" => RootSpec::MaxStudentizedMean,
            "general-f" => RootSpec::GeneralF { f: r.f.ok_or_else(|| missing("f"))? },
            "constrained-mean" => RootSpec::ConstrainedMean,
            "moment-max-stat" => RootSpec::MomentMaxStat,
            "aqlr-stat" => RootSpec::AqlrStat { eps: r.eps.unwrap_or(DEFAULT_EPS) },
            "ks" => RootSpec::Ks,
            "u-stat" => RootSpec::UStat {
                kernel: r.kernel.ok_or_else(|| missing("kernel"))?,
                config: r.config.unwrap_or_default(),
            },
            other => return Err(format!("unknown root kind `{other}`")),
        })
    }
}

/// A resampling base prepared once for many count-vector evaluations.
#[derive(Debug, Clone)]
pub struct ResampleBase {
    sample: Sample,
    means: Vec<f64>,
    sorted: bool,
}

impl ResampleBase {
    /// Single-column samples are sorted, which leaves the empirical law unchanged.
    pub fn new(sample: &Sample) -> Self {
        let sample = if sample.k() == 1 { sample.sorted_by_first_column() } else { sample.clone() };
        let means = sample.means();
        Self { sorted: sample.k() == 1, sample, means }
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }
}

impl RootSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RootSpec::Mean => "mean",
            RootSpec::MaxStudentizedMean => "max-studentized-mean",
            RootSpec::GeneralF { .. } => "general-f",
            RootSpec::ConstrainedMean => "constrained-mean",
            RootSpec::MomentMaxStat => "moment-max-stat",
            RootSpec::AqlrStat { .. } => "aqlr-stat",
            RootSpec::Ks => "ks",
            RootSpec::UStat { .. } => "u-stat",
        }
    }

    /// Kind-specific parameter checks.
    pub fn validate(&self) -> Result<()> {
        match self {
            RootSpec::AqlrStat { eps } if !(*eps > 0.0) => Err(Error::invalid("aqlr eps must be positive")),
            RootSpec::UStat { config, .. } if config.incomplete_draws == 0 => {
                Err(Error::invalid("incomplete_draws must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the root only accepts 1-column samples.
    pub fn univariate(&self) -> bool {
        matches!(self, RootSpec::Mean | RootSpec::ConstrainedMean | RootSpec::Ks | RootSpec::UStat { .. })
    }

    /// `R_n(sample, P)` for the law described by `params`.
    pub fn evaluate(&self, sample: &Sample, params: &OracleParams) -> Result<f64> {
        match self {
            RootSpec::Mean => centered_mean_root(sample, params.mu1()?, params.tau_exponent),
            RootSpec::MaxStudentizedMean => max_studentized_mean_root(sample, &params.mu),
            RootSpec::GeneralF { f } => general_f_root(sample, &params.mu, &|z, om| f.apply(z, om)),
            RootSpec::ConstrainedMean => match params.source {
                ParamSource::Oracle => constrained_mean_root(sample, params.mu1()?),
                ParamSource::PlugIn => mean::constrained_mean_root_unchecked(sample, params.mu1()?),
            },
            RootSpec::MomentMaxStat => moment_max_stat(sample),
            RootSpec::AqlrStat { eps } => aqlr_root(sample, &params.mu, *eps),
            RootSpec::Ks => ks_root(sample, self.cdf(params)?),
            RootSpec::UStat { kernel, config } => {
                if sample.k() != 1 {
                    return Err(Error::invalid("u-statistics need a 1-column sample"));
                }
                let theta = params.theta.ok_or_else(|| Error::invalid("u-stat root needs theta"))?;
                let u = ustat::u_value_fast(sample.as_slice(), kernel, config)?;
                Ok((sample.n() as f64).powf(params.tau_exponent) * (u - theta))
            }
        }
    }

    /// The root on the resample that repeats base row `i` `counts[i]` times.
    /// Moment-based roots avoid materializing the resample.
    pub fn evaluate_counts(
        &self,
        base: &ResampleBase,
        counts: &[u32],
        params: &OracleParams,
        scratch: &mut Sample,
    ) -> Result<f64> {
        let s = &base.sample;
        let stats = |corr| SampleStats::from_counts(s, counts, &base.means, corr);
        match self {
            RootSpec::Mean | RootSpec::ConstrainedMean => {
                let (mut sum, mut n) = (0.0, 0u64);
                let shift = base.means[0];
                for (x, &c) in s.as_slice().iter().zip(counts) {
                    sum += c as f64 * (x - shift);
                    n += c as u64;
                }
                let nf = n as f64;
                let xbar = shift + sum / nf;
                let mu = params.mu1()?;
                if matches!(self, RootSpec::Mean) {
                    Ok(nf.powf(params.tau_exponent) * (xbar - mu))
                } else {
                    if params.source == ParamSource::Oracle && mu < 0.0 {
                        return Err(Error::invalid("constrained mean requires mu >= 0"));
                    }
                    Ok(nf.sqrt() * (xbar.max(0.0) - mu))
                }
            }
            RootSpec::MaxStudentizedMean => Ok(mean::max_of(&stats(false)?.z(&params.mu))),
            RootSpec::MomentMaxStat => Ok(mean::max_of(&stats(false)?.z(&vec![0.0; s.k()]))),
            RootSpec::GeneralF { f } => {
                let st = stats(true)?;
                Ok(f.apply(&st.z(&params.mu), st.corr.as_ref().unwrap()))
            }
            RootSpec::AqlrStat { eps } => {
                if s.k() > MAX_EXACT_DIM {
                    return Err(Error::ExactSolverLimit(s.k()));
                }
                aqlr::aqlr_from_stats(&stats(true)?, &params.mu, *eps)
            }
            RootSpec::Ks if base.sorted => ks::ks_root_counts(s.as_slice(), counts, self.cdf(params)?),
            _ => {
                s.expand_counts_into(counts, scratch);
                self.evaluate(scratch, params)
            }
        }
    }

    /// Parameters of the empirical law of `sample`, as needed by this root.
    pub fn plug_in_params(&self, sample: &Sample, tau_exponent: f64) -> Result<OracleParams> {
        let mut p = OracleParams {
            mu: sample.means(),
            tau_exponent,
            source: ParamSource::PlugIn,
            ..OracleParams::default()
        };
        match self {
            RootSpec::Ks => p.cdf = Some(CdfSpec::step(edf(&sample.column_vec(0))?)),
            RootSpec::UStat { kernel, config } => {
                p.theta = Some(ustat::u_value_fast(sample.as_slice(), kernel, config)?);
            }
            _ => {}
        }
        Ok(p)
    }

    fn cdf<'a>(&self, params: &'a OracleParams) -> Result<&'a CdfSpec> {
        params.cdf.as_ref().ok_or_else(|| Error::invalid("ks root needs a cdf"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_by_kind_name() {
        let r: RootSpec = serde_json::from_str(r#"{"kind":"aqlr-stat"}"#).unwrap();
        assert!(matches!(r, RootSpec::AqlrStat { eps } if eps == DEFAULT_EPS));
        let r: RootSpec = serde_json::from_str(r#"{"kind":"u-stat","kernel":"variance"}"#).unwrap();
        assert_eq!(r.name(), "u-stat");
        let r: RootSpec = serde_json::from_str(r#"{"kind":"general-f","f":"sum-positive-squares"}"#).unwrap();
        assert_eq!(r.name(), "general-f");
        assert!(serde_json::from_str::<RootSpec>(r#"{"kind":"ks","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<RootSpec>(r#"{"kind":"nope"}"#).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = OracleParams::with_mu(vec![0.0, 0.0]);
        p.sigma = Some(SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap());
        assert!(p.validate().is_err());
        p.sigma = Some(SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap());
        assert!(p.validate().is_ok());
        p.omega = Some(SquareMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap());
        assert!(p.validate().is_err());
        p.omega = None;
        p.sigma_h = Some(-1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn counts_evaluation_matches_materialized() {
        let rows: Vec<Vec<f64>> =
            (0..9).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos() + 0.1, i as f64 * 0.05]).collect();
        let multi = Sample::from_rows(&rows).unwrap();
        let uni = Sample::from_column(rows.iter().map(|r| r[0]).collect()).unwrap();
        let counts = [2u32, 0, 1, 1, 3, 0, 1, 0, 1];
        let cases: Vec<(RootSpec, &Sample)> = vec![
            (RootSpec::Mean, &uni),
            (RootSpec::ConstrainedMean, &uni),
            (RootSpec::Ks, &uni),
            (RootSpec::UStat { kernel: Kernel::variance(), config: UStatConfig::default() }, &uni),
            (RootSpec::MaxStudentizedMean, &multi),
            (RootSpec::MomentMaxStat, &multi),
            (RootSpec::GeneralF { f: FFunction::SumSquares }, &multi),
            (RootSpec::AqlrStat { eps: 0.05 }, &multi),
        ];
        for (root, sample) in cases {
            let base = ResampleBase::new(sample);
            let params = root.plug_in_params(sample, 0.5).unwrap();
            let mut scratch = Sample::scratch(sample.k());
            let fast = root.evaluate_counts(&base, &counts, &params, &mut scratch).unwrap();
            base.sample().expand_counts_into(&counts, &mut scratch);
            let slow = root.evaluate(&scratch, &params).unwrap();
            assert!((fast - slow).abs() < 1e-10, "{}: {fast} vs {slow}", root.name());
        }
    }

    #[test]
    fn feasible_ks_is_zero_on_own_sample() {
        let s = Sample::from_column(vec![0.4, 0.1, 0.4, 0.8]).unwrap();
        let p = RootSpec::Ks.plug_in_params(&s, 0.5).unwrap();
        assert_eq!(RootSpec::Ks.evaluate(&s, &p).unwrap(), 0.0);
    }

    #[test]
    fn plug_in_constrained_mean_allows_negative_center() {
        let s = Sample::from_column(vec![-1.0, -0.5, 0.2]).unwrap();
        let p = RootSpec::ConstrainedMean.plug_in_params(&s, 0.5).unwrap();
        let r = RootSpec::ConstrainedMean.evaluate(&s, &p).unwrap();
        assert!((r - 3f64.sqrt() * (0.0 - s.means()[0])).abs() < 1e-12);
        assert!(RootSpec::ConstrainedMean.evaluate(&s, &OracleParams::with_mu(vec![-0.1])).is_err());
    }
}
