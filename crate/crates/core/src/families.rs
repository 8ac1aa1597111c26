//! Parametrized data-generating laws with their oracle quantities.
//!
//! A [`FamilySpec`] is what configs name; [`FamilySpec::at`] resolves it for a
//! sample size `n` (some families drift with `n`) into a concrete [`Family`].

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::dist::{edf, Sample, StepDistribution};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::rng::{stream, StreamRng};
use crate::roots::{g_and_sigma_h, CdfSpec, OracleParams, ProjectionConfig, RootSpec};

/// `θ_n = (1 − δ)^(1/n)`: the all-ones sample then has probability `1 − δ`.
pub fn boundary_theta(delta: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Ok((1.0 - delta).powf(1.0 / n as f64))
}

fn zero() -> f64 {
    0.0
}

/// Configurable family, possibly indexed by the sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Bernoulli {
        p: f64,
    },
    /// Bernoulli with `p = (1 − δ)^(1/n)`.
    BernoulliBoundary {
        delta: f64,
    },
    /// Multivariate normal with equicorrelation `rho`; `sd` defaults to ones.
    Normal {
        mu: Vec<f64>,
        #[serde(default)]
        sd: Option<Vec<f64>>,
        #[serde(default = "zero")]
        rho: f64,
    },
    /// `N(h/√n, 1)`.
    NormalDrift {
        h: f64,
    },
    /// `a` with probability `1 − p`, `b` with probability `p`.
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
    },
    /// Mean `mu` plus `√w·B + √(1−w)·N` per coordinate, where `B` has
    /// independent standardized Bernoulli(`p`) coordinates and `N` is
    /// equicorrelated normal with correlation `rho`. Unit variances,
    /// correlation `(1 − w)·rho`, skewed when `p ≠ 1/2`.
    ScaledMixture {
        mu: Vec<f64>,
        p: f64,
        w: f64,
        #[serde(default = "zero")]
        rho: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl FamilySpec {
    /// Resolve for sample size `n`.
    pub fn at(&self, n: usize) -> Result<Family> {
        let law = match self {
            FamilySpec::Bernoulli { p } => Law::TwoPoint { a: 0.0, b: 1.0, p: *p },
            FamilySpec::BernoulliBoundary { delta } => Law::TwoPoint { a: 0.0, b: 1.0, p: boundary_theta(*delta, n)? },
            FamilySpec::TwoPoint { a, b, p } => Law::TwoPoint { a: *a, b: *b, p: *p },
            FamilySpec::Normal { mu, sd, rho } => {
                let sd = sd.clone().unwrap_or_else(|| vec![1.0; mu.len()]);
                return Family::normal(mu.clone(), sd, *rho);
            }
            FamilySpec::NormalDrift { h } => {
                if n == 0 {
                    return Err(Error::invalid("n must be positive"));
                }
                return Family::normal(vec![h / (n as f64).sqrt()], vec![1.0], 0.0);
            }
            FamilySpec::ScaledMixture { mu, p, w, rho } => {
                if !(*p > 0.0 && *p < 1.0) || !(0.0..=1.0).contains(w) {
                    return Err(Error::invalid("scaled mixture needs p in (0,1) and w in [0,1]"));
                }
                let k = mu.len();
                let chol = normal_factor(k, *rho)?;
                Law::Mixture { mu: mu.clone(), p: *p, w: *w, rho: *rho, chol }
            }
            FamilySpec::Uniform { lo, hi } => Law::Uniform { lo: *lo, hi: *hi },
        };
        Family::from_law(law)
    }

    /// Compact one-line label for reports.
    pub fn label(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    /// How this family relates to the standardized uniform integrability
    /// condition over a parameter sweep.
    pub fn integrability_note(&self) -> &'static str {
        match self {
            FamilySpec::Bernoulli { .. } | FamilySpec::TwoPoint { .. } => {
                "holds when p is bounded away from 0 and 1 over the sweep"
            }
            FamilySpec::BernoulliBoundary { .. } => "fails: p_n -> 1, standardized tails are unbounded",
            FamilySpec::Normal { .. } | FamilySpec::NormalDrift { .. } => "holds: standardized law is fixed",
            FamilySpec::ScaledMixture { .. } => "holds when p is bounded away from 0 and 1 over the sweep",
            FamilySpec::Uniform { .. } => "holds: bounded support",
        }
    }
}

fn normal_factor(k: usize, rho: f64) -> Result<Option<Cholesky>> {
    if k == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if rho == 0.0 || k == 1 {
        return Ok(None);
    }
    SquareMatrix::equicorrelation(k, rho)
        .cholesky()
        .map(Some)
        .map_err(|_| Error::invalid(format!("equicorrelation {rho} is not positive definite for k = {k}")))
}

#[derive(Debug, Clone)]
enum Law {
    TwoPoint { a: f64, b: f64, p: f64 },
    Normal { mu: Vec<f64>, sd: Vec<f64>, rho: f64, chol: Option<Cholesky> },
    Mixture { mu: Vec<f64>, p: f64, w: f64, rho: f64, chol: Option<Cholesky> },
    Uniform { lo: f64, hi: f64 },
}

/// Central moments of a univariate law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments1d {
    pub mean: f64,
    pub var: f64,
    /// Fourth central moment.
    pub mu4: f64,
}

/// A concrete law `P`.
#[derive(Debug, Clone)]
pub struct Family {
    law: Law,
}

impl Family {
    pub fn normal(mu: Vec<f64>, sd: Vec<f64>, rho: f64) -> Result<Self> {
        if mu.len() != sd.len() {
            return Err(Error::invalid("mu and sd lengths differ"));
        }
        if sd.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("sd entries must be positive"));
        }
        let chol = normal_factor(mu.len(), rho)?;
        Self::from_law(Law::Normal { mu, sd, rho, chol })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::from_law(Law::TwoPoint { a: 0.0, b: 1.0, p })
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        Self::from_law(Law::TwoPoint { a, b, p })
    }

    fn from_law(law: Law) -> Result<Self> {
        match &law {
            Law::TwoPoint { a, b, p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
                }
                if !(a < b) {
                    return Err(Error::invalid("two-point law needs a < b"));
                }
            }
            Law::Uniform { lo, hi } if !(lo < hi) => return Err(Error::invalid("uniform law needs lo < hi")),
            Law::Normal { mu, .. } | Law::Mixture { mu, .. } if mu.iter().any(|m| !m.is_finite()) => {
                return Err(Error::NonFinite)
            }
            _ => {}
        }
        Ok(Self { law })
    }

    pub fn dim(&self) -> usize {
        match &self.law {
            Law::Normal { mu, .. } | Law::Mixture { mu, .. } => mu.len(),
            _ => 1,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match &self.law {
            Law::TwoPoint { a, b, p } => vec![a + (b - a) * p],
            Law::Normal { mu, .. } | Law::Mixture { mu, .. } => mu.clone(),
            Law::Uniform { lo, hi } => vec![0.5 * (lo + hi)],
        }
    }

    pub fn covariance(&self) -> SquareMatrix {
        let k = self.dim();
        let mut m = SquareMatrix::zeros(k);
        match &self.law {
            Law::TwoPoint { a, b, p } => m.set(0, 0, (b - a) * (b - a) * p * (1.0 - p)),
            Law::Uniform { lo, hi } => m.set(0, 0, (hi - lo) * (hi - lo) / 12.0),
            Law::Normal { sd, rho, .. } => {
                for i in 0..k {
                    for j in 0..k {
                        m.set(i, j, if i == j { sd[i] * sd[i] } else { rho * sd[i] * sd[j] });
                    }
                }
            }
            Law::Mixture { w, rho, .. } => {
                m = SquareMatrix::equicorrelation(k, (1.0 - w) * rho);
            }
        }
        m
    }

    pub fn correlation(&self) -> SquareMatrix {
        let s = self.covariance();
        let k = s.dim();
        let mut c = SquareMatrix::identity(k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let d = (s.get(i, i) * s.get(j, j)).sqrt();
                    c.set(i, j, if d > 0.0 { s.get(i, j) / d } else { 0.0 });
                }
            }
        }
        c
    }

    /// Mean, variance and fourth central moment for univariate laws.
    pub fn moments_1d(&self) -> Option<Moments1d> {
        if self.dim() != 1 {
            return None;
        }
        let mean = self.mean()[0];
        Some(match &self.law {
            Law::TwoPoint { a, b, p } => {
                let pq = p * (1.0 - p);
                let d2 = (b - a) * (b - a);
                Moments1d { mean, var: d2 * pq, mu4: d2 * d2 * pq * (1.0 - 3.0 * pq) }
            }
            Law::Normal { sd, .. } => Moments1d { mean, var: sd[0] * sd[0], mu4: 3.0 * sd[0].powi(4) },
            Law::Uniform { lo, hi } => {
                let r = hi - lo;
                Moments1d { mean, var: r * r / 12.0, mu4: r.powi(4) / 80.0 }
            }
            Law::Mixture { p, w, .. } => {
                let pq = p * (1.0 - p);
                let b4 = (1.0 - 3.0 * pq) / pq;
                Moments1d { mean, var: 1.0, mu4: w * w * b4 + 6.0 * w * (1.0 - w) + 3.0 * (1.0 - w) * (1.0 - w) }
            }
        })
    }

    /// The distribution function, for univariate laws that have a supported form.
    pub fn cdf(&self) -> Option<CdfSpec> {
        match &self.law {
            Law::TwoPoint { a, b, p } => Some(if *p >= 1.0 {
                CdfSpec::step(StepDistribution::point_mass(*b))
            } else if *p <= 0.0 {
                CdfSpec::step(StepDistribution::point_mass(*a))
            } else {
                CdfSpec::step(StepDistribution::new(vec![*a, *b], vec![1.0 - p, 1.0]).ok()?)
            }),
            Law::Normal { mu, sd, .. } if mu.len() == 1 => Some(CdfSpec::Normal { mean: mu[0], sd: sd[0] }),
            Law::Uniform { lo, hi } => Some(CdfSpec::Uniform { lo: *lo, hi: *hi }),
            _ => None,
        }
    }

    /// Whether the law has finite support (exact root distributions available).
    pub fn is_finite_support(&self) -> bool {
        matches!(self.law, Law::TwoPoint { .. })
    }

    /// `n` i.i.d. draws; rows of a `Sample`.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Result<Sample> {
        let mut data = Vec::new();
        self.sample_into(n, rng, &mut data);
        Sample::new(data, self.dim())
    }

    /// Draws into a reusable row-major buffer.
    pub fn sample_into(&self, n: usize, rng: &mut StreamRng, data: &mut Vec<f64>) {
        let k = self.dim();
        data.clear();
        data.reserve(n * k);
        match &self.law {
            Law::TwoPoint { a, b, p } => {
                data.extend((0..n).map(|_| if rng.random::<f64>() < *p { *b } else { *a }));
            }
            Law::Uniform { lo, hi } => data.extend((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>())),
            Law::Normal { mu, sd, chol, .. } => {
                let mut z = vec![0.0; k];
                let mut c = vec![0.0; k];
                for _ in 0..n {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let v = color(chol, &z, &mut c);
                    data.extend((0..k).map(|j| mu[j] + sd[j] * v[j]));
                }
            }
            Law::Mixture { mu, p, w, chol, .. } => {
                let (sb, sn) = (w.sqrt(), (1.0 - w).sqrt());
                let (lo, hi) = (-(p / (1.0 - p)).sqrt(), ((1.0 - p) / p).sqrt());
                let mut z = vec![0.0; k];
                let mut c = vec![0.0; k];
                for _ in 0..n {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let v = color(chol, &z, &mut c);
                    for j in 0..k {
                        let bern = if rng.random::<f64>() < *p { hi } else { lo };
                        data.push(mu[j] + sb * bern + sn * v[j]);
                    }
                }
            }
        }
    }

    /// Oracle parameters of this law for `root`.
    pub fn oracle_params(&self, root: &RootSpec, tau_exponent: f64) -> Result<OracleParams> {
        let mut p = OracleParams {
            mu: self.mean(),
            sigma: Some(self.covariance()),
            omega: Some(self.correlation()),
            tau_exponent,
            ..OracleParams::default()
        };
        match root {
            RootSpec::Ks => {
                p.cdf = Some(self.cdf().ok_or_else(|| Error::Unsupported("cdf of this family".into()))?);
            }
            RootSpec::UStat { kernel, .. } => {
                let proj = g_and_sigma_h(kernel, self, &ProjectionConfig::default())?;
                p.theta = Some(proj.theta);
                p.sigma_h = Some(proj.sigma_h);
            }
            _ => {}
        }
        Ok(p)
    }
}

fn color<'a>(chol: &Option<Cholesky>, z: &'a [f64], out: &'a mut [f64]) -> &'a [f64] {
    match chol {
        Some(ch) => {
            ch.mul_lower(z, out);
            out
        }
        None => z,
    }
}

/// How to compute `J_n(·, P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", try_from = "OracleModeFields")]
pub enum OracleMode {
    /// Enumerate the binomial support (finite-support laws only).
    Exact,
    MonteCarlo { replicates: usize, seed: u64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleModeFields {
    mode: String,
    replicates: Option<usize>,
    seed: Option<u64>,
}

impl TryFrom<OracleModeFields> for OracleMode {
    type Error = String;

    fn try_from(m: OracleModeFields) -> std::result::Result<Self, String> {
        match m.mode.as_str() {
            "exact" if m.replicates.is_none() && m.seed.is_none() => Ok(OracleMode::Exact),
            "exact" => Err("exact oracle mode takes no replicates or seed".into()),
            "monte-carlo" => Ok(OracleMode::MonteCarlo {
                replicates: m.replicates.ok_or("monte-carlo oracle mode needs `replicates`")?,
                seed: m.seed.unwrap_or(0),
            }),
            other => Err(format!("unknown oracle mode `{other}`")),
        }
    }
}

/// The sampling distribution `J_n(·, P)` of `root` at the oracle parameters.
pub fn oracle_root_distribution(
    family: &Family,
    root: &RootSpec,
    params: &OracleParams,
    n: usize,
    mode: OracleMode,
) -> Result<StepDistribution> {
    match mode {
        OracleMode::Exact => {
            let Law::TwoPoint { a, b, p } = family.law else {
                return Err(Error::Unsupported("exact root distribution for a non-finite-support family".into()));
            };
            let binom = Binomial::new(p, n as u64).map_err(|e| Error::invalid(e.to_string()))?;
            let mut pairs = Vec::with_capacity(n + 1);
            for j in 0..=n {
                let w = binom.pmf(j as u64);
                if w == 0.0 {
                    continue;
                }
                // Univariate roots are symmetric in the sample, so one
                // representative per success count suffices.
                let mut data = vec![a; n - j];
                data.extend(std::iter::repeat(b).take(j));
                let s = Sample::from_column(data)?;
                pairs.push((root.evaluate(&s, params)?, w));
            }
            StepDistribution::from_weighted(pairs)
        }
        OracleMode::MonteCarlo { replicates, seed } => {
            if replicates == 0 {
                return Err(Error::invalid("replicates must be positive"));
            }
            let values: Vec<f64> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed, &[r as u64]);
                    let s = family.sample(n, &mut rng)?;
                    root.evaluate(&s, params)
                })
                .collect::<Result<_>>()?;
            edf(&values)
        }
    }
}
