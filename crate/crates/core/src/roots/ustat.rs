//! One-sample U-statistics, their kernels, and the first-order projection.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::Sample;
use crate::error::{Error, Result};
use crate::families::Family;
use crate::rng::{distinct_indices, index_below, stream};

type KernelFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Kernels with a serializable name and closed-form helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKernel {
    /// `h(x, y) = (x − y)² / 2`, unbiased for the variance.
    Variance,
    /// `h(x, y) = x·y`, unbiased for the squared mean.
    Product,
    /// `h(x) = x`.
    Mean,
}

/// A kernel of degree `m`. Evaluators must be pure.
#[derive(Clone)]
pub struct Kernel {
    degree: usize,
    name: String,
    eval: Arc<KernelFn>,
    builtin: Option<BuiltinKernel>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel").field("degree", &self.degree).field("name", &self.name).finish()
    }
}

impl Kernel {
    pub fn new(degree: usize, name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        assert!(degree >= 1, "kernel degree must be positive");
        Self { degree, name: name.into(), eval: Arc::new(eval), builtin: None }
    }

    pub fn builtin(kind: BuiltinKernel) -> Self {
        let mut k = match kind {
            BuiltinKernel::Variance => Self::new(2, "variance", |a| 0.5 * (a[0] - a[1]) * (a[0] - a[1])),
            BuiltinKernel::Product => Self::new(2, "product", |a| a[0] * a[1]),
            BuiltinKernel::Mean => Self::new(1, "mean", |a| a[0]),
        };
        k.builtin = Some(kind);
        k
    }

    pub fn variance() -> Self {
        Self::builtin(BuiltinKernel::Variance)
    }

    pub fn product() -> Self {
        Self::builtin(BuiltinKernel::Product)
    }

    pub fn mean() -> Self {
        Self::builtin(BuiltinKernel::Mean)
    }

    pub fn constant(c: f64, degree: usize) -> Self {
        Self::new(degree, format!("constant({c})"), move |_| c)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Option<BuiltinKernel> {
        self.builtin
    }

    #[inline]
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.degree);
        (self.eval)(args)
    }

    /// Complete U-statistic by an O(n) closed form, when one is known.
    pub fn complete_closed_form(&self, values: &[f64]) -> Option<f64> {
        let n = values.len();
        if n < self.degree {
            return None;
        }
        let nf = n as f64;
        match self.builtin? {
            BuiltinKernel::Mean => Some(values.iter().sum::<f64>() / nf),
            BuiltinKernel::Variance => {
                let m = values.iter().sum::<f64>() / nf;
                Some(values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0))
            }
            BuiltinKernel::Product => {
                let (s, s2) = values.iter().fold((0.0, 0.0), |(s, s2), x| (s + x, s2 + x * x));
                Some((s * s - s2) / (nf * (nf - 1.0)))
            }
        }
    }
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.builtin {
            Some(b) => b.serialize(s),
            None => Err(serde::ser::Error::custom(format!("kernel '{}' has no serialized form", self.name))),
        }
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        BuiltinKernel::deserialize(d).map(Kernel::builtin)
    }
}

/// Settings for [`u_statistic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UStatConfig {
    /// Enumerate all subsets when `C(n, m)` is at most this.
    pub enumeration_cap: f64,
    /// Number of random subsets for the incomplete statistic.
    pub incomplete_draws: usize,
    pub seed: u64,
}

impl Default for UStatConfig {
    fn default() -> Self {
        Self { enumeration_cap: 2e6, incomplete_draws: 100_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UStatistic {
    pub value: f64,
    /// False when the value is an incomplete (sampled-subset) average.
    pub complete: bool,
    pub terms: usize,
}

/// `C(n, m)` as a float.
pub fn binomial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let m = m.min(n - m);
    (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Average of `h` over all `m`-subsets (lexicographic order), or over random
/// subsets when the count exceeds the enumeration cap.
pub fn u_statistic(sample: &Sample, h: &Kernel, cfg: &UStatConfig) -> Result<UStatistic> {
    if sample.k() != 1 {
        return Err(Error::invalid("u-statistics need a 1-column sample"));
    }
    u_statistic_values(sample.as_slice(), h, cfg)
}

pub(crate) fn u_statistic_values(xs: &[f64], h: &Kernel, cfg: &UStatConfig) -> Result<UStatistic> {
    let (n, m) = (xs.len(), h.degree());
    if n < m {
        return Err(Error::invalid(format!("sample size {n} is below kernel degree {m}")));
    }
    let count = binomial(n, m);
    let mut args = vec![0.0; m];
    if count <= cfg.enumeration_cap {
        let mut idx: Vec<usize> = (0..m).collect();
        let mut sum = 0.0;
        let mut terms = 0usize;
        loop {
            for (a, &i) in args.iter_mut().zip(&idx) {
                *a = xs[i];
            }
            sum += h.eval(&args);
            terms += 1;
            if !next_combination(&mut idx, n) {
                break;
            }
        }
        return Ok(UStatistic { value: sum / terms as f64, complete: true, terms });
    }
    let draws = cfg.incomplete_draws.max(1);
    let mut rng = stream(cfg.seed, &[0x7573_7461_74]);
    let (mut idx, mut mark) = (Vec::with_capacity(m), Vec::new());
    let mut sum = 0.0;
    for _ in 0..draws {
        distinct_indices(&mut rng, n, m, &mut idx, &mut mark);
        for (a, &i) in args.iter_mut().zip(&idx) {
            *a = xs[i];
        }
        sum += h.eval(&args);
    }
    Ok(UStatistic { value: sum / draws as f64, complete: false, terms: draws })
}

/// Complete value via the kernel's closed form when available, else [`u_statistic_values`].
pub(crate) fn u_value_fast(xs: &[f64], h: &Kernel, cfg: &UStatConfig) -> Result<f64> {
    match h.complete_closed_form(xs) {
        Some(v) => Ok(v),
        None => Ok(u_statistic_values(xs, h, cfg)?.value),
    }
}

/// Advance `idx` to the next `m`-subset of `0..n` in lexicographic order.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if idx[i] < n - m + i {
            idx[i] += 1;
            for j in (i + 1)..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `n^τ (û_n − θ)`.
pub fn u_root(sample: &Sample, h: &Kernel, theta: f64, tau_exponent: f64, cfg: &UStatConfig) -> Result<f64> {
    let u = u_statistic(sample, h, cfg)?;
    Ok((sample.n() as f64).powf(tau_exponent) * (u.value - theta))
}

/// The degree-`2m` kernel
/// `h(x₁..x_m)·h(x₁, x_{m+2}..x_{2m}) − h(x₁..x_m)·h(x_{m+1}..x_{2m})`,
/// whose expectation is `Var(g(X))`. Not symmetric; see [`symmetrize`].
pub fn h_prime(h: &Kernel) -> Kernel {
    let m = h.degree();
    let inner = h.clone();
    Kernel::new(2 * m, format!("h'({})", h.name()), move |x| {
        let first = inner.eval(&x[..m]);
        let mut buf = Vec::with_capacity(m);
        buf.push(x[0]);
        buf.extend_from_slice(&x[m + 1..]);
        let shared = inner.eval(&buf);
        first * shared - first * inner.eval(&x[m..])
    })
}

/// Average of `h` over argument orders: all `d!` orders for `d ≤ 4`,
/// otherwise a fixed set of 720 random orders.
pub fn symmetrize(h: &Kernel) -> Kernel {
    let d = h.degree();
    let perms = if d <= 4 {
        all_permutations(d)
    } else {
        let mut rng = stream(0x5953_4d, &[d as u64]);
        (0..720)
            .map(|_| {
                let mut p: Vec<usize> = (0..d).collect();
                for i in (1..d).rev() {
                    p.swap(i, index_below(&mut rng, i + 1));
                }
                p
            })
            .collect()
    };
    let inner = h.clone();
    Kernel::new(d, format!("sym({})", h.name()), move |x| {
        let mut buf = vec![0.0; x.len()];
        let mut s = 0.0;
        for p in &perms {
            for (b, &i) in buf.iter_mut().zip(p) {
                *b = x[i];
            }
            s += inner.eval(&buf);
        }
        s / perms.len() as f64
    })
}

fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..d).collect();
    permute(&mut p, 0, &mut out);
    out
}

fn permute(p: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == p.len() {
        out.push(p.clone());
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, out);
        p.swap(i, j);
    }
}

/// Settings for Monte Carlo evaluation of the kernel projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub draws: usize,
    pub seed: u64,
    /// Relative threshold on `σ_h` below which a warning is issued.
    pub degenerate_tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { draws: 100_000, seed: 0, degenerate_tol: 1e-3 }
    }
}

/// `θ = E h`, the projection `g(x) = E h(x, X₂..X_m) − θ` and `σ_h = m·sd(g(X))`.
#[derive(Clone)]
pub struct KernelProjection {
    pub theta: f64,
    pub sigma_h: f64,
    pub near_degenerate: bool,
    /// True when closed forms were used instead of Monte Carlo.
    pub exact: bool,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for KernelProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelProjection")
            .field("theta", &self.theta)
            .field("sigma_h", &self.sigma_h)
            .field("near_degenerate", &self.near_degenerate)
            .field("exact", &self.exact)
            .finish()
    }
}

impl KernelProjection {
    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }
}

pub fn g_and_sigma_h(h: &Kernel, family: &Family, cfg: &ProjectionConfig) -> Result<KernelProjection> {
    if family.dim() != 1 {
        return Err(Error::invalid("kernel projection needs a univariate family"));
    }
    let m = h.degree();
    let proj = match (h.kind(), family.moments_1d()) {
        (Some(kind), Some(mo)) => {
            let (mu, var) = (mo.mean, mo.var);
            let (theta, sigma2, g): (f64, f64, Arc<dyn Fn(f64) -> f64 + Send + Sync>) = match kind {
                BuiltinKernel::Mean => (mu, var, Arc::new(move |x| x - mu)),
                BuiltinKernel::Product => (mu * mu, 4.0 * mu * mu * var, Arc::new(move |x| x * mu - mu * mu)),
                BuiltinKernel::Variance => {
                    (var, (mo.mu4 - var * var).max(0.0), Arc::new(move |x| 0.5 * ((x - mu) * (x - mu) - var)))
                }
            };
            KernelProjection { theta, sigma_h: sigma2.sqrt(), near_degenerate: false, exact: true, g }
        }
        _ => {
            let draws = cfg.draws.max(2);
            let mut rng = stream(cfg.seed, &[1]);
            let theta_draws = family.sample(draws * m, &mut rng)?;
            let theta = theta_draws.as_slice().chunks(m).map(|c| h.eval(c)).sum::<f64>() / draws as f64;

            // Cov(h(X, Y), h(X, Y')) = Var g(X) with Y, Y' independent (m−1)-tuples.
            let mut rng = stream(cfg.seed, &[2]);
            let xs = family.sample(draws * (2 * m - 1), &mut rng)?;
            let mut args = vec![0.0; m];
            let mut acc = 0.0;
            for c in xs.as_slice().chunks(2 * m - 1) {
                args[0] = c[0];
                args[1..].copy_from_slice(&c[1..m]);
                let a = h.eval(&args);
                args[1..].copy_from_slice(&c[m..]);
                let b = h.eval(&args);
                acc += (a - theta) * (b - theta);
            }
            let var_g = (acc / draws as f64).max(0.0);

            let mut rng = stream(cfg.seed, &[3]);
            let reference = Arc::new(family.sample(draws * (m - 1), &mut rng)?.as_slice().to_vec());
            let hk = h.clone();
            let g: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |x| {
                if m == 1 {
                    return hk.eval(&[x]) - theta;
                }
                let mut args = vec![0.0; m];
                args[0] = x;
                let s: f64 = reference
                    .chunks(m - 1)
                    .map(|c| {
                        args[1..].copy_from_slice(c);
                        hk.eval(&args)
                    })
                    .sum();
                s / (reference.len() / (m - 1)) as f64 - theta
            });
            KernelProjection { theta, sigma_h: m as f64 * var_g.sqrt(), near_degenerate: false, exact: false, g }
        }
    };
    let near = proj.sigma_h <= cfg.degenerate_tol * (1.0 + proj.theta.abs());
    if near {
        log::warn!("near-degenerate kernel '{}': sigma_h = {:.3e}", h.name(), proj.sigma_h);
    }
    Ok(KernelProjection { near_degenerate: near, ..proj })
}
