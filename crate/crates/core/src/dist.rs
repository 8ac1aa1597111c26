//! Samples, finite step distributions, generalized-inverse quantiles and
//! Kolmogorov-type distances between step functions.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing cumulative probabilities against a level, so
/// that `1 - 0.05` and `1900 / 2000` are treated as the same number.
pub const LEVEL_TOL: f64 = 1e-12;

/// An `n × k` matrix of observations stored row-major; row `i` is `X_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Sample {
    /// Build from row-major data with `k` columns.
    pub fn new(data: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("sample needs at least one column"));
        }
        if data.is_empty() {
            return Err(Error::EmptySample);
        }
        if data.len() % k != 0 {
            return Err(Error::Ragged { len: data.len(), cols: k });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n: data.len() / k, k, data })
    }

    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Ragged { len: rows.iter().map(Vec::len).sum(), cols: k });
        }
        Self::new(rows.concat(), k)
    }

    /// Reusable buffer for the engines; holds no rows until filled.
    pub(crate) fn scratch(k: usize) -> Self {
        Self { n: 0, k, data: Vec::new() }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.data.iter().skip(j).step_by(self.k).copied()
    }

    pub fn column_vec(&self, j: usize) -> Vec<f64> {
        self.column(j).collect()
    }

    /// Copy of the sample with rows sorted by the first column.
    pub fn sorted_by_first_column(&self) -> Sample {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.get(a, 0).total_cmp(&self.get(b, 0)));
        let mut out = Sample::scratch(self.k);
        self.gather_rows_into(&order, &mut out);
        out
    }

    /// Overwrite `out` with the rows listed in `idx`.
    pub fn gather_rows_into(&self, idx: &[usize], out: &mut Sample) {
        out.k = self.k;
        out.n = idx.len();
        out.data.clear();
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
        }
    }

    /// Overwrite `out` with row `i` repeated `counts[i]` times, in index order.
    pub fn expand_counts_into(&self, counts: &[u32], out: &mut Sample) {
        out.k = self.k;
        out.data.clear();
        let mut n = 0;
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                out.data.extend_from_slice(self.row(i));
            }
            n += c as usize;
        }
        out.n = n;
    }

    /// Per-column mean and standard deviation with divisor `n`.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        (0..self.k).map(|j| column_mean_sd(self.column(j), self.n)).collect()
    }

    /// Per-column mean.
    pub fn means(&self) -> Vec<f64> {
        (0..self.k).map(|j| self.column(j).sum::<f64>() / self.n as f64).collect()
    }

    /// True when column `j` takes a single value.
    pub fn column_is_constant(&self, j: usize) -> bool {
        let first = self.get(0, j);
        self.column(j).all(|x| x == first)
    }
}

/// Mean and divisor-`n` standard deviation, two-pass.
pub(crate) fn column_mean_sd(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / nf).sqrt())
}

/// A probability level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(Error::invalid(format!("quantile level {alpha} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; for levels produced by arithmetic such as `1 - (a + e)`.
    pub fn clamped(alpha: f64) -> Self {
        Self(alpha.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(q: QuantileLevel) -> f64 {
        q.0
    }
}

/// A distribution function with finitely many jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    support: Vec<f64>,
    cum_probs: Vec<f64>,
}

impl StepDistribution {
    /// Validates strictly increasing support and nondecreasing cumulative
    /// probabilities in (0, 1] ending at 1 (±1e-12).
    pub fn new(support: Vec<f64>, cum_probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySample);
        }
        if support.len() != cum_probs.len() {
            return Err(Error::invalid("support and cum_probs lengths differ"));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support must be strictly increasing"));
        }
        if cum_probs.windows(2).any(|w| w[0] > w[1]) || cum_probs.iter().any(|&p| !(p > 0.0 && p <= 1.0 + 1e-12)) {
            return Err(Error::invalid("cumulative probabilities must be nondecreasing in (0, 1]"));
        }
        if (cum_probs[cum_probs.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("final cumulative probability must equal 1"));
        }
        let mut cum_probs = cum_probs;
        *cum_probs.last_mut().unwrap() = 1.0;
        Ok(Self { support, cum_probs })
    }

    pub fn point_mass(x: f64) -> Self {
        Self { support: vec![x], cum_probs: vec![1.0] }
    }

    /// Step distribution from (value, weight) pairs; equal values are merged.
    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if pairs.iter().any(|(v, w)| !v.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weighted values must be finite with nonnegative weights"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("total weight must be positive"));
        }
        let mut support = Vec::with_capacity(pairs.len());
        let mut cum_probs = Vec::with_capacity(pairs.len());
        let mut running = 0.0;
        for (v, w) in pairs {
            running += w;
            if w == 0.0 {
                continue;
            }
            if support.last() == Some(&v) {
                *cum_probs.last_mut().unwrap() = running / total;
            } else {
                support.push(v);
                cum_probs.push(running / total);
            }
        }
        *cum_probs.last_mut().unwrap() = 1.0;
        Ok(Self { support, cum_probs })
    }

    /// Empirical distribution of values already sorted ascending.
    pub(crate) fn from_sorted_values(sorted: &[f64]) -> Self {
        let n = sorted.len() as f64;
        let mut support = Vec::with_capacity(sorted.len());
        let mut cum_probs = Vec::with_capacity(sorted.len());
        for (i, &v) in sorted.iter().enumerate() {
            let c = (i + 1) as f64 / n;
            if support.last() == Some(&v) {
                *cum_probs.last_mut().unwrap() = c;
            } else {
                support.push(v);
                cum_probs.push(c);
            }
        }
        Self { support, cum_probs }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cum_probs(&self) -> &[f64] {
        &self.cum_probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// Probability mass at each support point.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum_probs
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(self.masses()).map(|(x, m)| x * m).sum()
    }

    /// Right-continuous `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.support.partition_point(|&s| s <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum_probs[idx - 1]
        }
    }

    /// Left limit `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let idx = self.support.partition_point(|&s| s < x);
        if idx == 0 {
            0.0
        } else {
            self.cum_probs[idx - 1]
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ α}`; `-∞` at α = 0, the largest
    /// support point at α = 1.
    pub fn quantile(&self, level: QuantileLevel) -> f64 {
        let a = level.value();
        if a <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if a >= 1.0 {
            return self.max();
        }
        let idx = self.cum_probs.partition_point(|&c| c < a - LEVEL_TOL);
        self.support[idx.min(self.support.len() - 1)]
    }

    /// Writes `support,cum_prob` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["support", "cum_prob"])?;
        for (s, c) in self.support.iter().zip(&self.cum_probs) {
            wr.write_record([s.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["support", "cum_prob"] {
            return Err(Error::invalid("expected header support,cum_prob"));
        }
        let (mut support, mut cum) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::invalid("malformed step distribution row"))
            };
            support.push(parse(0)?);
            cum.push(parse(1)?);
        }
        Self::new(support, cum)
    }
}

/// Empirical distribution: mass `1/len` at each value, ties merged.
pub fn edf(values: &[f64]) -> Result<StepDistribution> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(StepDistribution::from_sorted_values(&sorted))
}

/// Generalized inverse of `f` at level `alpha`.
pub fn quantile(f: &StepDistribution, level: QuantileLevel) -> f64 {
    f.quantile(level)
}

/// Exact `sup_x {G(x) − F(x)}`, evaluated on the merged support. Always ≥ 0
/// since both functions vanish as x → −∞.
pub fn sup_diff(g: &StepDistribution, f: &StepDistribution) -> f64 {
    let (gs, gc) = (g.support(), g.cum_probs());
    let (fs, fc) = (f.support(), f.cum_probs());
    let (mut i, mut j) = (0, 0);
    let (mut gv, mut fv) = (0.0, 0.0);
    let mut best: f64 = 0.0;
    while i < gs.len() || j < fs.len() {
        let x = match (gs.get(i), fs.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < gs.len() && gs[i] <= x {
            gv = gc[i];
            i += 1;
        }
        while j < fs.len() && fs[j] <= x {
            fv = fc[j];
            j += 1;
        }
        best = best.max(gv - fv);
    }
    best
}

/// `sup_x |G(x) − F(x)|`.
pub fn kolmogorov_distance(g: &StepDistribution, f: &StepDistribution) -> f64 {
    sup_diff(g, f).max(sup_diff(f, g))
}

/// Markov/DKW bound `(1/ε)·√(2π/k_n)` on `P{sup |L_n − J_b| > ε}`.
pub fn dkw_bound(epsilon: f64, k_n: usize) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if k_n == 0 {
        return Err(Error::invalid("k_n must be at least 1"));
    }
    Ok((2.0 * std::f64::consts::PI / k_n as f64).sqrt() / epsilon)
}
