//! Per-coordinate moments of a sample or of a count-weighted resample.

use crate::dist::Sample;
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Means, divisor-`n` standard deviations and (optionally) the correlation
/// matrix of a sample.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub n: usize,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub corr: Option<SquareMatrix>,
}

impl SampleStats {
    /// Fails with `DegenerateCoordinate(j)` when column `j` is constant.
    pub fn from_sample(sample: &Sample, with_corr: bool) -> Result<Self> {
        let (n, k) = (sample.n(), sample.k());
        let nf = n as f64;
        let means = sample.means();
        let mut ss = vec![0.0; if with_corr { k * k } else { k }];
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        let mut dev = vec![0.0; k];
        for i in 0..n {
            let row = sample.row(i);
            for j in 0..k {
                dev[j] = row[j] - means[j];
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
            accumulate(&mut ss, &dev, 1.0, with_corr);
        }
        finish(n, nf, means, &ss, &lo, &hi, with_corr)
    }

    /// Moments of the resample that repeats row `i` of `base` `counts[i]` times.
    /// `shift` (usually the base means) keeps the one-pass sums well conditioned.
    pub fn from_counts(base: &Sample, counts: &[u32], shift: &[f64], with_corr: bool) -> Result<Self> {
        let k = base.k();
        let mut sum = vec![0.0; k];
        let mut ss = vec![0.0; if with_corr { k * k } else { k }];
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        let mut dev = vec![0.0; k];
        let mut n = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let w = c as f64;
            n += c as usize;
            let row = base.row(i);
            for j in 0..k {
                dev[j] = row[j] - shift[j];
                sum[j] += w * dev[j];
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
            accumulate(&mut ss, &dev, w, with_corr);
        }
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let nf = n as f64;
        let dmean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        // Convert raw shifted second moments to centered ones.
        if with_corr {
            for a in 0..k {
                for b in 0..k {
                    ss[a * k + b] -= nf * dmean[a] * dmean[b];
                }
            }
        } else {
            for j in 0..k {
                ss[j] -= nf * dmean[j] * dmean[j];
            }
        }
        let means = dmean.iter().zip(shift).map(|(d, s)| d + s).collect();
        finish(n, nf, means, &ss, &lo, &hi, with_corr)
    }

    /// `√n (X̄_j − μ_j) / S_j` for each coordinate.
    pub fn z(&self, mu: &[f64]) -> Vec<f64> {
        let rn = (self.n as f64).sqrt();
        self.means.iter().zip(&self.sds).zip(mu).map(|((m, s), mu)| rn * (m - mu) / s).collect()
    }
}

#[inline]
fn accumulate(ss: &mut [f64], dev: &[f64], w: f64, with_corr: bool) {
    let k = dev.len();
    if with_corr {
        for a in 0..k {
            let wa = w * dev[a];
            for b in 0..=a {
                ss[a * k + b] += wa * dev[b];
            }
        }
    } else {
        for j in 0..k {
            ss[j] += w * dev[j] * dev[j];
        }
    }
}

fn finish(
    n: usize,
    nf: f64,
    means: Vec<f64>,
    ss: &[f64],
    lo: &[f64],
    hi: &[f64],
    with_corr: bool,
) -> Result<SampleStats> {
    let k = means.len();
    if let Some(j) = (0..k).find(|&j| lo[j] == hi[j]) {
        return Err(Error::DegenerateCoordinate(j));
    }
    let var = |j: usize| if with_corr { ss[j * k + j] } else { ss[j] } / nf;
    let sds: Vec<f64> = (0..k).map(|j| var(j).max(0.0).sqrt()).collect();
    if let Some(j) = sds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateCoordinate(j));
    }
    let corr = with_corr.then(|| {
        let mut c = SquareMatrix::identity(k);
        for a in 0..k {
            for b in 0..a {
                let r = (ss[a * k + b] / nf / (sds[a] * sds[b])).clamp(-1.0, 1.0);
                c.set(a, b, r);
                c.set(b, a, r);
            }
        }
        c
    });
    Ok(SampleStats { n, means, sds, corr })
}
