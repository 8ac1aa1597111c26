//! Studentized and plain mean roots.

use crate::dist::Sample;
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

use super::stats::SampleStats;

fn check_mu(sample: &Sample, mu: &[f64]) -> Result<()> {
    if mu.len() != sample.k() {
        return Err(Error::invalid(format!("mu has {} entries, sample has {} columns", mu.len(), sample.k())));
    }
    Ok(())
}

fn check_single_column(sample: &Sample) -> Result<()> {
    if sample.k() != 1 {
        return Err(Error::invalid(format!("expected a 1-column sample, got {} columns", sample.k())));
    }
    Ok(())
}

/// `√n (X̄_j − μ_j) / S_j` with divisor-`n` standard deviations.
pub fn z_vector(sample: &Sample, mu: &[f64]) -> Result<Vec<f64>> {
    check_mu(sample, mu)?;
    Ok(SampleStats::from_sample(sample, false)?.z(mu))
}

pub fn max_studentized_mean_root(sample: &Sample, mu: &[f64]) -> Result<f64> {
    Ok(max_of(&z_vector(sample, mu)?))
}

/// `f(Z_n, Ω̂_n)` where `Ω̂_n` is the sample correlation matrix.
pub fn general_f_root(sample: &Sample, mu: &[f64], f: &dyn Fn(&[f64], &SquareMatrix) -> f64) -> Result<f64> {
    check_mu(sample, mu)?;
    let st = SampleStats::from_sample(sample, true)?;
    Ok(f(&st.z(mu), st.corr.as_ref().unwrap()))
}

/// `√n (max(X̄, 0) − μ)` for a mean known to be nonnegative.
pub fn constrained_mean_root(sample: &Sample, mu: f64) -> Result<f64> {
    if mu < 0.0 {
        return Err(Error::invalid(format!("constrained mean requires mu >= 0, got {mu}")));
    }
    constrained_mean_root_unchecked(sample, mu)
}

/// Same as [`constrained_mean_root`] without the sign check on `mu`; used when
/// the centering is a plug-in estimate such as the sample mean.
pub fn constrained_mean_root_unchecked(sample: &Sample, mu: f64) -> Result<f64> {
    check_single_column(sample)?;
    let n = sample.n() as f64;
    let xbar = sample.means()[0];
    Ok(n.sqrt() * (xbar.max(0.0) - mu))
}

/// `max_j √n X̄_j / S_j`.
pub fn moment_max_stat(sample: &Sample) -> Result<f64> {
    max_studentized_mean_root(sample, &vec![0.0; sample.k()])
}

/// `n^τ (X̄ − μ)` for a single column.
pub fn centered_mean_root(sample: &Sample, mu: f64, tau_exponent: f64) -> Result<f64> {
    check_single_column(sample)?;
    let n = sample.n() as f64;
    Ok(n.powf(tau_exponent) * (sample.means()[0] - mu))
}

pub(crate) fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
