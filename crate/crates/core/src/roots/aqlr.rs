//! Adjusted quasi-likelihood ratio root: a quadratic-form distance from the
//! studentized mean vector to the nonpositive orthant.

use crate::dist::Sample;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, solve_with_factor, SquareMatrix};

use super::stats::SampleStats;

/// Largest dimension handled by the exact active-set enumeration.
pub const MAX_EXACT_DIM: usize = 12;

/// Default ridge threshold for [`omega_tilde`].
pub const DEFAULT_EPS: f64 = 0.05;

/// `max(ε − det Ω̂, 0)·I + Ω̂`.
pub fn omega_tilde(omega_hat: &SquareMatrix, eps: f64) -> Result<SquareMatrix> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let ridge = (eps - omega_hat.determinant()).max(0.0);
    Ok(if ridge > 0.0 { omega_hat.add_ridge(ridge) } else { omega_hat.clone() })
}

/// Minimizer of `(z − t)' Ω⁻¹ (z − t)` over `t ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthantProjection {
    pub value: f64,
    pub t: Vec<f64>,
    /// Coordinates held at `t_j = 0`.
    pub fixed: Vec<usize>,
    /// Whether the returned candidate carries nonnegative multipliers.
    pub kkt: bool,
}

/// Exact solution by enumerating all `2^k` sets of coordinates fixed at zero.
///
/// For a fixed set `C` the free coordinates are `t_F = z_F − Ω_FC Ω_CC⁻¹ z_C`,
/// the objective is `z_C' Ω_CC⁻¹ z_C` and the multipliers are `2 Ω_CC⁻¹ z_C`.
pub fn orthant_projection(z: &[f64], omega: &SquareMatrix) -> Result<OrthantProjection> {
    let k = z.len();
    if omega.dim() != k {
        return Err(Error::invalid("z and omega dimensions differ"));
    }
    if k > MAX_EXACT_DIM {
        return Err(Error::ExactSolverLimit(k));
    }
    cholesky_in_place(k, omega.as_slice())?;
    let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    if z.iter().all(|&v| v <= 0.0) {
        return Ok(OrthantProjection { value: 0.0, t: z.to_vec(), fixed: Vec::new(), kkt: true });
    }

    let mut best: Option<(f64, bool, u32, Vec<f64>)> = None;
    let mut idx = Vec::with_capacity(k);
    let mut sub = Vec::with_capacity(k * k);
    let mut w = Vec::with_capacity(k);
    let mut t = vec![0.0; k];
    for mask in 0u32..(1u32 << k) {
        idx.clear();
        idx.extend((0..k).filter(|&j| mask >> j & 1 == 1));
        let c = idx.len();
        sub.clear();
        for &a in &idx {
            sub.extend(idx.iter().map(|&b| omega.get(a, b)));
        }
        w.clear();
        w.extend(idx.iter().map(|&j| z[j]));
        if c > 0 {
            let l = cholesky_in_place(c, &sub)?;
            solve_with_factor(c, &l, &mut w);
        }
        let value: f64 = idx.iter().zip(&w).map(|(&j, wj)| z[j] * wj).sum();
        let mut feasible = true;
        for j in 0..k {
            if mask >> j & 1 == 1 {
                t[j] = 0.0;
            } else {
                t[j] = z[j] - idx.iter().zip(&w).map(|(&a, wa)| omega.get(j, a) * wa).sum::<f64>();
                if t[j] > tol {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let kkt = w.iter().all(|&m| m >= -tol);
        let better = match &best {
            None => true,
            Some((bv, bk, _, _)) => (kkt && !bk) || (kkt == *bk && value < *bv),
        };
        if better {
            best = Some((value, kkt, mask, t.iter().map(|v| v.min(0.0)).collect()));
        }
    }
    // The empty fixed set is infeasible only if some z_j > 0, in which case
    // fixing every coordinate is always feasible, so `best` is set.
    let (value, kkt, mask, t) = best.expect("full fixed set is always feasible");
    Ok(OrthantProjection {
        value: value.max(0.0),
        t,
        fixed: (0..k).filter(|&j| mask >> j & 1 == 1).collect(),
        kkt,
    })
}

/// `inf_{t ≤ 0} (Z_n − t)' Ω̃_n⁻¹ (Z_n − t)`; with `mu = 0` this is the test statistic.
pub fn aqlr_root(sample: &Sample, mu: &[f64], eps: f64) -> Result<f64> {
    if sample.k() > MAX_EXACT_DIM {
        return Err(Error::ExactSolverLimit(sample.k()));
    }
    if mu.len() != sample.k() {
        return Err(Error::invalid("mu length differs from sample width"));
    }
    let st = SampleStats::from_sample(sample, true)?;
    aqlr_from_stats(&st, mu, eps)
}

pub(crate) fn aqlr_from_stats(st: &SampleStats, mu: &[f64], eps: f64) -> Result<f64> {
    let om = omega_tilde(st.corr.as_ref().expect("correlation requested"), eps)?;
    Ok(orthant_projection(&st.z(mu), &om)?.value)
}
