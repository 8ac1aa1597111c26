//! Small dense symmetric-matrix helpers sized for k ≤ 12.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix rows must all have length equal to the row count"));
        }
        Ok(Self { dim, data: rows.concat() })
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid("row-major data length must be dim²"));
        }
        Ok(Self { dim, data })
    }

    /// Equicorrelation matrix: unit diagonal, `rho` elsewhere.
    pub fn equicorrelation(dim: usize, rho: f64) -> Self {
        let mut m = Self::identity(dim);
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    m.data[i * dim + j] = rho;
                }
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `self + c·I`.
    pub fn add_ridge(&self, c: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += c;
        }
        m
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in (col + 1)..n {
                let f = a[r * n + col] / p;
                if f != 0.0 {
                    for c in col..n {
                        a[r * n + c] -= f * a[col * n + c];
                    }
                }
            }
        }
        det
    }

    /// Lower Cholesky factor; fails unless the matrix is positive definite.
    pub fn cholesky(&self) -> Result<Cholesky> {
        cholesky_in_place(self.dim, &self.data).map(|l| Cholesky { dim: self.dim, l })
    }
}

/// Lower-triangular factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// Solve `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        solve_with_factor(self.dim, &self.l, rhs);
    }

    /// `L · v` (used to colour standard normal vectors).
    pub fn mul_lower(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = (0..=i).map(|j| self.l[i * n + j] * v[j]).sum();
        }
    }
}

/// Cholesky of a row-major `dim × dim` matrix. Relative pivot tolerance 1e-13.
pub(crate) fn cholesky_in_place(dim: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    let scale = (0..dim).map(|i| a[i * dim + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for p in 0..j {
                s -= l[i * dim + p] * l[j * dim + p];
            }
            if i == j {
                if !(s > 1e-13 * scale) {
                    return Err(Error::Singular);
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

pub(crate) fn solve_with_factor(dim: usize, l: &[f64], rhs: &mut [f64]) {
    for i in 0..dim {
        let mut s = rhs[i];
        for p in 0..i {
            s -= l[i * dim + p] * rhs[p];
        }
        rhs[i] = s / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut s = rhs[i];
        for p in (i + 1)..dim {
            s -= l[p * dim + i] * rhs[p];
        }
        rhs[i] = s / l[i * dim + i];
    }
}
