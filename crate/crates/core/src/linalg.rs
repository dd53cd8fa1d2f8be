//! Minimal dense symmetric linear algebra for portfolio-scale problems.
//!
//! Covariance matrices here are small (a handful up to a few hundred assets),
//! dense and symmetric positive-definite, so an unpivoted Cholesky
//! factorization with a relative pivot threshold is all that is needed.
//! Singular input is a meaningful caller error, never silently regularized.

use crate::error::{Error, Result};

/// Relative threshold used for factorization pivots and degeneracy guards.
/// All thresholds are scale-matched so that rescaling inputs (percent vs.
/// decimal returns) does not change accept/reject decisions.
pub const REL_EPS: f64 = 1e-12;

/// Dense symmetric matrix with exactly mirrored storage.
///
/// Symmetry is enforced at construction: `entries[i][j]` must equal
/// `entries[j][i]` bit-for-bit, or the caller must ask for explicit
/// symmetrization. Dimension is at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // row-major, n*n
}

impl SymMatrix {
    /// Builds a matrix from full rows, requiring exact symmetry as written.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        Self::validate_shape(rows, n)?;
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate().skip(i + 1) {
                if x != rows[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { n, data })
    }

    /// Builds a matrix from full rows, averaging `A` with its transpose.
    pub fn from_rows_symmetrized(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        Self::validate_shape(rows, n)?;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (rows[i][j] + rows[j][i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a symmetric matrix from its lower triangle evaluated by `f`.
    /// `f(i, j)` is called only for `i >= j` and mirrored.
    pub fn from_lower<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix dimension must be at least 2, got {n}"
            )));
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite matrix entry at ({i},{j})"
                    )));
                }
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_lower(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    fn validate_shape(rows: &[Vec<f64>], n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "matrix dimension must be at least 2, got {n}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite matrix entry at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Rows as owned vectors, mainly for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// `A x` for a vector of matching length.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        (0..self.n)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).fold(0.0, |m, i| m.max(self.get(i, i).abs()))
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).fold(0.0, |m: f64, i| {
            m.max(self.row(i).iter().map(|x| x.abs()).sum())
        })
    }

    /// Reorders rows and columns by `perm`: entry (i, j) of the result is
    /// entry (perm[i], perm[j]) of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length mismatch");
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, data }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>, // row-major, upper part unused
}

impl CholeskyFactor {
    /// Factors `a = L Lᵗ`, requiring every pivot (the diagonal value before
    /// the square root) to exceed `REL_EPS` times the largest diagonal entry
    /// of `a`. Returns the first failing pivot otherwise.
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.n();
        let threshold = REL_EPS * a.max_abs_diag();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > threshold) {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, lower: l })
    }

    /// Solves `L Lᵗ x = b` by forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let l = &self.lower;
        let mut x = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                x[i] -= l[i * n + k] * x[k];
            }
            x[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= l[k * n + i] * x[k];
            }
            x[i] /= l[i * n + i];
        }
        Ok(x)
    }
}

/// True iff a positive-definite factorization of `omega` succeeds with every
/// pivot above the relative threshold.
pub fn check_spd(omega: &SymMatrix) -> bool {
    CholeskyFactor::new(omega).is_ok()
}

/// Solves `omega · x = b` for symmetric positive-definite `omega`.
pub fn solve(omega: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != omega.n() {
        return Err(Error::DimensionMismatch {
            expected: omega.n(),
            got: b.len(),
        });
    }
    CholeskyFactor::new(omega)?.solve(b)
}

/// The bilinear form `xᵗ omega y`, evaluated over the triangle so that
/// swapping `x` and `y` gives a bit-identical result.
pub fn quad_form(x: &[f64], omega: &SymMatrix, y: &[f64]) -> Result<f64> {
    let n = omega.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let mut acc = 0.0;
    for i in 0..n {
        // grouping keeps the result bit-identical under swapping x and y
        acc += omega.get(i, i) * (x[i] * y[i]);
        for j in 0..i {
            acc += omega.get(i, j) * (x[i] * y[j] + x[j] * y[i]);
        }
    }
    Ok(acc)
}

/// Small dense rectangular matrix, used for the mean-difference system.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>, // row-major
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).fold(0.0, |m: f64, i| {
            m.max(self.row(i).iter().map(|x| x.abs()).sum())
        })
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm_inf_vec(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[inline]
pub fn norm_1_vec(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}
