//! Sample-moment estimation from historical return series, plus the
//! minimum-variance baseline used for comparisons.

use crate::closed_form::{AssetMoments, WeightVector};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// A rectangular panel of simple per-period returns: `T ≥ 2` periods over
/// `n ≥ 2` uniquely labeled assets, no missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    asset_names: Vec<String>,
    rows: Vec<Vec<f64>>, // rows[t][i] = return of asset i in period t
}

impl ReturnSeries {
    pub fn new(asset_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = asset_names.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 assets, got {n}"
            )));
        }
        for (i, name) in asset_names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidInput(format!("empty asset name at column {i}")));
            }
            if asset_names[..i].contains(name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate asset name \"{name}\""
                )));
            }
        }
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 periods, got {}",
                rows.len()
            )));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "period {t} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite return at period {t}, column {i}"
                )));
            }
        }
        Ok(Self { asset_names, rows })
    }

    #[inline]
    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    #[inline]
    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }

    #[inline]
    pub fn periods(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Sample mean vector and sample covariance (divisor `T − 1`), validated
/// positive-definite before returning. Fewer periods than assets, constant
/// columns or collinear assets all surface as [`Error::NotSpd`].
pub fn estimate_moments(series: &ReturnSeries) -> Result<AssetMoments> {
    let n = series.n_assets();
    let t = series.periods();
    let rows = series.rows();

    let mut mean = vec![0.0; n];
    for row in rows {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }

    let divisor = (t - 1) as f64;
    let omega = SymMatrix::from_lower(n, |i, j| {
        let mut acc = 0.0;
        for row in rows {
            acc += (row[i] - mean[i]) * (row[j] - mean[j]);
        }
        acc / divisor
    })?;

    AssetMoments::new(mean, omega)
}

/// Minimum-variance budget shares `Ω⁻¹1 / Σ(Ω⁻¹1)`. At this point the
/// variance gradient `2Ωw` has all components equal, the stationarity
/// condition on the budget hyperplane.
pub fn min_variance_weights(omega: &SymMatrix) -> Result<WeightVector> {
    let ones = vec![1.0; omega.n()];
    let x = linalg::solve(omega, &ones)?;
    let sum: f64 = x.iter().sum();
    if sum.abs() <= linalg::REL_EPS * linalg::norm_1_vec(&x) {
        return Err(Error::DegenerateNormalization);
    }
    Ok(WeightVector::new(x.iter().map(|v| v / sum).collect()))
}
