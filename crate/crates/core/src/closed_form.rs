//! Closed-form maximization of the risk-adjusted return under the budget
//! constraint.
//!
//! For expected returns `μ` and a positive-definite covariance `Ω`, the
//! objective is `Q(w) = f(w) / sqrt(g(w))` with `f(w) = μᵗw` and
//! `g(w) = wᵗΩw`, maximized over weight vectors that sum to one (negative
//! weights, i.e. short positions, are allowed). Every budget-feasible
//! stationary point has the form `w = α + tβ`, where:
//!
//! * `u` and `v` span the null space of the tridiagonal mean-difference
//!   matrix `B`, built by a backward recursion with coefficients
//!   `a_i = (μ_{i+2}−μ_i)/(μ_{i+2}−μ_{i+1})` and
//!   `b_i = (μ_i−μ_{i+1})/(μ_{i+2}−μ_{i+1})`;
//! * `α = Ω⁻¹u / Σ(Ω⁻¹u)` is budget-feasible and
//!   `β = Ω⁻¹v − Σ(Ω⁻¹v)·α` is budget-neutral;
//! * the stationary parameter is
//!   `t* = −[(μᵗβ)(αᵗΩα) − (μᵗα)(αᵗΩβ)] / [(μᵗβ)(αᵗΩβ) − (μᵗα)(βᵗΩβ)]`.
//!
//! The recursion requires consecutive expected returns to differ, so the
//! solver internally sorts assets by decreasing mean and un-permutes the
//! result; every intermediate is kept in a [`ClosedFormTrace`] so that the
//! pipeline can be audited step by step. Explicit two- and three-asset
//! formulas are provided as independent cross-checks.

use crate::error::{Error, Result};
use crate::estimation::min_variance_weights;
use crate::linalg::{self, quad_form, SymMatrix};

/// Expected-return vector and return covariance for `n ≥ 2` assets.
///
/// Construction validates that the dimensions agree and that the covariance
/// is symmetric positive-definite, so downstream code can rely on both.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetMoments {
    mu: Vec<f64>,
    omega: SymMatrix,
}

impl AssetMoments {
    pub fn new(mu: Vec<f64>, omega: SymMatrix) -> Result<Self> {
        if mu.len() != omega.n() {
            return Err(Error::DimensionMismatch {
                expected: omega.n(),
                got: mu.len(),
            });
        }
        if let Some(i) = mu.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite expected return at index {i}"
            )));
        }
        linalg::CholeskyFactor::new(&omega)?;
        Ok(Self { mu, omega })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    #[inline]
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn omega(&self) -> &SymMatrix {
        &self.omega
    }

    /// The same moments with assets reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mu = perm.iter().map(|&k| self.mu[k]).collect();
        Self {
            mu,
            omega: self.omega.permuted(perm),
        }
    }
}

/// Budget shares, one per asset. Entries may be negative (short positions);
/// solver outputs sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Self {
        Self(w)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Backward-recursion coefficients; `a[i] + b[i] == 1` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionCoeffs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Intermediates of the closed-form pipeline, in the internally sorted asset
/// order (see [`ClosedFormTrace::permutation`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub coeffs: RecursionCoeffs,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub t_star: f64,
}

/// Full audit trail of a solve.
///
/// `permutation[k]` is the original index of the asset at internal position
/// `k` (assets are sorted by decreasing mean internally). The pipeline
/// intermediates are `None` only on the all-means-equal fallback, where the
/// minimum-variance portfolio is returned instead and `all_means_equal` is
/// set. `weights` is in the original asset order, identical to the weights
/// returned next to the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormTrace {
    pub permutation: Vec<usize>,
    pub all_means_equal: bool,
    pub pipeline: Option<PipelineTrace>,
    pub weights: WeightVector,
}

impl ClosedFormTrace {
    /// Rebuilds the weights from `α + t*β` and un-permutes them, for checking
    /// that the trace reproduces the answer. `None` on the fallback path.
    pub fn reconstructed_weights(&self) -> Option<WeightVector> {
        let p = self.pipeline.as_ref()?;
        let n = p.alpha.len();
        let mut w = vec![0.0; n];
        for k in 0..n {
            w[self.permutation[k]] = p.alpha[k] + p.t_star * p.beta[k];
        }
        Some(WeightVector::new(w))
    }
}

/// Expected return, variance and risk-adjusted return of a portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioReport {
    /// `f = μᵗw`, per period.
    pub expected_return: f64,
    /// `g = wᵗΩw`, per period squared.
    pub variance: f64,
    /// `Q = f / sqrt(g)`.
    pub risk_adjusted_return: f64,
}

/// Relative tolerance for detecting tied means, scaled by `max |μ_i|`.
fn mean_tie_eps(mu: &[f64]) -> f64 {
    linalg::REL_EPS * linalg::norm_inf_vec(mu)
}

/// Recursion coefficients `a_i = (μ_{i+2}−μ_i)/(μ_{i+2}−μ_{i+1})` and
/// `b_i = (μ_i−μ_{i+1})/(μ_{i+2}−μ_{i+1})` for `i = 0..n−2` (0-based).
///
/// Assets must already be ordered so that consecutive means differ; a
/// vanishing denominator is reported as [`Error::EqualConsecutiveMeans`]
/// with the offending coefficient index.
pub fn recursion_coefficients(mu: &[f64]) -> Result<RecursionCoeffs> {
    let n = mu.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "recursion coefficients need at least 3 assets, got {n}"
        )));
    }
    let eps = mean_tie_eps(mu);
    let mut a = Vec::with_capacity(n - 2);
    let mut b = Vec::with_capacity(n - 2);
    for i in 0..n - 2 {
        let den = mu[i + 2] - mu[i + 1];
        if den.abs() <= eps {
            return Err(Error::EqualConsecutiveMeans { index: i });
        }
        a.push((mu[i + 2] - mu[i]) / den);
        b.push((mu[i] - mu[i + 1]) / den);
    }
    Ok(RecursionCoeffs { a, b })
}

fn uv_from_coeffs(n: usize, coeffs: &RecursionCoeffs) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    u[n - 2] = 1.0;
    v[n - 1] = 1.0;
    for i in (0..n.saturating_sub(2)).rev() {
        u[i] = coeffs.a[i] * u[i + 1] + coeffs.b[i] * u[i + 2];
        v[i] = coeffs.a[i] * v[i + 1] + coeffs.b[i] * v[i + 2];
    }
    (u, v)
}

/// The two null-space basis vectors of the mean-difference system, built by
/// the backward recursion with boundary values `u = (…, 1, 0)` and
/// `v = (…, 0, 1)`. For `n = 2` these are exactly `(1, 0)` and `(0, 1)`.
pub fn build_uv(mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = mu.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 assets, got {n}"
        )));
    }
    if n == 2 {
        return Ok((vec![1.0, 0.0], vec![0.0, 1.0]));
    }
    let coeffs = recursion_coefficients(mu)?;
    Ok(uv_from_coeffs(n, &coeffs))
}

/// The `(n−2) × n` tridiagonal matrix of mean differences: row `i` has
/// `(μ_{i+2}−μ_{i+1}, μ_i−μ_{i+2}, μ_{i+1}−μ_i)` at columns `i, i+1, i+2`.
/// Every budget-feasible stationary point `w` satisfies `B Ω w = 0`.
pub fn build_b(mu: &[f64]) -> Result<linalg::Matrix> {
    let n = mu.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "the mean-difference matrix needs at least 3 assets, got {n}"
        )));
    }
    let mut b = linalg::Matrix::zeros(n - 2, n);
    for i in 0..n - 2 {
        b.set(i, i, mu[i + 2] - mu[i + 1]);
        b.set(i, i + 1, mu[i] - mu[i + 2]);
        b.set(i, i + 2, mu[i + 1] - mu[i]);
    }
    Ok(b)
}

/// The budget-feasible point `α = Ω⁻¹u / Σ(Ω⁻¹u)` and budget-neutral
/// direction `β = Ω⁻¹v − Σ(Ω⁻¹v)·α`; `Σα = 1` and `Σβ = 0` by construction.
pub fn compute_alpha_beta(
    omega: &SymMatrix,
    u: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let xu = linalg::solve(omega, u)?;
    let xv = linalg::solve(omega, v)?;
    let sum_u: f64 = xu.iter().sum();
    if sum_u.abs() <= linalg::REL_EPS * linalg::norm_1_vec(&xu) {
        return Err(Error::DegenerateNormalization);
    }
    let alpha: Vec<f64> = xu.iter().map(|x| x / sum_u).collect();
    let sum_v: f64 = xv.iter().sum();
    let mut beta: Vec<f64> = xv
        .iter()
        .zip(&alpha)
        .map(|(x, a)| x - sum_v * a)
        .collect();
    // One re-projection onto the budget-neutral plane: the roundoff in Σβ is
    // proportional to ‖Ω⁻¹v‖, which can dwarf ‖β‖ when the recursion vectors
    // are large; after this step the defect is second-order.
    let defect: f64 = beta.iter().sum();
    for (b, a) in beta.iter_mut().zip(&alpha) {
        *b -= defect * a;
    }
    Ok((alpha, beta))
}

/// The unique stationary parameter of `t ↦ Q(α + tβ)`:
/// `t* = −[(μᵗβ)(αᵗΩα) − (μᵗα)(αᵗΩβ)] / [(μᵗβ)(αᵗΩβ) − (μᵗα)(βᵗΩβ)]`.
///
/// The stationarity condition is linear in `t` (its quadratic term cancels),
/// so a vanishing denominator means `Q` is monotone along `β` and no
/// stationary point exists.
pub fn compute_t_star(
    mu: &[f64],
    omega: &SymMatrix,
    alpha: &[f64],
    beta: &[f64],
) -> Result<f64> {
    let mu_alpha = linalg::dot(mu, alpha);
    let mu_beta = linalg::dot(mu, beta);
    let aoa = quad_form(alpha, omega, alpha)?;
    let aob = quad_form(alpha, omega, beta)?;
    let bob = quad_form(beta, omega, beta)?;
    let num = mu_beta * aoa - mu_alpha * aob;
    let den = mu_beta * aob - mu_alpha * bob;
    // scale-matched degeneracy threshold; bob >= 0 for positive-definite omega
    if den.abs() <= linalg::REL_EPS * mu_alpha.abs() * bob {
        return Err(Error::DegenerateDenominator);
    }
    Ok(-num / den)
}

/// Expected return, variance and risk-adjusted return of `w` under the given
/// moments. Variance is strictly positive for any nonzero `w` because the
/// covariance is positive-definite.
pub fn portfolio_metrics(w: &WeightVector, moments: &AssetMoments) -> PortfolioReport {
    report_for(w.as_slice(), moments.mu(), moments.omega())
}

fn report_for(w: &[f64], mu: &[f64], omega: &SymMatrix) -> PortfolioReport {
    assert_eq!(w.len(), mu.len(), "weights length mismatch");
    let f = linalg::dot(mu, w);
    let g = quad_form(w, omega, w).expect("dimensions checked");
    debug_assert!(g > 0.0, "variance must be positive for nonzero weights");
    PortfolioReport {
        expected_return: f,
        variance: g,
        risk_adjusted_return: f / g.sqrt(),
    }
}

fn q_of(w: &[f64], mu: &[f64], omega: &SymMatrix) -> f64 {
    report_for(w, mu, omega).risk_adjusted_return
}

/// Stable sort of asset indices by decreasing mean (ties keep original order).
fn sort_permutation(mu: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mu.len()).collect();
    idx.sort_by(|&i, &j| mu[j].total_cmp(&mu[i]));
    idx
}

fn solve_impl(moments: &AssetMoments, guard_maximum: bool) -> Result<(WeightVector, ClosedFormTrace)> {
    let n = moments.n();
    let mu = moments.mu();
    let perm = sort_permutation(mu);
    let eps = mean_tie_eps(mu);

    let spread = mu[perm[0]] - mu[perm[n - 1]];
    if spread <= eps {
        // All means tied: Q is a constant multiple of 1/sqrt(g) on the budget
        // set, so the minimum-variance portfolio is the analytic limit.
        let weights = min_variance_weights(moments.omega())?;
        let trace = ClosedFormTrace {
            permutation: perm,
            all_means_equal: true,
            pipeline: None,
            weights: weights.clone(),
        };
        return Ok((weights, trace));
    }

    let sorted = moments.permuted(&perm);
    let mu_s = sorted.mu();
    for j in 0..n - 1 {
        if (mu_s[j] - mu_s[j + 1]).abs() <= eps {
            return Err(Error::EqualConsecutiveMeans { index: j });
        }
    }

    let coeffs = if n == 2 {
        RecursionCoeffs {
            a: Vec::new(),
            b: Vec::new(),
        }
    } else {
        recursion_coefficients(mu_s)?
    };
    let (u, v) = uv_from_coeffs(n, &coeffs);
    let (alpha, beta) = compute_alpha_beta(sorted.omega(), &u, &v)?;
    let t_star = compute_t_star(mu_s, sorted.omega(), &alpha, &beta)?;

    let mut w = vec![0.0; n];
    for k in 0..n {
        w[perm[k]] = alpha[k] + t_star * beta[k];
    }
    let weights = WeightVector::new(w);

    if guard_maximum {
        // The construction only enforces first-order conditions; when
        // μᵗΩ⁻¹1 < 0 the stationary point minimizes Q instead. Compare
        // against the feasible candidates we can evaluate cheaply.
        let q_star = q_of(&weights, mu, moments.omega());
        let q_alpha = q_of(&alpha, mu_s, sorted.omega());
        let minvar = min_variance_weights(moments.omega())?;
        let q_minvar = q_of(&minvar, mu, moments.omega());
        let (q_alt, alternative) = if q_alpha > q_minvar {
            let mut a = vec![0.0; n];
            for k in 0..n {
                a[perm[k]] = alpha[k];
            }
            (q_alpha, a)
        } else {
            (q_minvar, minvar.into_vec())
        };
        if q_star < q_alt - 1e-12 {
            return Err(Error::StationaryPointNotMax {
                stationary: weights.into_vec(),
                alternative,
                q_stationary: q_star,
                q_alternative: q_alt,
            });
        }
    }

    let trace = ClosedFormTrace {
        permutation: perm,
        all_means_equal: false,
        pipeline: Some(PipelineTrace {
            coeffs,
            u,
            v,
            alpha,
            beta,
            t_star,
        }),
        weights: weights.clone(),
    };
    Ok((weights, trace))
}

/// Optimal budget shares maximizing the risk-adjusted return, with the full
/// audit trace.
///
/// Assets are sorted internally by decreasing mean and the result is
/// un-permuted, so the answer is independent of input order. If all means are
/// tied the minimum-variance portfolio is returned with the
/// `all_means_equal` flag set; if only some consecutive sorted means tie the
/// problem is rejected with [`Error::EqualConsecutiveMeans`]. After solving,
/// the candidate is verified to beat both the feasible point `α` and the
/// minimum-variance portfolio; otherwise [`Error::StationaryPointNotMax`] is
/// returned carrying both candidates (this happens when `μᵗΩ⁻¹1 < 0`, where
/// the unique stationary point is a minimizer).
pub fn solve_weights(moments: &AssetMoments) -> Result<(WeightVector, ClosedFormTrace)> {
    solve_impl(moments, true)
}

/// Same pipeline as [`solve_weights`] but without the maximum-vs-minimum
/// guard: returns the budget-feasible stationary point of the risk-adjusted
/// return even when that point is a minimizer. Useful for oracles and
/// cross-checks that verify stationarity rather than optimality.
pub fn stationary_point(moments: &AssetMoments) -> Result<(WeightVector, ClosedFormTrace)> {
    solve_impl(moments, false)
}

/// Explicit two-asset solution:
/// `w₁ = (μ₁σ₂₂ − μ₂σ₁₂) / D`, `w₂ = (μ₂σ₁₁ − μ₁σ₁₂) / D` with
/// `D = μ₁(σ₂₂−σ₁₂) + μ₂(σ₁₁−σ₁₂)`. Kept as an independent reference for the
/// general pipeline.
pub fn two_asset_weights(moments: &AssetMoments) -> Result<WeightVector> {
    if moments.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: moments.n(),
        });
    }
    let (m1, m2) = (moments.mu()[0], moments.mu()[1]);
    let o = moments.omega();
    let (s11, s12, s22) = (o.get(0, 0), o.get(0, 1), o.get(1, 1));
    let den = m1 * (s22 - s12) + m2 * (s11 - s12);
    let scale = m1.abs() * (s22.abs() + s12.abs()) + m2.abs() * (s11.abs() + s12.abs());
    if den.abs() <= linalg::REL_EPS * scale {
        return Err(Error::DegenerateDenominator);
    }
    Ok(WeightVector::new(vec![
        (m1 * s22 - m2 * s12) / den,
        (m2 * s11 - m1 * s12) / den,
    ]))
}

/// Explicit three-asset solution with the cofactor-style numerators and the
/// printed denominator `Δ`; the weights sum to one identically, which doubles
/// as a transcription check. Independent reference for the general pipeline.
pub fn three_asset_weights(moments: &AssetMoments) -> Result<WeightVector> {
    if moments.n() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: moments.n(),
        });
    }
    let (m1, m2, m3) = (moments.mu()[0], moments.mu()[1], moments.mu()[2]);
    let o = moments.omega();
    let (s11, s12, s13) = (o.get(0, 0), o.get(0, 1), o.get(0, 2));
    let (s22, s23, s33) = (o.get(1, 1), o.get(1, 2), o.get(2, 2));

    let w1 = m3 * (s13 * s22 - s12 * s23) + m2 * (s12 * s33 - s13 * s23)
        + m1 * (s23 * s23 - s22 * s33);
    let w2 = m3 * (s11 * s23 - s12 * s13) + m2 * (s13 * s13 - s11 * s33)
        + m1 * (s12 * s33 - s13 * s23);
    let w3 = m3 * (s12 * s12 - s11 * s22) + m2 * (s11 * s23 - s12 * s13)
        + m1 * (s13 * s22 - s12 * s23);

    let delta = m3 * (s12 * s12 - (s13 + s23) * s12 + (s13 - s11) * s22 + s11 * s23)
        + m2 * (-s13 * (s12 - s13 + s23) + s11 * (s23 - s33) + s12 * s33)
        + m1 * (s13 * (s22 - s23) + s23 * (s23 - s12) + (s12 - s22) * s33);

    let delta_scale = m3.abs()
        * (s12 * s12 + (s13.abs() + s23.abs()) * s12.abs()
            + (s13.abs() + s11.abs()) * s22.abs()
            + (s11 * s23).abs())
        + m2.abs()
            * (s13.abs() * (s12.abs() + s13.abs() + s23.abs())
                + s11.abs() * (s23.abs() + s33.abs())
                + (s12 * s33).abs())
        + m1.abs()
            * (s13.abs() * (s22.abs() + s23.abs())
                + s23.abs() * (s23.abs() + s12.abs())
                + (s12.abs() + s22.abs()) * s33.abs());
    if delta.abs() <= linalg::REL_EPS * delta_scale {
        return Err(Error::DegenerateDenominator);
    }
    Ok(WeightVector::new(vec![w1 / delta, w2 / delta, w3 / delta]))
}
