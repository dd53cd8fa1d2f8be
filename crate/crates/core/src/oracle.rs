//! Independent verification of solver outputs.
//!
//! A budget-feasible stationary point of `Q = f/√g` satisfies, per asset,
//! `2 f_i g − f g_i = 2 g^{3/2} λ` with `f_i = μ_i` and `g_i = 2(Ωw)_i`,
//! for a multiplier `λ` that does not depend on `i`. The checks here measure
//! violations of that condition directly (KKT residual and consecutive-ratio
//! form), compare against the classical tangency formula `Ω⁻¹μ / Σ(Ω⁻¹μ)`,
//! probe flatness with finite differences, and brute-force the objective on
//! a grid for two and three assets. None of them share intermediate results
//! with the solver pipeline.

use rayon::prelude::*;

use crate::closed_form::{
    portfolio_metrics, stationary_point, AssetMoments, WeightVector,
};
use crate::error::{Error, Result};
use crate::linalg::{self, quad_form};
use rand::Rng;
use rand_distr::StandardNormal;

/// Implied multiplier and per-asset violations of the stationarity condition.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    /// Mean over assets of `(2 f_i g − f g_i) / (2 g^{3/2})`; the values are
    /// identical across assets at an exact stationary point, so the mean is a
    /// neutral extraction of the multiplier.
    pub lambda_hat: f64,
    /// `r_i = 2 f_i g − f g_i − 2 g^{3/2} λ̂`.
    pub residuals: Vec<f64>,
    /// `max |r_i|` scaled by `2 g^{3/2} |λ̂| + |f| · max|g_i|`.
    pub norm: f64,
}

/// Stationarity residual of `w` under the given moments. At a true
/// stationary point the scaled norm vanishes to roundoff; order 1 otherwise.
pub fn kkt_residual(w: &WeightVector, moments: &AssetMoments) -> KktResidual {
    let n = moments.n();
    assert_eq!(w.len(), n, "weights length mismatch");
    let mu = moments.mu();
    let report = portfolio_metrics(w, moments);
    let (f, g) = (report.expected_return, report.variance);
    let g32 = g * g.sqrt();
    let grad_g: Vec<f64> = moments
        .omega()
        .matvec(w.as_slice())
        .iter()
        .map(|x| 2.0 * x)
        .collect();

    let vals: Vec<f64> = (0..n).map(|i| 2.0 * mu[i] * g - f * grad_g[i]).collect();
    let lambda_hat = vals.iter().sum::<f64>() / (n as f64) / (2.0 * g32);
    let residuals: Vec<f64> = vals.iter().map(|v| v - 2.0 * g32 * lambda_hat).collect();

    let max_r = linalg::norm_inf_vec(&residuals);
    let scale = 2.0 * g32 * lambda_hat.abs() + f.abs() * linalg::norm_inf_vec(&grad_g);
    let norm = if max_r == 0.0 { 0.0 } else { max_r / scale };
    KktResidual {
        lambda_hat,
        residuals,
        norm,
    }
}

/// Consecutive-ratio form of stationarity: at a stationary point every ratio
/// `(g_{i+1} − g_i) / (f_{i+1} − f_i)` equals `2g/f`. Returns the maximum
/// relative deviation over consecutive asset pairs, in the order given.
///
/// Requires consecutive means to differ and `f(w) ≠ 0`; both are denominators.
pub fn pairwise_ratio_check(w: &WeightVector, moments: &AssetMoments) -> Result<f64> {
    let n = moments.n();
    assert_eq!(w.len(), n, "weights length mismatch");
    let mu = moments.mu();
    let report = portfolio_metrics(w, moments);
    let (f, g) = (report.expected_return, report.variance);
    if f == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let target = 2.0 * g / f;
    let grad_g: Vec<f64> = moments
        .omega()
        .matvec(w.as_slice())
        .iter()
        .map(|x| 2.0 * x)
        .collect();
    let eps = linalg::REL_EPS * linalg::norm_inf_vec(mu);

    let mut worst = 0.0f64;
    for i in 0..n - 1 {
        let df = mu[i + 1] - mu[i];
        if df.abs() <= eps {
            return Err(Error::DegenerateDenominator);
        }
        let ratio = (grad_g[i + 1] - grad_g[i]) / df;
        worst = worst.max((ratio - target).abs() / target.abs());
    }
    Ok(worst)
}

/// Classical tangency portfolio `Ω⁻¹μ / Σ(Ω⁻¹μ)`, used as an independent
/// cross-check of the closed-form pipeline.
pub fn tangency_weights(moments: &AssetMoments) -> Result<WeightVector> {
    let x = linalg::solve(moments.omega(), moments.mu())?;
    let sum: f64 = x.iter().sum();
    if sum.abs() <= linalg::REL_EPS * linalg::norm_1_vec(&x) {
        return Err(Error::DegenerateNormalization);
    }
    Ok(WeightVector::new(x.iter().map(|v| v / sum).collect()))
}

/// Best grid point found by [`grid_search_max`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub weights: WeightVector,
    pub q_best: f64,
}

/// Exhaustive evaluation of `Q` on the budget hyperplane for two or three
/// assets. The free coordinates `w_1..w_{n−1}` sweep two boxes — one of
/// half-width `half_width` around the solver's stationary candidate, and a
/// fixed box `[−2, 3]` per axis to catch distant maxima — with `resolution`
/// points per axis and `w_n = 1 − Σ`. The better of the two boxes is
/// returned. Evaluation is parallelized over grid rows; ties resolve to the
/// lexicographically first grid point, so the result does not depend on the
/// parallel schedule.
pub fn grid_search_max(
    moments: &AssetMoments,
    half_width: f64,
    resolution: usize,
) -> Result<GridSearchResult> {
    let n = moments.n();
    if n > 3 {
        return Err(Error::InvalidInput(format!(
            "grid search supports 2 or 3 assets, got {n}"
        )));
    }
    if resolution < 100 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 100, got {resolution}"
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidInput(format!(
            "grid half-width must be positive, got {half_width}"
        )));
    }
    let (center, _) = stationary_point(moments)?;

    let local: Vec<(f64, f64)> = center
        .iter()
        .take(n - 1)
        .map(|&c| (c - half_width, c + half_width))
        .collect();
    let fixed: Vec<(f64, f64)> = vec![(-2.0, 3.0); n - 1];

    let best_local = sweep_box(moments, &local, resolution);
    let best_fixed = sweep_box(moments, &fixed, resolution);
    Ok(if best_fixed.q_best > best_local.q_best {
        best_fixed
    } else {
        best_local
    })
}

/// Scans one box; `bounds` has one `(lo, hi)` pair per free coordinate.
fn sweep_box(moments: &AssetMoments, bounds: &[(f64, f64)], resolution: usize) -> GridSearchResult {
    let n = moments.n();
    let mu = moments.mu();
    let omega = moments.omega();
    let steps: Vec<f64> = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) / (resolution - 1) as f64)
        .collect();

    let eval = |coords: &[f64]| -> f64 {
        let mut w = [0.0f64; 3];
        let mut sum = 0.0;
        for (k, &c) in coords.iter().enumerate() {
            w[k] = c;
            sum += c;
        }
        w[n - 1] = 1.0 - sum;
        let w = &w[..n];
        let f = linalg::dot(mu, w);
        let mut g = 0.0;
        for i in 0..n {
            g += omega.get(i, i) * w[i] * w[i];
            for j in 0..i {
                g += 2.0 * omega.get(i, j) * w[i] * w[j];
            }
        }
        f / g.sqrt()
    };

    // (q, flat lexicographic index); max by q, ties to the smaller index
    let better = |a: (f64, usize), b: (f64, usize)| -> (f64, usize) {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };

    let identity = (f64::NEG_INFINITY, usize::MAX);
    let (q_best, flat) = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let x0 = bounds[0].0 + steps[0] * i as f64;
            if bounds.len() == 1 {
                (eval(&[x0]), i)
            } else {
                let mut best = identity;
                for j in 0..resolution {
                    let x1 = bounds[1].0 + steps[1] * j as f64;
                    best = better(best, (eval(&[x0, x1]), i * resolution + j));
                }
                best
            }
        })
        .reduce(|| identity, better);

    let mut coords = Vec::with_capacity(n);
    if bounds.len() == 1 {
        coords.push(bounds[0].0 + steps[0] * flat as f64);
    } else {
        coords.push(bounds[0].0 + steps[0] * (flat / resolution) as f64);
        coords.push(bounds[1].0 + steps[1] * (flat % resolution) as f64);
    }
    let sum: f64 = coords.iter().sum();
    coords.push(1.0 - sum);
    GridSearchResult {
        weights: WeightVector::new(coords),
        q_best,
    }
}

/// Finite-difference flatness probe: estimates the directional derivative of
/// `Q` at `w` along `directions` random budget-neutral unit directions by
/// central differences with step `1e-6 · ‖w‖∞`, and returns the largest
/// magnitude scaled by `|Q(w)|`. Small at a stationary point.
pub fn directional_derivative_check<R: Rng + ?Sized>(
    w: &WeightVector,
    moments: &AssetMoments,
    directions: usize,
    rng: &mut R,
) -> f64 {
    let n = moments.n();
    assert_eq!(w.len(), n, "weights length mismatch");
    let q0 = portfolio_metrics(w, moments).risk_adjusted_return;
    let h = 1e-6 * linalg::norm_inf_vec(w.as_slice());
    let q_at = |pt: &[f64]| -> f64 {
        let f = linalg::dot(moments.mu(), pt);
        let g = quad_form(pt, moments.omega(), pt).expect("dimensions checked");
        f / g.sqrt()
    };

    let mut worst = 0.0f64;
    let mut done = 0;
    while done < directions {
        let mut d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        for x in &mut d {
            *x -= mean;
        }
        let norm = linalg::dot(&d, &d).sqrt();
        if norm < 1e-9 {
            continue;
        }
        for x in &mut d {
            *x /= norm;
        }
        let plus: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let slope = (q_at(&plus) - q_at(&minus)) / (2.0 * h);
        worst = worst.max(slope.abs());
        done += 1;
    }
    worst / q0.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::solve_weights;
    use crate::instances::random_moments;
    use crate::linalg::SymMatrix;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_moments() -> AssetMoments {
        AssetMoments::new(
            vec![0.1, 0.2],
            SymMatrix::from_rows(&[vec![0.04, 0.01], vec![0.01, 0.09]]).unwrap(),
        )
        .unwrap()
    }

    fn identity_moments(mu: &[f64]) -> AssetMoments {
        AssetMoments::new(mu.to_vec(), SymMatrix::identity(mu.len()).unwrap()).unwrap()
    }

    #[test]
    fn kkt_vanishes_at_solution() {
        let m = example_moments();
        let (w, _) = solve_weights(&m).unwrap();
        let r = kkt_residual(&w, &m);
        assert!(r.norm <= 1e-10, "norm = {}", r.norm);
    }

    #[test]
    fn kkt_flags_corner_portfolio() {
        let m = example_moments();
        let r = kkt_residual(&WeightVector::new(vec![1.0, 0.0]), &m);
        assert!(r.norm > 1e-6, "norm = {}", r.norm);
    }

    #[test]
    fn kkt_exactly_zero_under_full_symmetry() {
        let m = identity_moments(&[1.0, 1.0]);
        let r = kkt_residual(&WeightVector::new(vec![0.5, 0.5]), &m);
        assert_eq!(r.residuals, vec![0.0, 0.0]);
        assert_eq!(r.norm, 0.0);
    }

    #[test]
    fn pairwise_ratio_at_solution_and_corner() {
        let m = example_moments();
        let (w, _) = solve_weights(&m).unwrap();
        assert!(pairwise_ratio_check(&w, &m).unwrap() <= 1e-12);
        let at_corner = pairwise_ratio_check(&WeightVector::new(vec![1.0, 0.0]), &m).unwrap();
        assert!(at_corner.is_finite() && at_corner > 1e-4);
    }

    #[test]
    fn pairwise_ratio_rejects_tied_means() {
        let m = identity_moments(&[0.2, 0.2]);
        let err = pairwise_ratio_check(&WeightVector::new(vec![0.5, 0.5]), &m).unwrap_err();
        assert_eq!(err, Error::DegenerateDenominator);
    }

    #[test]
    fn tangency_examples() {
        let w = tangency_weights(&identity_moments(&[0.1, 0.2, 0.3])).unwrap();
        assert_relative_eq!(w[0], 1.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(w[2], 0.5, max_relative = 1e-12);

        let w = tangency_weights(&identity_moments(&[1.0, 1.0])).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);

        // Ω⁻¹μ = (2, 2) for the worked instance, matching the solver output
        let w = tangency_weights(&example_moments()).unwrap();
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(w[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn grid_finds_the_symmetric_maximum() {
        let m = identity_moments(&[1.0, 1.0]);
        let r = grid_search_max(&m, 0.5, 1001).unwrap();
        let step = 1.0 / 1000.0;
        assert!((r.weights[0] - 0.5).abs() <= step + 1e-12);
    }

    #[test]
    fn grid_two_assets_brackets_solution() {
        let m = example_moments();
        let (w, _) = solve_weights(&m).unwrap();
        let q_star = portfolio_metrics(&w, &m).risk_adjusted_return;
        let r = grid_search_max(&m, 0.5, 10001).unwrap();
        assert!(r.q_best <= q_star + 1e-9);
        let step = 1.0 / 10000.0;
        assert!((r.weights[0] - 0.5).abs() <= step + 1e-12);
        assert!((r.weights[1] - 0.5).abs() <= step + 1e-12);
    }

    #[test]
    fn grid_three_assets_brackets_solution() {
        let m = identity_moments(&[0.1, 0.2, 0.3]);
        let (w, _) = solve_weights(&m).unwrap();
        let q_star = portfolio_metrics(&w, &m).risk_adjusted_return;
        let r = grid_search_max(&m, 0.5, 501).unwrap();
        assert!(r.q_best <= q_star + 1e-9);
        let step = 1.0 / 500.0;
        assert!((r.weights[0] - 1.0 / 6.0).abs() <= step + 1e-12);
        assert!((r.weights[1] - 1.0 / 3.0).abs() <= step + 1e-12);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        let m = example_moments();
        assert!(grid_search_max(&m, 0.5, 10).is_err());
        assert!(grid_search_max(&m, -1.0, 1001).is_err());
        assert!(grid_search_max(&identity_moments(&[0.1, 0.2, 0.3, 0.4]), 0.5, 1001).is_err());
    }

    #[test]
    fn directional_derivative_flat_at_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m = random_moments(4, &mut rng);
            if let Ok((w, _)) = solve_weights(&m) {
                let dev = directional_derivative_check(&w, &m, 100, &mut rng);
                assert!(dev <= 1e-5, "dev = {dev}");
            }
        }
    }
}
