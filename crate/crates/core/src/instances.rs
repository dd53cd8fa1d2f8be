//! Seeded random problem instances for the verification CLI and test suites.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::closed_form::AssetMoments;
use crate::linalg::SymMatrix;

/// Ridge added to the random covariance so instances stay well-conditioned.
const RIDGE: f64 = 1e-3;

/// Minimum gap required between consecutive sorted means.
const MEAN_GAP: f64 = 1e-6;

/// Draws a well-conditioned random instance: `Ω = AᵗA + n·1e-3·I` with `A`
/// standard normal, and standard-normal means resampled until consecutive
/// sorted means differ by more than `1e-6` (so the recursion is valid).
pub fn random_moments<R: Rng + ?Sized>(n: usize, rng: &mut R) -> AssetMoments {
    assert!(n >= 2, "need at least 2 assets");
    let a: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let omega = SymMatrix::from_lower(n, |i, j| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[k * n + i] * a[k * n + j];
        }
        if i == j {
            acc += n as f64 * RIDGE;
        }
        acc
    })
    .expect("random covariance is well-formed");

    let mu = loop {
        let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut sorted = mu.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted.windows(2).all(|p| p[0] - p[1] > MEAN_GAP) {
            break mu;
        }
    };

    AssetMoments::new(mu, omega).expect("ridge keeps the covariance positive-definite")
}
