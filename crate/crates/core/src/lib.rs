//! Exact portfolio weights maximizing the risk-adjusted return.
//!
//! Given expected returns `μ` and a positive-definite covariance `Ω` for
//! `n ≥ 2` assets, this crate computes the budget-constrained weights that
//! maximize `Q(w) = μᵗw / sqrt(wᵗΩw)` in closed form, for any number of
//! assets and with short positions allowed. It also ships the machinery
//! around that solution:
//!
//! * [`linalg`] — minimal dense symmetric linear algebra (positive-definite
//!   factorization, solves, quadratic forms);
//! * [`closed_form`] — the solver pipeline with a full audit trace, plus
//!   explicit two- and three-asset reference formulas;
//! * [`estimation`] — sample moments from return series and the
//!   minimum-variance baseline;
//! * [`oracle`] — independent stationarity, tangency, finite-difference and
//!   brute-force grid checks;
//! * [`instances`] — seeded random instance generation for verification.

pub mod closed_form;
pub mod error;
pub mod estimation;
pub mod instances;
pub mod linalg;
pub mod oracle;

pub use closed_form::{
    build_b, build_uv, compute_alpha_beta, compute_t_star, portfolio_metrics,
    recursion_coefficients, solve_weights, stationary_point, three_asset_weights,
    two_asset_weights, AssetMoments, ClosedFormTrace, PipelineTrace, PortfolioReport,
    RecursionCoeffs, WeightVector,
};
pub use error::{Error, Result};
pub use estimation::{estimate_moments, min_variance_weights, ReturnSeries};
pub use linalg::{check_spd, quad_form, solve, SymMatrix};
pub use oracle::{
    directional_derivative_check, grid_search_max, kkt_residual, pairwise_ratio_check,
    tangency_weights, GridSearchResult, KktResidual,
};
