//! Closed-form moments of the focal plan's transfer and the full covariance
//! matrix implied by the zero-sum constraint.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BaseCovariance, FullCovariance, MarketShares, MeanSpec, Scenario};

/// Allowed disagreement between the double-sum and quadratic-form routes,
/// relative to the sum of absolute terms.
pub const ROUTE_AGREEMENT_TOLERANCE: f64 = 1e-12;
/// Allowed `|Sigma s|_inf` relative to `|Sigma|_inf`.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-9;

fn check_dims(shares: &MarketShares, lambda: &BaseCovariance) -> Result<()> {
    if lambda.dim() + 1 != shares.len() {
        return Err(Error::Dimension(format!(
            "lambda is {0}x{0} but there are {1} plans",
            lambda.dim(),
            shares.len()
        )));
    }
    Ok(())
}

/// Expected transfer of the focal plan: `-(1/s_n) * sum_i s_i mu_i`.
pub fn implied_mean(shares: &MarketShares, means: &MeanSpec) -> Result<f64> {
    if means.len() + 1 != shares.len() {
        return Err(Error::Dimension(format!(
            "{} means for {} plans",
            means.len(),
            shares.len()
        )));
    }
    let weighted = linalg::dot(&shares.non_focal(), means.as_slice());
    Ok(-weighted / shares.focal_share())
}

/// Explicit double sum `sum_i s_i^2 l_ii + 2 sum_{i<j} s_i s_j l_ij`, plus the
/// sum of absolute terms as a rounding scale.
fn weighted_double_sum(s: &[f64], lambda: &BaseCovariance) -> (f64, f64) {
    let mut total = 0.0;
    let mut scale = 0.0;
    for i in 0..s.len() {
        let diag = s[i] * s[i] * lambda.get(i, i);
        total += diag;
        scale += diag.abs();
        for j in (i + 1)..s.len() {
            let off = 2.0 * s[i] * s[j] * lambda.get(i, j);
            total += off;
            scale += off.abs();
        }
    }
    (total, scale)
}

/// Variance of the focal plan's transfer.
///
/// Computed as the explicit double sum and cross-checked against the
/// quadratic form `s' Lambda s / s_n^2`.
pub fn focal_variance(shares: &MarketShares, lambda: &BaseCovariance) -> Result<f64> {
    check_dims(shares, lambda)?;
    let s = shares.non_focal();
    let sn = shares.focal_share();
    let (double_sum, scale) = weighted_double_sum(&s, lambda);
    let quad = lambda.quadratic_form(&s);
    if (double_sum - quad).abs() > ROUTE_AGREEMENT_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "double sum {double_sum} and quadratic form {quad} disagree"
        )));
    }
    let s_norm2 = linalg::dot(&s, &s);
    if double_sum < -1e-10 * lambda.norm_inf() * s_norm2 {
        return Err(Error::Numerical(format!(
            "negative focal variance {}; lambda is indefinite",
            double_sum / (sn * sn)
        )));
    }
    Ok(double_sum.max(0.0) / (sn * sn))
}

/// Covariances between each non-focal transfer and the focal one:
/// `-(Lambda s)_i / s_n`.
pub fn cross_covariances(shares: &MarketShares, lambda: &BaseCovariance) -> Result<Vec<f64>> {
    check_dims(shares, lambda)?;
    let sn = shares.focal_share();
    Ok(lambda
        .mul_vec(&shares.non_focal())
        .into_iter()
        .map(|v| -v / sn)
        .collect())
}

/// Assembles the full `n x n` covariance in plan order.
///
/// With the focal plan last this is the block matrix
/// `[Lambda, sigma; sigma', sigma_nn]`.
pub fn build_full_covariance(shares: &MarketShares, lambda: &BaseCovariance) -> Result<FullCovariance> {
    let sigma_nn = focal_variance(shares, lambda)?;
    let cross = cross_covariances(shares, lambda)?;
    let n = shares.len();
    let f = shares.focal_index();
    let idx: Vec<usize> = shares.non_focal_indices().collect();
    let mut data = vec![0.0; n * n];
    for (a, &pa) in idx.iter().enumerate() {
        for (b, &pb) in idx.iter().enumerate() {
            data[pa * n + pb] = lambda.get(a, b);
        }
        data[pa * n + f] = cross[a];
        data[f * n + pa] = cross[a];
    }
    data[f * n + f] = sigma_nn;
    let full = FullCovariance::from_parts(n, data);

    let residual = linalg::max_abs(&full.mul_vec(shares.shares()));
    if residual > NULL_SPACE_TOLERANCE * full.norm_inf() {
        return Err(Error::Numerical(format!(
            "share vector is not in the null space of sigma (residual {residual})"
        )));
    }
    Ok(full)
}

/// Moment summary emitted by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mu_n: f64,
    pub sigma_nn: f64,
    pub cross_cov: Vec<f64>,
    pub sigma_full: Vec<Vec<f64>>,
}

pub fn moment_report(scenario: &Scenario) -> Result<MomentReport> {
    let full = build_full_covariance(&scenario.shares, &scenario.lambda)?;
    Ok(MomentReport {
        mu_n: implied_mean(&scenario.shares, &scenario.means)?,
        sigma_nn: focal_variance(&scenario.shares, &scenario.lambda)?,
        cross_cov: cross_covariances(&scenario.shares, &scenario.lambda)?,
        sigma_full: full.rows(),
    })
}
