//! Domain types for one marketplace and the validation that produces them.
//!
//! Every type here is immutable once constructed. Construction is the only
//! place invariants are checked; downstream modules rely on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Allowed deviation of the raw share sum from 1 before rejecting.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;
/// Allowed asymmetry of the base covariance, relative to max(1, max |entry|).
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Smallest eigenvalue allowed, relative to the largest absolute eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Market shares of all plans in one marketplace, with one plan singled out
/// as the focal plan whose transfer is pinned down by the others.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketShares {
    shares: Vec<f64>,
    focal: usize,
}

impl MarketShares {
    /// Validates and renormalizes `shares`. `focal` defaults to the last plan.
    pub fn new(shares: Vec<f64>, focal: Option<usize>) -> Result<Self> {
        let n = shares.len();
        if n < 2 {
            return Err(Error::Share(format!("need at least 2 plans, got {n}")));
        }
        if let Some(v) = shares.iter().find(|v| !v.is_finite()) {
            return Err(Error::Value(format!("non-finite share {v}")));
        }
        if let Some((i, v)) = shares.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::Share(format!("share of plan {i} is {v}, must be positive")));
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
            return Err(Error::Share(format!("shares sum to {sum}, expected 1")));
        }
        let focal = focal.unwrap_or(n - 1);
        if focal >= n {
            return Err(Error::Index(format!("focal index {focal} out of range for {n} plans")));
        }
        // Sums already within rounding of 1 are left alone so that
        // re-validation is a fixed point.
        let shares = if (sum - 1.0).abs() <= n as f64 * f64::EPSILON {
            shares
        } else {
            shares.into_iter().map(|s| s / sum).collect()
        };
        Ok(Self { shares, focal })
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// All shares in plan order.
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn focal_index(&self) -> usize {
        self.focal
    }

    pub fn focal_share(&self) -> f64 {
        self.shares[self.focal]
    }

    /// Plan indices other than the focal one, in plan order.
    pub fn non_focal_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.shares.len()).filter(move |&i| i != self.focal)
    }

    /// Shares of the non-focal plans, in plan order.
    pub fn non_focal(&self) -> Vec<f64> {
        self.non_focal_indices().map(|i| self.shares[i]).collect()
    }

    /// Same shares, different focal plan.
    pub fn with_focal(&self, focal: usize) -> Result<Self> {
        Self::new(self.shares.clone(), Some(focal))
    }

    /// Rebuilds from non-focal shares, giving the focal plan `1 - sum`.
    pub fn from_non_focal(non_focal: &[f64], focal: usize) -> Result<Self> {
        let rest: f64 = non_focal.iter().sum();
        let focal_share = 1.0 - rest;
        let n = non_focal.len() + 1;
        if focal >= n {
            return Err(Error::Index(format!("focal index {focal} out of range for {n} plans")));
        }
        let mut shares = Vec::with_capacity(n);
        shares.extend_from_slice(&non_focal[..focal]);
        shares.push(focal_share);
        shares.extend_from_slice(&non_focal[focal..]);
        Self::new(shares, Some(focal))
    }
}

/// Covariance matrix of the non-focal plans' transfers, indexed in the
/// order of [`MarketShares::non_focal_indices`].
#[derive(Debug, Clone, PartialEq)]
pub struct BaseCovariance {
    dim: usize,
    data: Vec<f64>,
}

impl BaseCovariance {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "lambda row {i} has {} entries, expected {dim}",
                r.len()
            )));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("lambda must be at least 1x1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "lambda has {} entries, expected {}",
                data.len(),
                dim * dim
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Value(format!("non-finite lambda entry {v}")));
        }
        let scale = linalg::max_abs(&data).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::Covariance(format!(
                        "lambda not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut data = data;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        let ev = linalg::symmetric_eigenvalues(dim, &data);
        let largest = linalg::max_abs(&ev);
        if ev[0] < -PSD_TOLERANCE * largest {
            return Err(Error::Covariance(format!(
                "lambda is not positive semidefinite (min eigenvalue {})",
                ev[0]
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        linalg::mat_vec(self.dim, &self.data, v)
    }

    /// `v' Lambda v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        linalg::dot(v, &self.mul_vec(v))
    }

    pub fn norm_inf(&self) -> f64 {
        linalg::norm_inf(self.dim, &self.data)
    }

    /// `c * Lambda` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Value(format!("scale factor {c} must be finite and >= 0")));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        })
    }
}

/// Expected transfers of the non-focal plans.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpec {
    means: Vec<f64>,
}

impl MeanSpec {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if let Some(v) = means.iter().find(|v| !v.is_finite()) {
            return Err(Error::Value(format!("non-finite mean {v}")));
        }
        Ok(Self { means })
    }

    pub fn zeros(len: usize) -> Self {
        Self { means: vec![0.0; len] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.means
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Covariance of all `n` transfers in plan order.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCovariance {
    dim: usize,
    data: Vec<f64>,
}

impl FullCovariance {
    pub(crate) fn from_parts(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        linalg::mat_vec(self.dim, &self.data, v)
    }

    pub fn norm_inf(&self) -> f64 {
        linalg::norm_inf(self.dim, &self.data)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(self.dim, &self.data)
    }
}

/// A validated marketplace description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub shares: MarketShares,
    pub lambda: BaseCovariance,
    pub means: MeanSpec,
    pub caps: Option<Vec<f64>>,
}

impl Scenario {
    pub fn plan_count(&self) -> usize {
        self.shares.len()
    }

    /// Serializable form that validates back to `self`.
    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            label: self.label.clone(),
            shares: self.shares.shares().to_vec(),
            lambda: Some(self.lambda.rows()),
            means: Some(self.means.as_slice().to_vec()),
            caps: self.caps.clone(),
            focal_index: Some(self.shares.focal_index()),
        }
    }
}

/// Untrusted scenario record, exactly as it appears in a scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawScenario {
    #[serde(default)]
    pub label: String,
    pub shares: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_index: Option<usize>,
}

/// Checks every invariant of a scenario record and returns the validated form.
pub fn validate_scenario(raw: &RawScenario) -> Result<Scenario> {
    let shares = MarketShares::new(raw.shares.clone(), raw.focal_index)?;
    let n = shares.len();
    let lambda_rows = raw
        .lambda
        .as_ref()
        .ok_or_else(|| Error::Dimension("scenario has no lambda matrix".into()))?;
    if lambda_rows.len() != n - 1 {
        return Err(Error::Dimension(format!(
            "lambda is {0}x{0}, expected {1}x{1} for {n} plans",
            lambda_rows.len(),
            n - 1
        )));
    }
    let lambda = BaseCovariance::from_rows(lambda_rows)?;
    let means = match &raw.means {
        Some(m) if m.len() != n - 1 => {
            return Err(Error::Dimension(format!(
                "means has {} entries, expected {}",
                m.len(),
                n - 1
            )))
        }
        Some(m) => MeanSpec::new(m.clone())?,
        None => MeanSpec::zeros(n - 1),
    };
    let caps = raw.caps.as_ref().map(|c| validate_caps(c, n)).transpose()?;
    Ok(Scenario {
        label: raw.label.clone(),
        shares,
        lambda,
        means,
        caps,
    })
}

pub(crate) fn validate_caps(caps: &[f64], n: usize) -> Result<Vec<f64>> {
    if caps.len() != n {
        return Err(Error::Dimension(format!(
            "caps has {} entries, expected {n}",
            caps.len()
        )));
    }
    if let Some((i, c)) = caps.iter().enumerate().find(|(_, c)| !c.is_finite() || **c < 0.0) {
        return Err(Error::Value(format!("cap of plan {i} is {c}, must be finite and >= 0")));
    }
    Ok(caps.to_vec())
}
