//! How the focal plan's transfer variance responds to share changes.
//!
//! The focal share is treated as `1 - sum(non-focal shares)`, so the gradient
//! is taken with respect to the non-focal shares and "the focal plan loses
//! share" means some non-focal share grows.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BaseCovariance, MarketShares, MeanSpec, Scenario};
use crate::moments::{cross_covariances, focal_variance};

/// Allowed disagreement of the two gradient forms, relative to the gradient's
/// natural scale `2 (sigma_nn + max |sigma_in|) / s_n`.
pub const GRADIENT_AGREEMENT_TOLERANCE: f64 = 1e-10;
/// Slack below zero still accepted by the monotonicity condition, relative
/// to `max(1, sigma_nn)`.
pub const PROP2_TOLERANCE: f64 = 1e-12;
/// Trials allowed without a single acceptance before the example search gives up.
pub const MAX_SEARCH_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    /// d sigma_nn / d s_i for each non-focal plan, in plan order.
    pub gradient: Vec<f64>,
    pub prop2_satisfied: bool,
    /// sigma_nn - sigma_in for each non-focal plan.
    pub slack: Vec<f64>,
}

/// Result of the monotonicity check: whether every cross-covariance with the
/// focal plan is at most the focal variance, plus the per-plan slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Check {
    pub satisfied: bool,
    pub slack: Vec<f64>,
}

pub fn check_prop2(shares: &MarketShares, lambda: &BaseCovariance) -> Result<Prop2Check> {
    let sigma_nn = focal_variance(shares, lambda)?;
    let cross = cross_covariances(shares, lambda)?;
    let tol = PROP2_TOLERANCE * sigma_nn.max(1.0);
    let satisfied = cross.iter().all(|c| *c <= sigma_nn + tol);
    let slack = cross.iter().map(|c| sigma_nn - c).collect();
    Ok(Prop2Check { satisfied, slack })
}

/// Gradient of the focal variance with respect to the non-focal shares.
///
/// The unsimplified quotient-rule form
/// `2[(s' L s) e + (1 - e's) L s] / (1 - e's)^3` is evaluated alongside the
/// reduced form `2 (sigma_nn e - sigma) / s_n`; they must agree.
pub fn focal_variance_gradient(shares: &MarketShares, lambda: &BaseCovariance) -> Result<GradientReport> {
    let s = shares.non_focal();
    let sigma_nn = focal_variance(shares, lambda)?;
    let cross = cross_covariances(shares, lambda)?;
    let sn = shares.focal_share();

    let ls = lambda.mul_vec(&s);
    let quad: f64 = s.iter().zip(&ls).map(|(a, b)| a * b).sum();
    let rest = 1.0 - s.iter().sum::<f64>();
    let raw: Vec<f64> = ls
        .iter()
        .map(|v| 2.0 * (quad + rest * v) / (rest * rest * rest))
        .collect();
    let reduced: Vec<f64> = cross.iter().map(|c| 2.0 * (sigma_nn - c) / sn).collect();

    let max_cross = cross.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let scale = 2.0 * (sigma_nn + max_cross) / sn;
    for (i, (a, b)) in raw.iter().zip(&reduced).enumerate() {
        if (a - b).abs() > GRADIENT_AGREEMENT_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "gradient component {i}: quotient form {a} vs reduced form {b}"
            )));
        }
    }

    let check = check_prop2(shares, lambda)?;
    Ok(GradientReport {
        gradient: reduced,
        prop2_satisfied: check.satisfied,
        slack: check.slack,
    })
}

/// How share released by (or taken for) the focal plan is spread over the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Redistribution {
    /// Non-focal shares scaled by a common factor.
    #[default]
    Proportional,
    /// All of the change goes to one plan (plan index in plan order).
    Single(usize),
}

impl std::str::FromStr for Redistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "proportional" {
            return Ok(Self::Proportional);
        }
        let inner = s
            .strip_prefix("single(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("single:"));
        match inner.map(str::parse::<usize>) {
            Some(Ok(i)) => Ok(Self::Single(i)),
            _ => Err(Error::Value(format!(
                "unknown redistribution policy '{s}' (expected proportional or single(i))"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub focal_share: f64,
    pub sigma_nn: f64,
    pub gradient: Vec<f64>,
    pub prop2_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub path: Vec<SweepRow>,
}

impl SweepResult {
    /// Whether sigma_nn never decreases as the focal share decreases.
    pub fn is_monotone(&self) -> bool {
        self.path.windows(2).all(|w| w[1].sigma_nn >= w[0].sigma_nn)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.path.windows(2).all(|w| w[1].sigma_nn > w[0].sigma_nn)
    }

    /// CSV with header `focal_share,sigma_nn,grad_1,...,grad_{n-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.path.first().map_or(0, |r| r.gradient.len());
        let mut header = vec!["focal_share".to_string(), "sigma_nn".to_string()];
        header.extend((1..=k).map(|i| format!("grad_{i}")));
        w.write_record(&header)?;
        for row in &self.path {
            let mut rec = vec![row.focal_share.to_string(), row.sigma_nn.to_string()];
            rec.extend(row.gradient.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shares after moving the focal plan to `focal_share` under `policy`.
pub fn redistribute(shares: &MarketShares, focal_share: f64, policy: Redistribution) -> Result<MarketShares> {
    let sn = shares.focal_share();
    let f = shares.focal_index();
    let mut next = shares.shares().to_vec();
    match policy {
        Redistribution::Proportional => {
            let factor = (1.0 - focal_share) / (1.0 - sn);
            for i in shares.non_focal_indices() {
                next[i] *= factor;
            }
        }
        Redistribution::Single(p) => {
            if p >= next.len() || p == f {
                return Err(Error::Index(format!(
                    "redistribution target {p} must be a non-focal plan index below {}",
                    next.len()
                )));
            }
            next[p] += sn - focal_share;
        }
    }
    next[f] = focal_share;
    MarketShares::new(next, Some(f))
}

/// Recomputes sigma_nn and its gradient along a decreasing focal-share grid.
pub fn share_sweep(scenario: &Scenario, focal_share_grid: &[f64], policy: Redistribution) -> Result<SweepResult> {
    if focal_share_grid.is_empty() {
        return Err(Error::Grid("empty focal share grid".into()));
    }
    if let Some(v) = focal_share_grid.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Grid(format!("grid value {v} outside (0, 1)")));
    }
    if focal_share_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Grid("grid must be strictly decreasing".into()));
    }
    let path = focal_share_grid
        .iter()
        .map(|&fs| {
            let shares = redistribute(&scenario.shares, fs, policy)?;
            let report = focal_variance_gradient(&shares, &scenario.lambda)?;
            Ok(SweepRow {
                focal_share: shares.focal_share(),
                sigma_nn: focal_variance(&shares, &scenario.lambda)?,
                gradient: report.gradient,
                prop2_satisfied: report.prop2_satisfied,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { path })
}

/// `steps` evenly spaced points from `start` down to `stop`, parsed from
/// `start:stop:steps`. A single step yields just `start`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Grid(format!("expected start:stop:steps, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(start > stop && stop > 0.0 && start < 1.0) || steps == 0 {
        return Err(Error::Grid(format!(
            "need 1 > start > stop > 0 and steps >= 1, got '{spec}'"
        )));
    }
    if steps == 1 {
        return Ok(vec![start]);
    }
    let step = (start - stop) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k == steps - 1 { stop } else { start - step * k as f64 })
        .collect())
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One random candidate: Dirichlet-uniform shares (normalized unit
/// exponentials) and `Lambda = A'A` with standard normal `A`.
///
/// Deterministic in `(seed, trial)`. Fails only when a draw degenerates
/// (a zero share, say), which callers treat as a rejected trial.
pub fn random_scenario(plans: usize, seed: u64, trial: u64) -> Result<Scenario> {
    if plans < 2 {
        return Err(Error::Share(format!("need at least 2 plans, got {plans}")));
    }
    let mut rng = trial_rng(seed, trial);
    let weights: Vec<f64> = (0..plans).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let shares = MarketShares::new(weights.iter().map(|w| w / total).collect(), None)?;

    let k = plans - 1;
    let a: Vec<f64> = (0..k * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v: f64 = (0..k).map(|r| a[r * k + i] * a[r * k + j]).sum();
            gram[i * k + j] = v;
            gram[j * k + i] = v;
        }
    }
    Ok(Scenario {
        label: format!("random-{seed}-{trial}"),
        shares,
        lambda: BaseCovariance::from_row_major(k, gram)?,
        means: MeanSpec::zeros(k),
        caps: None,
    })
}

/// Rejection-samples `count` random scenarios that satisfy the monotonicity
/// condition. Deterministic in `(plans, count, seed)`.
pub fn find_prop2_examples(plans: usize, count: usize, seed: u64) -> Result<Vec<Scenario>> {
    if plans < 2 {
        return Err(Error::Value(format!("need at least 2 plans, got {plans}")));
    }
    if count == 0 {
        return Err(Error::Value("count must be at least 1".into()));
    }
    let mut found = Vec::with_capacity(count);
    let mut trial = 0u64;
    let mut since_accept = 0u64;
    while found.len() < count {
        if since_accept >= MAX_SEARCH_TRIALS {
            return Err(Error::SearchExhausted { trials: since_accept });
        }
        let candidate = random_scenario(plans, seed, trial);
        trial += 1;
        since_accept += 1;
        let Ok(mut scenario) = candidate else { continue };
        if matches!(check_prop2(&scenario.shares, &scenario.lambda), Ok(c) if c.satisfied) {
            scenario.label = format!("prop2-example-{}", found.len() + 1);
            found.push(scenario);
            since_accept = 0;
        }
    }
    Ok(found)
}
