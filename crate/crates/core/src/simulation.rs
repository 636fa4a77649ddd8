//! Monte Carlo transfer vectors that satisfy the zero-sum identity draw by
//! draw, and streaming moment summaries over them.
//!
//! Non-focal transfers are `mu + R z` where `R` is the symmetric square root
//! of the base covariance and `z` has independent zero-mean, unit-variance
//! components. The focal transfer is then fixed by the zero-sum identity.
//!
//! Draw `i` of seed `k` comes from its own ChaCha stream keyed by `(k, i)`, so
//! a draw stream does not depend on how it is split across threads.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FullCovariance, MarketShares, Scenario, PSD_TOLERANCE};

/// Draws per parallel work unit. Fixed so results do not depend on thread count.
const CHUNK: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Standard normal innovations.
    #[default]
    Normal,
    /// Unit exponential innovations shifted to mean zero.
    ShiftedExp,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::ShiftedExp => "shifted-exp",
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "shifted-exp" => Ok(Self::ShiftedExp),
            other => Err(Error::Value(format!(
                "unknown distribution '{other}' (expected normal or shifted-exp)"
            ))),
        }
    }
}

/// One sampled transfer vector, in plan order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferDraw {
    pub transfers: Vec<f64>,
}

impl TransferDraw {
    /// `|sum_i s_i T_i| / max_i |s_i T_i|`, or 0 for an all-zero draw.
    pub fn zero_sum_violation(&self, shares: &MarketShares) -> f64 {
        zero_sum_violation(shares.shares(), &self.transfers)
    }
}

pub(crate) fn zero_sum_violation(shares: &[f64], transfers: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut largest = 0.0_f64;
    for (s, t) in shares.iter().zip(transfers) {
        sum += s * t;
        largest = largest.max((s * t).abs());
    }
    if largest == 0.0 {
        0.0
    } else {
        sum.abs() / largest
    }
}

/// Deterministic, index-addressable generator of transfer draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    shares: Vec<f64>,
    focal: usize,
    non_focal: Vec<usize>,
    means: Vec<f64>,
    root: Vec<f64>,
    dist: Distribution,
    key: [u8; 32],
}

impl Sampler {
    pub fn new(scenario: &Scenario, seed: u64, dist: Distribution) -> Result<Self> {
        let k = scenario.lambda.dim();
        let (root, min_eig, largest) = linalg::symmetric_sqrt(k, scenario.lambda.as_slice());
        if min_eig < -PSD_TOLERANCE * largest || !root.iter().all(|v| v.is_finite()) {
            return Err(Error::Factorization(format!(
                "square root of lambda failed (min eigenvalue {min_eig})"
            )));
        }
        Ok(Self {
            shares: scenario.shares.shares().to_vec(),
            focal: scenario.shares.focal_index(),
            non_focal: scenario.shares.non_focal_indices().collect(),
            means: scenario.means.as_slice().to_vec(),
            root,
            dist,
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
        })
    }

    pub fn plan_count(&self) -> usize {
        self.shares.len()
    }

    /// Writes draw `index` into `out` (length n); `z` is scratch of length n-1.
    fn fill(&self, index: u64, z: &mut [f64], out: &mut [f64]) {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        for zi in z.iter_mut() {
            *zi = match self.dist {
                Distribution::Normal => rng.sample(StandardNormal),
                Distribution::ShiftedExp => rng.sample::<f64, _>(Exp1) - 1.0,
            };
        }
        let k = z.len();
        let mut weighted = 0.0;
        for (a, &plan) in self.non_focal.iter().enumerate() {
            let row = &self.root[a * k..(a + 1) * k];
            let t = self.means[a] + linalg::dot(row, z);
            out[plan] = t;
            weighted += self.shares[plan] * t;
        }
        out[self.focal] = -weighted / self.shares[self.focal];
    }

    pub fn draw(&self, index: u64) -> TransferDraw {
        let mut z = vec![0.0; self.non_focal.len()];
        let mut out = vec![0.0; self.plan_count()];
        self.fill(index, &mut z, &mut out);
        TransferDraw { transfers: out }
    }
}

/// Lazily generated draws `0..draw_count`.
#[derive(Debug, Clone)]
pub struct TransferStream {
    sampler: Sampler,
    next: u64,
    end: u64,
}

impl Iterator for TransferStream {
    type Item = TransferDraw;

    fn next(&mut self) -> Option<TransferDraw> {
        if self.next >= self.end {
            return None;
        }
        let d = self.sampler.draw(self.next);
        self.next += 1;
        Some(d)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for TransferStream {}

pub fn sample_transfers(scenario: &Scenario, draw_count: u64, seed: u64, dist: Distribution) -> Result<TransferStream> {
    if draw_count == 0 {
        return Err(Error::Value("draw count must be at least 1".into()));
    }
    Ok(TransferStream {
        sampler: Sampler::new(scenario, seed, dist)?,
        next: 0,
        end: draw_count,
    })
}

/// Writes draws as CSV with header `T_1,...,T_n`.
pub fn write_draws_csv<W: Write>(draws: impl Iterator<Item = TransferDraw>, n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=n).map(|i| format!("T_{i}")))?;
    for d in draws {
        w.write_record(d.transfers.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Running count, mean and co-moment matrix (upper triangle mirrored on read).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    max_violation: f64,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
            max_violation: 0.0,
        }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64], delta: &mut [f64]) {
        let n = self.dim();
        self.count += 1;
        let c = self.count as f64;
        for i in 0..n {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / c;
        }
        for i in 0..n {
            let after = x[i] - self.mean[i];
            for j in 0..=i {
                self.m2[j * n + i] += delta[j] * after;
            }
        }
    }

    /// Combines two partial accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.clone_from(other);
            return;
        }
        let n = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta: Vec<f64> = (0..n).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..n {
            for j in i..n {
                self.m2[i * n + j] += other.m2[i * n + j] + delta[i] * delta[j] * na * nb / total;
            }
        }
        for i in 0..n {
            self.mean[i] += delta[i] * nb / total;
        }
        self.count += other.count;
        self.max_violation = self.max_violation.max(other.max_violation);
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance, `None` below two observations.
    pub fn covariance(&self) -> Option<Vec<Vec<f64>>> {
        if self.count < 2 {
            return None;
        }
        let n = self.dim();
        let denom = (self.count - 1) as f64;
        Some(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.m2[i.min(j) * n + i.max(j)] / denom)
                        .collect()
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub draw_count: u64,
    pub seed: u64,
    pub distribution: Distribution,
    pub empirical_means: Vec<f64>,
    pub empirical_covariance: Vec<Vec<f64>>,
    pub max_zero_sum_violation: f64,
}

fn chunk_ranges(draw_count: u64) -> Vec<(u64, u64)> {
    (0..draw_count.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(draw_count)))
        .collect()
}

fn accumulate_chunk(sampler: &Sampler, (start, end): (u64, u64)) -> MomentAccumulator {
    let n = sampler.plan_count();
    let mut acc = MomentAccumulator::new(n);
    let mut z = vec![0.0; n - 1];
    let mut x = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for i in start..end {
        sampler.fill(i, &mut z, &mut x);
        acc.max_violation = acc.max_violation.max(zero_sum_violation(&sampler.shares, &x));
        acc.push(&x, &mut delta);
    }
    acc
}

/// Empirical means, covariance and worst zero-sum violation over
/// `draw_count` draws. Output is identical for any rayon pool size.
pub fn summarize(scenario: &Scenario, draw_count: u64, seed: u64, dist: Distribution) -> Result<SimulationSummary> {
    if draw_count < 2 {
        return Err(Error::Value(format!("need at least 2 draws, got {draw_count}")));
    }
    let sampler = Sampler::new(scenario, seed, dist)?;
    let parts: Vec<MomentAccumulator> = chunk_ranges(draw_count)
        .into_par_iter()
        .map(|r| accumulate_chunk(&sampler, r))
        .collect();
    let mut total = MomentAccumulator::new(sampler.plan_count());
    for p in &parts {
        total.merge(p);
    }
    Ok(SimulationSummary {
        draw_count,
        seed,
        distribution: dist,
        empirical_covariance: total.covariance().expect("at least two draws"),
        empirical_means: total.mean,
        max_zero_sum_violation: total.max_violation,
    })
}

/// Asymptotic standard error of each sample covariance entry,
/// `sqrt((m4_ij - c_ij^2) / N)` with `m4_ij` the empirical mean of
/// `(x_i - xbar_i)^2 (x_j - xbar_j)^2`. Regenerates the same draws as
/// [`summarize`] for a second pass.
pub fn covariance_standard_errors(
    scenario: &Scenario,
    summary: &SimulationSummary,
) -> Result<Vec<Vec<f64>>> {
    let sampler = Sampler::new(scenario, summary.seed, summary.distribution)?;
    let n = sampler.plan_count();
    let mean = &summary.empirical_means;
    let sums: Vec<Vec<f64>> = chunk_ranges(summary.draw_count)
        .into_par_iter()
        .map(|(start, end)| {
            let mut m4 = vec![0.0; n * n];
            let mut z = vec![0.0; n - 1];
            let mut x = vec![0.0; n];
            for i in start..end {
                sampler.fill(i, &mut z, &mut x);
                for a in 0..n {
                    let da = (x[a] - mean[a]).powi(2);
                    for b in 0..n {
                        m4[a * n + b] += da * (x[b] - mean[b]).powi(2);
                    }
                }
            }
            m4
        })
        .collect();
    let count = summary.draw_count as f64;
    let mut m4 = vec![0.0; n * n];
    for part in &sums {
        for (t, v) in m4.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok((0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let c = summary.empirical_covariance[a][b];
                    ((m4[a * n + b] / count - c * c).max(0.0) / count).sqrt()
                })
                .collect()
        })
        .collect())
}

/// Largest `|empirical - analytic| / se` over all covariance entries.
pub fn max_standardized_deviation(summary: &SimulationSummary, analytic: &FullCovariance, se: &[Vec<f64>]) -> f64 {
    let n = analytic.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let dev = (summary.empirical_covariance[i][j] - analytic.get(i, j)).abs();
            let z = if se[i][j] > 0.0 { dev / se[i][j] } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scenario, RawScenario};

    fn scenario(shares: Vec<f64>, lambda: Vec<Vec<f64>>, means: Option<Vec<f64>>) -> Scenario {
        validate_scenario(&RawScenario {
            shares,
            lambda: Some(lambda),
            means,
            ..Default::default()
        })
        .unwrap()
    }

    fn paper() -> Scenario {
        scenario(vec![0.90, 0.06, 0.04], vec![vec![4.0, -0.6], vec![-0.6, 3.0]], None)
    }

    #[test]
    fn two_plan_draws_are_mirror_images() {
        let sc = scenario(vec![0.5, 0.5], vec![vec![1.0]], None);
        for d in sample_transfers(&sc, 100, 3, Distribution::Normal).unwrap() {
            assert_eq!(d.transfers[1], -d.transfers[0]);
        }
    }

    #[test]
    fn paper_draws_balance() {
        let sc = paper();
        for d in sample_transfers(&sc, 1000, 11, Distribution::Normal).unwrap() {
            let t = &d.transfers;
            assert_eq!(t[2], -(0.90 * t[0] + 0.06 * t[1]) / 0.04);
            assert!(d.zero_sum_violation(&sc.shares) <= 1e-10);
        }
    }

    #[test]
    fn streams_are_reproducible_and_seed_dependent() {
        let sc = paper();
        let a: Vec<_> = sample_transfers(&sc, 50, 1, Distribution::Normal).unwrap().collect();
        let b: Vec<_> = sample_transfers(&sc, 50, 1, Distribution::Normal).unwrap().collect();
        let c: Vec<_> = sample_transfers(&sc, 50, 2, Distribution::Normal).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Draw i does not depend on how many draws precede it.
        let s = Sampler::new(&sc, 1, Distribution::Normal).unwrap();
        assert_eq!(s.draw(37), a[37]);
    }

    #[test]
    fn summary_independent_of_thread_count() {
        let sc = paper();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| summarize(&sc, 50_000, 9, Distribution::ShiftedExp).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn accumulator_merge_matches_sequential() {
        let sc = paper();
        let sampler = Sampler::new(&sc, 5, Distribution::Normal).unwrap();
        let whole = accumulate_chunk(&sampler, (0, 3000));
        let mut left = accumulate_chunk(&sampler, (0, 1234));
        left.merge(&accumulate_chunk(&sampler, (1234, 3000)));
        let mut right = accumulate_chunk(&sampler, (1234, 3000));
        right.merge(&accumulate_chunk(&sampler, (0, 1234)));
        let cw = whole.covariance().unwrap();
        for other in [&left, &right] {
            let co = other.covariance().unwrap();
            for i in 0..3 {
                assert!((whole.mean()[i] - other.mean()[i]).abs() <= 1e-9 * whole.mean()[i].abs().max(1.0));
                for j in 0..3 {
                    assert!((cw[i][j] - co[i][j]).abs() <= 1e-9 * cw[i][j].abs());
                }
            }
        }
    }

    #[test]
    fn zero_mean_weighted_mean_vanishes() {
        let sc = paper();
        let s = summarize(&sc, 20_000, 4, Distribution::Normal).unwrap();
        let w: f64 = sc.shares.shares().iter().zip(&s.empirical_means).map(|(a, b)| a * b).sum();
        assert!(w.abs() < 1e-10);
        assert!(s.max_zero_sum_violation <= 1e-10);
    }

    #[test]
    fn too_few_draws() {
        let sc = paper();
        assert_eq!(summarize(&sc, 1, 0, Distribution::Normal).unwrap_err().code(), "value");
        assert!(sample_transfers(&sc, 0, 0, Distribution::Normal).is_err());
    }

    #[test]
    fn rank_deficient_lambda_samples() {
        let sc = scenario(vec![0.4, 0.3, 0.3], vec![vec![1.0, 1.0], vec![1.0, 1.0]], None);
        for d in sample_transfers(&sc, 200, 8, Distribution::Normal).unwrap() {
            assert!((d.transfers[0] - d.transfers[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn draws_csv_header() {
        let sc = paper();
        let mut buf = Vec::new();
        write_draws_csv(sample_transfers(&sc, 3, 1, Distribution::Normal).unwrap(), 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "T_1,T_2,T_3");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn distribution_names_round_trip() {
        for d in [Distribution::Normal, Distribution::ShiftedExp] {
            assert_eq!(d.name().parse::<Distribution>().unwrap(), d);
        }
        assert!("cauchy".parse::<Distribution>().is_err());
    }
}
