//! Finite-horizon statistics of sample paths: running averages, tail extrema of
//! `S_m / m` and distances of the running average to target points.

use rayon::prelude::*;
use serde::Serialize;

use crate::simulate::SamplePath;
use crate::{Error, Result};

/// Default containment tolerance for the interval check.
pub const DEFAULT_INTERVAL_EPS: f64 = 0.05;
/// Default hit tolerance for cluster coverage.
pub const DEFAULT_CLUSTER_EPS: f64 = 0.02;
/// Mean gap the default tolerances are calibrated for.
pub const REFERENCE_GAP: f64 = 0.4;

/// Scales a default tolerance to a credal set whose mean gap differs from 0.4.
pub fn scaled_eps(base: f64, mu_lower: f64, mu_upper: f64) -> f64 {
    let gap = mu_upper - mu_lower;
    if gap > 0.0 {
        base * gap / REFERENCE_GAP
    } else {
        base
    }
}

/// Default window start `⌈n/2⌉`.
pub fn default_n0(n: usize) -> usize {
    n.div_ceil(2).max(1)
}

/// `S_m / m` for `m = 1..=n`.
pub fn running_averages(path: &SamplePath) -> Result<Vec<f64>> {
    averages_of(&path.xs)
}

pub fn averages_of(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut sum = 0.0;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            sum / (i + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailStats {
    pub n0: usize,
    pub n: usize,
    pub tail_sup: f64,
    pub tail_inf: f64,
    pub final_mean: f64,
}

/// Max and min of `S_m / m` over `m ∈ [n0, n]` (1-based).
pub fn tail_stats(path: &SamplePath, n0: usize) -> Result<TailStats> {
    tail_stats_of(&running_averages(path)?, n0)
}

pub fn tail_stats_of(avgs: &[f64], n0: usize) -> Result<TailStats> {
    let n = avgs.len();
    if n0 == 0 || n0 > n {
        return Err(Error::BadWindow { n0, len: n });
    }
    let window = &avgs[n0 - 1..];
    Ok(TailStats {
        n0,
        n,
        tail_sup: window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        tail_inf: window.iter().copied().fold(f64::INFINITY, f64::min),
        final_mean: avgs[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetHit {
    pub target: f64,
    pub distance: f64,
    /// 1-based index attaining the distance (first one on ties).
    pub at: usize,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub epsilon: f64,
    pub n0: usize,
    pub hits: Vec<TargetHit>,
}

impl ClusterReport {
    pub fn all_hit(&self) -> bool {
        self.hits.iter().all(|h| h.hit)
    }
}

/// For each target `b`, the exact minimum of `|S_m/m - b|` over `m ∈ [n0, n]`.
pub fn cluster_coverage(path: &SamplePath, targets: &[f64], n0: usize, epsilon: f64) -> Result<ClusterReport> {
    cluster_coverage_of(&running_averages(path)?, targets, n0, epsilon)
}

pub fn cluster_coverage_of(avgs: &[f64], targets: &[f64], n0: usize, epsilon: f64) -> Result<ClusterReport> {
    let n = avgs.len();
    if n0 == 0 || n0 >= n {
        return Err(Error::BadWindow { n0, len: n });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let hits = targets
        .iter()
        .map(|&b| {
            let (at, distance) = avgs[n0 - 1..]
                .iter()
                .enumerate()
                .map(|(i, a)| (n0 + i, (a - b).abs()))
                .fold((n0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            TargetHit { target: b, distance, at, hit: distance <= epsilon }
        })
        .collect();
    Ok(ClusterReport { epsilon, n0, hits })
}

/// Whether the tail of the running average leaves `[mu_lower - eps, mu_upper + eps]`.
pub fn violates(stats: &TailStats, mu_lower: f64, mu_upper: f64, epsilon: f64) -> bool {
    stats.tail_inf < mu_lower - epsilon || stats.tail_sup > mu_upper + epsilon
}

/// Fraction of paths whose running average on `[n0, n]` exits `[mu_lower - eps, mu_upper + eps]`.
pub fn violation_rate(paths: &[SamplePath], mu_lower: f64, mu_upper: f64, epsilon: f64, n0: usize) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let flags = paths
        .par_iter()
        .map(|p| tail_stats(p, n0).map(|s| violates(&s, mu_lower, mu_upper, epsilon)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.iter().filter(|&&v| v).count() as f64 / paths.len() as f64)
}
