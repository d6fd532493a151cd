//! Exact sub-linear expectations of functionals of Peng-IID sequences.
//!
//! For `g(S_n)` the expectation is computed by backward induction over the lattice
//! of reachable partial sums: at each step nature re-picks the prior that is worst
//! (best) for the continuation value. General path functionals at small `n` are
//! handled by the same recursion on the full history tree, and
//! [`brute_force_strategy_oracle`] enumerates every history-dependent prior choice
//! explicitly so both can be cross-checked.

use rayon::prelude::*;
use serde::Serialize;

use crate::credal::{CredalSet, Event, SUPPORT_TOL};
use crate::sublin::{lower_capacity, upper_capacity, UpperLowerPair};
use crate::{Error, Result, EXACT_TOL};

/// Default limit on distinct partial sums per step.
pub const DEFAULT_LATTICE_CAP: usize = 200_000;
/// Largest strategy enumeration the oracle accepts.
pub const ORACLE_LIMIT: f64 = 1e7;
/// Step of the grid used for the weak-law limit target.
pub const TARGET_GRID_STEP: f64 = 1e-4;

const PAR_THRESHOLD: usize = 4096;

/// Whether nature maximizes (upper expectation) or minimizes (lower expectation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Upper,
    Lower,
}

impl Sense {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Sense::Upper => a.max(b),
            Sense::Lower => a.min(b),
        }
    }

    fn identity(self) -> f64 {
        match self {
            Sense::Upper => f64::NEG_INFINITY,
            Sense::Lower => f64::INFINITY,
        }
    }
}

/// Reachable values of `S_k` for `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct SumLattice {
    levels: Vec<Vec<f64>>,
}

impl SumLattice {
    /// Builds levels `0..=n`, merging sums within `1e-9` onto the smaller one.
    pub fn build(support: &[f64], n: usize, cap: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(n + 1);
        levels.push(vec![0.0]);
        for step in 1..=n {
            let prev: &Vec<f64> = &levels[step - 1];
            let mut sums: Vec<f64> = Vec::with_capacity(prev.len() * support.len());
            for &s in prev {
                sums.extend(support.iter().map(|&x| s + x));
            }
            sums.sort_by(f64::total_cmp);
            let mut level: Vec<f64> = Vec::with_capacity(sums.len());
            for s in sums {
                match level.last() {
                    Some(&rep) if s - rep <= SUPPORT_TOL => {}
                    _ => level.push(s),
                }
            }
            if level.len() > cap {
                return Err(Error::LatticeOverflow { step, cap });
            }
            levels.push(level);
        }
        Ok(Self { levels })
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// Index of the representative of `value` in level `k`.
    pub fn locate(&self, k: usize, value: f64) -> usize {
        let level = &self.levels[k];
        let i = level.partition_point(|&e| e < value - SUPPORT_TOL);
        if i < level.len() && (level[i] - value).abs() <= SUPPORT_TOL {
            return i;
        }
        // fall back to the nearest neighbour
        match (i.checked_sub(1), (i < level.len()).then_some(i)) {
            (Some(a), Some(b)) if (value - level[a]).abs() <= (level[b] - value).abs() => a,
            (_, Some(b)) => b,
            (Some(a), None) => a,
            (None, None) => 0,
        }
    }
}

/// Prior probabilities laid out densely over the union support.
fn dense_probs(cs: &CredalSet) -> Vec<Vec<f64>> {
    let m = cs.union_support().len();
    cs.priors()
        .iter()
        .map(|p| {
            let mut row = vec![0.0; m];
            for &(x, q) in p.atoms() {
                let j = cs.support_index(x).expect("prior atom lies in union support");
                row[j] += q;
            }
            row
        })
        .collect()
}

/// Backward induction for `E[g(S_n)]` (or its conjugate) with an explicit lattice cap.
pub fn peng_sum<G: Fn(f64) -> f64 + Sync + ?Sized>(
    cs: &CredalSet,
    n: usize,
    g: &G,
    sense: Sense,
    cap: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let support = cs.union_support();
    let lattice = SumLattice::build(support, n, cap)?;
    let probs = dense_probs(cs);

    let mut values: Vec<f64> = Vec::with_capacity(lattice.level(n).len());
    for &s in lattice.level(n) {
        let v = g(s);
        if !v.is_finite() {
            return Err(Error::NonFiniteFunctionValue(s));
        }
        values.push(v);
    }

    for k in (0..n).rev() {
        let level = lattice.level(k);
        let next = &values;
        let step = |s: f64| -> f64 {
            let cont: Vec<f64> = support.iter().map(|&x| next[lattice.locate(k + 1, s + x)]).collect();
            probs.iter().fold(sense.identity(), |best, row| {
                let e: f64 = row.iter().zip(&cont).map(|(p, v)| p * v).sum();
                sense.pick(best, e)
            })
        };
        values = if level.len() >= PAR_THRESHOLD {
            level.par_iter().map(|&s| step(s)).collect()
        } else {
            level.iter().map(|&s| step(s)).collect()
        };
    }
    Ok(values[0])
}

/// Sub-linear expectation `E[g(S_n)]` of the Peng-IID sum.
pub fn peng_upper_sum<G: Fn(f64) -> f64 + Sync + ?Sized>(cs: &CredalSet, n: usize, g: &G) -> Result<f64> {
    peng_sum(cs, n, g, Sense::Upper, DEFAULT_LATTICE_CAP)
}

/// Conjugate `-E[-g(S_n)]`.
pub fn peng_lower_sum<G: Fn(f64) -> f64 + Sync + ?Sized>(cs: &CredalSet, n: usize, g: &G) -> Result<f64> {
    Ok(-peng_upper_sum(cs, n, &|s| -g(s))?)
}

/// Backward induction over the full history tree for a path functional
/// `phi(x_1, ..., x_n)`. Cost is `|support|^n`, so only small `n` are sensible.
pub fn peng_path<P: Fn(&[f64]) -> f64 + ?Sized>(cs: &CredalSet, n: usize, phi: &P, sense: Sense) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let tree = HistoryTree::new(cs, n);
    let leaves = tree.leaf_values(phi)?;
    let probs = dense_probs(cs);
    let m = tree.branching;
    let mut values = leaves;
    for _ in 0..n {
        values = values
            .chunks(m)
            .map(|cont| {
                probs.iter().fold(sense.identity(), |best, row| {
                    sense.pick(best, row.iter().zip(cont).map(|(p, v)| p * v).sum())
                })
            })
            .collect();
    }
    Ok(values[0])
}

/// Histories of length `n` over the union support, indexed in base `|support|`
/// with the first coordinate most significant.
struct HistoryTree<'a> {
    support: &'a [f64],
    branching: usize,
    depth: usize,
}

impl<'a> HistoryTree<'a> {
    fn new(cs: &'a CredalSet, depth: usize) -> Self {
        let support = cs.union_support();
        Self { support, branching: support.len(), depth }
    }

    fn leaf_count(&self) -> usize {
        self.branching.pow(self.depth as u32)
    }

    fn leaf_values<P: Fn(&[f64]) -> f64 + ?Sized>(&self, phi: &P) -> Result<Vec<f64>> {
        let mut path = vec![0.0; self.depth];
        let mut out = Vec::with_capacity(self.leaf_count());
        for leaf in 0..self.leaf_count() {
            let mut code = leaf;
            for slot in path.iter_mut().rev() {
                *slot = self.support[code % self.branching];
                code /= self.branching;
            }
            let v = phi(&path);
            if !v.is_finite() {
                return Err(Error::NonFiniteFunctionValue(path.iter().sum()));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Exact max and min, over every assignment of a prior to every history node,
/// of the induced classical expectation of `phi(x_1, ..., x_n)`.
///
/// The number of strategies is `|priors|^(internal nodes)`; instances needing more
/// than `1e7` leaf evaluations are rejected.
pub fn brute_force_strategy_oracle<P: Fn(&[f64]) -> f64 + ?Sized>(
    cs: &CredalSet,
    n: usize,
    phi: &P,
) -> Result<UpperLowerPair> {
    if n == 0 || n > 5 {
        return Err(Error::InvalidParameter(format!("oracle horizon must be in 1..=5, got {n}")));
    }
    let tree = HistoryTree::new(cs, n);
    let m = tree.branching;
    let k = cs.len();
    let internal: usize = (0..n).map(|d| m.pow(d as u32)).sum();
    let needed = (k as f64).powi(internal as i32) * tree.leaf_count() as f64;
    if needed > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { needed, limit: ORACLE_LIMIT });
    }
    let leaves = tree.leaf_values(phi)?;
    let probs = dense_probs(cs);

    // choice[node] for nodes in breadth-first order; depth d starts at offsets[d]
    let offsets: Vec<usize> = (0..n).map(|d| (0..d).map(|e| m.pow(e as u32)).sum()).collect();
    let mut choice = vec![0usize; internal];
    let mut best = UpperLowerPair { upper: f64::NEG_INFINITY, lower: f64::INFINITY };
    let mut buf = leaves.clone();
    loop {
        buf.clear();
        buf.extend_from_slice(&leaves);
        for d in (0..n).rev() {
            let width = m.pow(d as u32);
            let next: Vec<f64> = (0..width)
                .map(|j| {
                    let row = &probs[choice[offsets[d] + j]];
                    row.iter().zip(&buf[j * m..(j + 1) * m]).map(|(p, v)| p * v).sum()
                })
                .collect();
            buf = next;
        }
        best.upper = best.upper.max(buf[0]);
        best.lower = best.lower.min(buf[0]);

        // advance the odometer
        let mut i = 0;
        loop {
            if i == internal {
                return Ok(best);
            }
            choice[i] += 1;
            if choice[i] < k {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Joint capacities of two consecutive Peng-IID draws against the product of marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub joint_upper: f64,
    pub product_upper: f64,
    pub joint_lower: f64,
    pub product_lower: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

impl FactorizationReport {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

/// Compares `V(X∈D, Y∈G)` with `V(X∈D)·V(Y∈G)` and likewise for `v`.
pub fn joint_capacity_factorization(cs: &CredalSet, d: &Event, g: &Event) -> Result<FactorizationReport> {
    d.check(cs)?;
    g.check(cs)?;
    let phi = |xy: &[f64]| if d.contains(xy[0]) && g.contains(xy[1]) { 1.0 } else { 0.0 };
    let joint_upper = peng_path(cs, 2, &phi, Sense::Upper)?;
    let joint_lower = -peng_path(cs, 2, &|xy: &[f64]| -phi(xy), Sense::Upper)?;
    let product_upper = upper_capacity(cs, d)? * upper_capacity(cs, g)?;
    let product_lower = lower_capacity(cs, d)? * lower_capacity(cs, g)?;
    Ok(FactorizationReport {
        joint_upper,
        product_upper,
        joint_lower,
        product_lower,
        upper_holds: (joint_upper - product_upper).abs() <= EXACT_TOL,
        lower_holds: (joint_lower - product_lower).abs() <= EXACT_TOL,
    })
}

/// `E[phi(S_n / n)]` over a list of horizons, with the limit `sup_{[mu_, mu̅]} phi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakLlnCurve {
    pub points: Vec<(usize, f64)>,
    pub target: f64,
}

impl WeakLlnCurve {
    pub fn error_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == n).map(|p| (p.1 - self.target).abs())
    }
}

/// Supremum of `phi` on a `1e-4` grid over `[lo, hi]`, endpoints included.
pub fn grid_sup<F: Fn(f64) -> f64 + ?Sized>(phi: &F, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / TARGET_GRID_STEP).ceil() as usize;
    (0..steps).map(|i| phi(lo + i as f64 * TARGET_GRID_STEP)).fold(phi(hi), f64::max)
}

pub fn weak_lln_curve<F: Fn(f64) -> f64 + Sync + ?Sized>(
    cs: &CredalSet,
    phi: &F,
    ns: &[usize],
) -> Result<WeakLlnCurve> {
    let points = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            peng_upper_sum(cs, n, &|s| phi(s / nf)).map(|v| (n, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakLlnCurve { points, target: grid_sup(phi, cs.mu_lower(), cs.mu_upper()) })
}

/// One term of the exponential-moment sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentPoint {
    pub n: usize,
    pub lambda: f64,
    pub log_value: f64,
    pub value: f64,
}

/// `ln max_P E_P[exp(lambda (X - mu̅))]`, evaluated with a log-sum-exp per prior.
fn log_step_factor(cs: &CredalSet, lambda: f64) -> f64 {
    let mu = cs.mu_upper();
    cs.priors()
        .iter()
        .map(|p| {
            let terms: Vec<f64> =
                p.atoms().iter().filter(|a| a.1 > 0.0).map(|&(x, q)| q.ln() + lambda * (x - mu)).collect();
            let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E[exp(lambda_n (S_n - n mu̅))]` with `lambda_n = m ln(1+n)/n`, using the per-step
/// product form of the expectation.
pub fn lemma4_point(cs: &CredalSet, m: f64, n: usize) -> Result<MomentPoint> {
    if !(m > 1.0) {
        return Err(Error::InvalidParameter(format!("multiplier m must exceed 1, got {m}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let nf = n as f64;
    let lambda = m * (1.0 + nf).ln() / nf;
    let log_value = nf * log_step_factor(cs, lambda);
    Ok(MomentPoint { n, lambda, log_value, value: log_value.exp() })
}

pub fn lemma4_product_bound(cs: &CredalSet, m: f64, ns: &[usize]) -> Result<Vec<MomentPoint>> {
    ns.iter().map(|&n| lemma4_point(cs, m, n)).collect()
}

/// Exact tail capacity against its exponential Chebyshev bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevReport {
    pub n: usize,
    pub epsilon: f64,
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `V(S_n/n ≥ mu̅ + eps)` against `(1+n)^(-eps m) · E[exp(lambda_n (S_n - n mu̅))]`.
pub fn chebyshev_capacity_bound(cs: &CredalSet, epsilon: f64, m: f64, n: usize) -> Result<ChebyshevReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let threshold = cs.mu_upper() + epsilon;
    let nf = n as f64;
    let lhs = peng_upper_sum(cs, n, &|s| if s / nf >= threshold { 1.0 } else { 0.0 })?;
    let moment = lemma4_point(cs, m, n)?;
    let rhs = (-(epsilon * m) * (1.0 + nf).ln() + moment.log_value).exp();
    Ok(ChebyshevReport { n, epsilon, m, lhs, rhs, holds: lhs <= rhs })
}

/// `e^x ≤ 1 + x + |x|^(1+alpha) e^(2|x|)`.
pub fn exp_inequality_holds(x: f64, alpha: f64) -> bool {
    x.exp() <= 1.0 + x + x.abs().powf(1.0 + alpha) * (2.0 * x.abs()).exp()
}

/// First `(x, alpha)` on the grid where the inequality fails, if any.
pub fn exp_inequality_grid(x_step: f64, alphas: &[f64]) -> Option<(f64, f64)> {
    let count = (20.0 / x_step).round() as i64;
    for &alpha in alphas {
        for i in 0..=count {
            let x = -10.0 + i as f64 * x_step;
            if !exp_inequality_holds(x, alpha) {
                return Some((x, alpha));
            }
        }
    }
    None
}

/// Smallest `n ≥ 1` with `c n / ln(1+n) > radius`: from there on truncating
/// `|X_n - mu̅|` at that level changes nothing for a variable bounded by `radius`.
pub fn truncation_inactive_from(c: f64, radius: f64) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation constant must be positive, got {c}")));
    }
    let level = |n: usize| c * n as f64 / (1.0 + n as f64).ln();
    if level(1) > radius {
        return Ok(1);
    }
    let mut hi = 2usize;
    while level(hi) <= radius {
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidParameter("radius too large".into()))?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if level(mid) > radius {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
