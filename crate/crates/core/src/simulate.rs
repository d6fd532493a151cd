//! Sample paths of Peng-IID sequences under explicit prior-selection policies.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credal::CredalSet;
use crate::rng::{step_uniforms, StepStream};
use crate::{Error, Result, EXACT_TOL};

/// Default block growth factor.
pub const DEFAULT_RHO: f64 = 1.6;

/// Signature of a custom rule: `(step, running_sum, history_length) -> prior index`.
pub type RuleFn = dyn Fn(usize, f64, usize) -> usize + Send + Sync;

#[derive(Clone)]
pub struct CustomRule(pub Arc<RuleFn>);

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomRule(..)")
    }
}

/// How the two extreme priors are mixed inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    /// Error-diffusion accumulator; the fraction of upper picks tracks the weight exactly.
    Deterministic,
    /// Each step picks the upper prior with probability equal to the weight.
    Randomized,
}

/// Geometric blocks `⌈rho^k⌉`, block `k` aiming at `targets[k mod len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule {
    targets: Vec<f64>,
    weights: Vec<f64>,
    rho: f64,
    mode: Interleave,
    upper_index: usize,
    lower_index: usize,
}

impl BlockSchedule {
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Weight on the upper-mean prior for each target.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mode(&self) -> Interleave {
        self.mode
    }

    /// Length of block `k` (0-based).
    pub fn block_len(&self, k: usize) -> usize {
        self.rho.powi(k as i32).ceil() as usize
    }
}

/// Nature's rule for picking the prior that generates the next draw.
#[derive(Debug, Clone)]
pub enum PriorPolicy {
    ConstantMax,
    ConstantMin,
    ConstantIndex(usize),
    PeriodicSchedule(Vec<usize>),
    BlockTargets(BlockSchedule),
    Custom(CustomRule),
}

impl PriorPolicy {
    pub fn custom(rule: impl Fn(usize, f64, usize) -> usize + Send + Sync + 'static) -> Self {
        PriorPolicy::Custom(CustomRule(Arc::new(rule)))
    }

    fn validate(&self, cs: &CredalSet) -> Result<()> {
        let k = cs.len();
        let bad = |index: usize| Err(Error::InvalidPolicyIndex { index, priors: k });
        match self {
            PriorPolicy::ConstantIndex(i) if *i >= k => bad(*i),
            PriorPolicy::PeriodicSchedule(list) => match list.iter().find(|&&i| i >= k) {
                Some(&i) => bad(i),
                None if list.is_empty() => Err(Error::InvalidParameter("empty periodic schedule".into())),
                None => Ok(()),
            },
            PriorPolicy::BlockTargets(b) if b.upper_index >= k || b.lower_index >= k => {
                bad(b.upper_index.max(b.lower_index))
            }
            _ => Ok(()),
        }
    }
}

/// Mutable cursor over a policy while one path is generated.
struct PolicyState<'a> {
    policy: &'a PriorPolicy,
    upper: usize,
    lower: usize,
    block: usize,
    left_in_block: usize,
    acc: f64,
}

impl<'a> PolicyState<'a> {
    fn new(policy: &'a PriorPolicy, cs: &CredalSet) -> Self {
        let left_in_block = match policy {
            PriorPolicy::BlockTargets(b) => b.block_len(0),
            _ => 0,
        };
        Self { policy, upper: cs.argmax_mean(), lower: cs.argmin_mean(), block: 0, left_in_block, acc: 0.0 }
    }

    fn choose(&mut self, step: usize, running_sum: f64, u: f64) -> usize {
        match self.policy {
            PriorPolicy::ConstantMax => self.upper,
            PriorPolicy::ConstantMin => self.lower,
            PriorPolicy::ConstantIndex(i) => *i,
            PriorPolicy::PeriodicSchedule(list) => list[(step - 1) % list.len()],
            PriorPolicy::Custom(rule) => (rule.0)(step, running_sum, step - 1),
            PriorPolicy::BlockTargets(b) => {
                if self.left_in_block == 0 {
                    self.block += 1;
                    self.left_in_block = b.block_len(self.block);
                    self.acc = 0.0;
                }
                self.left_in_block -= 1;
                let w = b.weights[self.block % b.weights.len()];
                let pick_upper = match b.mode {
                    Interleave::Deterministic => {
                        self.acc += w;
                        if self.acc >= 1.0 - EXACT_TOL {
                            self.acc -= 1.0;
                            true
                        } else {
                            false
                        }
                    }
                    Interleave::Randomized => u < w,
                };
                if pick_upper {
                    b.upper_index
                } else {
                    b.lower_index
                }
            }
        }
    }
}

/// Builds a block-target policy mixing the upper- and lower-mean priors so that
/// block `k` has mean `targets[k mod len]`.
pub fn block_targets_policy(cs: &CredalSet, targets: &[f64], rho: f64, mode: Interleave) -> Result<PriorPolicy> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no block targets".into()));
    }
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("block growth must exceed 1, got {rho}")));
    }
    let (lo, hi) = (cs.mu_lower(), cs.mu_upper());
    let weights = targets
        .iter()
        .map(|&t| {
            if !(t >= lo - EXACT_TOL && t <= hi + EXACT_TOL) {
                return Err(Error::TargetOutOfRange { target: t, lower: lo, upper: hi });
            }
            Ok(if hi > lo { ((t - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PriorPolicy::BlockTargets(BlockSchedule {
        targets: targets.to_vec(),
        weights,
        rho,
        mode,
        upper_index: cs.argmax_mean(),
        lower_index: cs.argmin_mean(),
    }))
}

/// One realized path.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub xs: Vec<f64>,
    pub policy_trace: Vec<usize>,
    pub seed: u64,
    pub credal_id: String,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Draws `n` steps. Step `i` samples from `priors[policy(i, S_{i-1}, i-1)]` using the
/// uniforms keyed by `(seed, i)`, so the output is a pure function of the inputs.
pub fn sample_path(cs: &CredalSet, policy: &PriorPolicy, n: usize, seed: u64) -> Result<SamplePath> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    policy.validate(cs)?;
    let k = cs.len();
    let mut state = PolicyState::new(policy, cs);
    let mut stream = StepStream::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut sum = 0.0;
    for step in 1..=n {
        let [u_draw, u_policy] = stream.next_step();
        let index = state.choose(step, sum, u_policy);
        if index >= k {
            return Err(Error::InvalidPolicyIndex { index, priors: k });
        }
        let x = cs.priors()[index].quantile(u_draw);
        sum += x;
        xs.push(x);
        trace.push(index);
    }
    Ok(SamplePath { xs, policy_trace: trace, seed, credal_id: cs.fingerprint() })
}

/// Paths for several seeds, generated in parallel and returned in seed order.
pub fn sample_paths(cs: &CredalSet, policy: &PriorPolicy, n: usize, seeds: &[u64]) -> Result<Vec<SamplePath>> {
    seeds.par_iter().map(|&s| sample_path(cs, policy, n, s)).collect()
}

/// Regenerates the draws of a path from its recorded prior choices.
pub fn replay(cs: &CredalSet, policy_trace: &[usize], seed: u64) -> Result<Vec<f64>> {
    let mut stream = StepStream::new(seed);
    policy_trace
        .iter()
        .map(|&index| {
            let [u, _] = stream.next_step();
            cs.priors().get(index).map(|p| p.quantile(u)).ok_or(Error::InvalidPolicyIndex { index, priors: cs.len() })
        })
        .collect()
}

/// The draw at a single step given the prior used there.
pub fn draw_at(cs: &CredalSet, index: usize, seed: u64, step: usize) -> Result<f64> {
    let [u, _] = step_uniforms(seed, step);
    cs.priors().get(index).map(|p| p.quantile(u)).ok_or(Error::InvalidPolicyIndex { index, priors: cs.len() })
}

/// Serializable policy description used by run configs and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    ConstantMax,
    ConstantMin,
    ConstantIndex { index: usize },
    Periodic { schedule: Vec<usize> },
    BlockTargets { targets: Vec<f64>, rho: f64, interleave: Interleave },
}

impl PolicySpec {
    pub fn build(&self, cs: &CredalSet) -> Result<PriorPolicy> {
        Ok(match self {
            PolicySpec::ConstantMax => PriorPolicy::ConstantMax,
            PolicySpec::ConstantMin => PriorPolicy::ConstantMin,
            PolicySpec::ConstantIndex { index } => PriorPolicy::ConstantIndex(*index),
            PolicySpec::Periodic { schedule } => PriorPolicy::PeriodicSchedule(schedule.clone()),
            PolicySpec::BlockTargets { targets, rho, interleave } => {
                return block_targets_policy(cs, targets, *rho, *interleave)
            }
        })
    }

    /// Parses the short forms `max`, `min`, `index:<i>`, `periodic:<i,j,..>`,
    /// `blocks:<t1,t2,..>` and `blocks-random:<t1,t2,..>`.
    pub fn parse(text: &str, rho: f64) -> Result<Self> {
        let (head, tail) = text.split_once(':').unwrap_or((text, ""));
        let list = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{p}: {e}"))))
                .collect()
        };
        let indices = |s: &str| -> Result<Vec<usize>> {
            s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{p}: {e}")))).collect()
        };
        match head {
            "max" | "constant-max" => Ok(PolicySpec::ConstantMax),
            "min" | "constant-min" => Ok(PolicySpec::ConstantMin),
            "index" => Ok(PolicySpec::ConstantIndex { index: indices(tail)?[0] }),
            "periodic" => Ok(PolicySpec::Periodic { schedule: indices(tail)? }),
            "blocks" => {
                Ok(PolicySpec::BlockTargets { targets: list(tail)?, rho, interleave: Interleave::Deterministic })
            }
            "blocks-random" => {
                Ok(PolicySpec::BlockTargets { targets: list(tail)?, rho, interleave: Interleave::Randomized })
            }
            other => Err(Error::Parse(format!("unknown policy '{other}'"))),
        }
    }
}

/// Targets at 1/8, 1/2 and 7/8 of the way from the lower to the upper mean.
pub fn default_targets(cs: &CredalSet) -> Vec<f64> {
    let (lo, hi) = (cs.mu_lower(), cs.mu_upper());
    [0.125, 0.5, 0.875].iter().map(|f| lo + f * (hi - lo)).collect()
}

/// The five adversaries used by the containment check.
pub fn stress_suite(cs: &CredalSet, targets: &[f64], rho: f64) -> Vec<(&'static str, PolicySpec)> {
    vec![
        ("constant-max", PolicySpec::ConstantMax),
        ("constant-min", PolicySpec::ConstantMin),
        ("periodic", PolicySpec::Periodic { schedule: vec![cs.argmax_mean(), cs.argmin_mean()] }),
        (
            "blocks-deterministic",
            PolicySpec::BlockTargets { targets: targets.to_vec(), rho, interleave: Interleave::Deterministic },
        ),
        (
            "blocks-randomized",
            PolicySpec::BlockTargets { targets: targets.to_vec(), rho, interleave: Interleave::Randomized },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credal::{make_pmf, FinitePmf};

    fn bern_pair() -> CredalSet {
        CredalSet::new(vec![FinitePmf::bernoulli(0.3).unwrap(), FinitePmf::bernoulli(0.7).unwrap()]).unwrap()
    }

    #[test]
    fn periodic_point_masses_alternate() {
        let cs =
            CredalSet::new(vec![FinitePmf::point_mass(0.0).unwrap(), FinitePmf::point_mass(1.0).unwrap()]).unwrap();
        let path = sample_path(&cs, &PriorPolicy::PeriodicSchedule(vec![0, 1]), 8, 3).unwrap();
        assert_eq!(path.xs, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(path.policy_trace, vec![0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn reproducible_and_replayable() {
        let cs = bern_pair();
        let policy = block_targets_policy(&cs, &[0.35, 0.65], 1.6, Interleave::Randomized).unwrap();
        let a = sample_path(&cs, &policy, 500, 99).unwrap();
        let b = sample_path(&cs, &policy, 500, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(replay(&cs, &a.policy_trace, 99).unwrap(), a.xs);
        assert_eq!(draw_at(&cs, a.policy_trace[41], 99, 42).unwrap(), a.xs[41]);
        assert_ne!(sample_path(&cs, &policy, 500, 100).unwrap().xs, a.xs);
    }

    #[test]
    fn singleton_ignores_policy() {
        let cs = CredalSet::new(vec![make_pmf(&[1.0, 2.0, 4.0], &[0.2, 0.3, 0.5]).unwrap()]).unwrap();
        let a = sample_path(&cs, &PriorPolicy::ConstantMax, 200, 5).unwrap();
        let b = sample_path(&cs, &PriorPolicy::custom(|_, _, _| 0), 200, 5).unwrap();
        assert_eq!(a.xs, b.xs);
        assert!(a.xs.iter().all(|x| [1.0, 2.0, 4.0].contains(x)));
    }

    #[test]
    fn invalid_indices() {
        let cs = bern_pair();
        assert!(matches!(
            sample_path(&cs, &PriorPolicy::ConstantIndex(2), 10, 0),
            Err(Error::InvalidPolicyIndex { index: 2, priors: 2 })
        ));
        assert!(sample_path(&cs, &PriorPolicy::PeriodicSchedule(vec![0, 5]), 10, 0).is_err());
        let rogue = PriorPolicy::custom(|step, _, _| if step == 4 { 9 } else { 0 });
        assert!(matches!(sample_path(&cs, &rogue, 10, 0), Err(Error::InvalidPolicyIndex { index: 9, .. })));
    }

    #[test]
    fn custom_rule_sees_running_sum() {
        let cs =
            CredalSet::new(vec![FinitePmf::point_mass(0.0).unwrap(), FinitePmf::point_mass(1.0).unwrap()]).unwrap();
        // pick the 1-prior while the sum is below half the history
        let rule = PriorPolicy::custom(|_, sum, len| usize::from(sum < len as f64 / 2.0));
        let path = sample_path(&cs, &rule, 6, 0).unwrap();
        assert_eq!(path.xs, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn block_policy_weights_and_interleave() {
        let cs = bern_pair();
        assert!(matches!(
            block_targets_policy(&cs, &[0.8], 1.6, Interleave::Deterministic),
            Err(Error::TargetOutOfRange { .. })
        ));
        assert!(block_targets_policy(&cs, &[0.5], 1.0, Interleave::Deterministic).is_err());

        let top = block_targets_policy(&cs, &[0.7], 2.0, Interleave::Deterministic).unwrap();
        let path = sample_path(&cs, &top, 64, 1).unwrap();
        assert!(path.policy_trace.iter().all(|&i| i == 1));

        let mid = block_targets_policy(&cs, &[0.5], 2.0, Interleave::Deterministic).unwrap();
        if let PriorPolicy::BlockTargets(b) = &mid {
            assert!((b.weights()[0] - 0.5).abs() < 1e-12);
            assert_eq!((0..4).map(|k| b.block_len(k)).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
        }
        let path = sample_path(&cs, &mid, 15, 1).unwrap();
        // blocks of 1, 2, 4, 8 each restart the accumulator at lower, upper, lower, ...
        assert_eq!(path.policy_trace, vec![0, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn policy_spec_parsing() {
        assert_eq!(PolicySpec::parse("max", 1.6).unwrap(), PolicySpec::ConstantMax);
        assert_eq!(PolicySpec::parse("periodic:0,1", 1.6).unwrap(), PolicySpec::Periodic { schedule: vec![0, 1] });
        assert_eq!(
            PolicySpec::parse("blocks-random:0.35,0.5", 2.0).unwrap(),
            PolicySpec::BlockTargets { targets: vec![0.35, 0.5], rho: 2.0, interleave: Interleave::Randomized }
        );
        assert!(PolicySpec::parse("sideways", 1.6).is_err());
        let json = serde_json::to_string(&PolicySpec::ConstantIndex { index: 1 }).unwrap();
        assert_eq!(json, r#"{"kind":"constant-index","index":1}"#);
        let cs = bern_pair();
        assert_eq!(
            default_targets(&cs).iter().map(|t| (t * 100.0).round()).collect::<Vec<_>>(),
            vec![35.0, 50.0, 65.0]
        );
    }
}
