//! Finite-support distributions and credal sets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Input slack allowed on the probability sum before renormalizing.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Support points closer than this are treated as the same point.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A probability mass function with finitely many atoms on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    atoms: Vec<(f64, f64)>,
}

impl FinitePmf {
    /// Builds a pmf from parallel value/probability lists.
    ///
    /// Atoms are sorted by value. Probabilities are renormalized when their sum is
    /// within `1e-9` of one and rejected otherwise.
    pub fn new(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::LengthMismatch { values: values.len(), probs: probs.len() });
        }
        if values.is_empty() {
            return Err(Error::EmptyPmf);
        }
        let mut atoms = Vec::with_capacity(values.len());
        for (&v, &p) in values.iter().zip(probs) {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(v));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::NegativeProb { value: v, prob: p });
            }
            atoms.push((v, p));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in atoms.windows(2) {
            if w[1].0 - w[0].0 <= SUPPORT_TOL {
                return Err(Error::DuplicateValue(w[1].0));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(total));
        }
        for a in &mut atoms {
            a.1 /= total;
        }
        Ok(Self { atoms })
    }

    /// Point mass at `value`.
    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(&[value], &[1.0])
    }

    /// Two-point pmf on {0, 1} with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(&[0.0, 1.0], &[1.0 - p, p])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    /// Classical expectation `Σ f(x_i) p_i`.
    pub fn expectation<F: Fn(f64) -> f64 + ?Sized>(&self, f: &F) -> Result<f64> {
        let mut acc = 0.0;
        for &(x, p) in &self.atoms {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFiniteFunctionValue(x));
            }
            acc += fx * p;
        }
        Ok(acc)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms.iter().map(|&(x, p)| (x - m) * (x - m) * p).sum()
    }

    /// Probability assigned to the members of `event`.
    pub fn prob_of(&self, event: &Event) -> f64 {
        self.atoms.iter().filter(|a| event.contains(a.0)).map(|a| a.1).sum()
    }

    /// Inverse-CDF draw for a uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut cum = 0.0;
        for &(x, p) in &self.atoms {
            cum += p;
            if u < cum {
                return x;
            }
        }
        // rounding can leave cum slightly below 1
        self.atoms.iter().rev().find(|a| a.1 > 0.0).map_or(self.atoms[self.atoms.len() - 1].0, |a| a.0)
    }
}

/// Free-function form of [`FinitePmf::new`].
pub fn make_pmf(values: &[f64], probs: &[f64]) -> Result<FinitePmf> {
    FinitePmf::new(values, probs)
}

/// Free-function form of [`FinitePmf::expectation`].
pub fn pmf_expectation<F: Fn(f64) -> f64 + ?Sized>(p: &FinitePmf, f: &F) -> Result<f64> {
    p.expectation(f)
}

/// A nonempty finite set of priors.
#[derive(Debug, Clone, PartialEq)]
pub struct CredalSet {
    priors: Vec<FinitePmf>,
    union_support: Vec<f64>,
    mu_upper: f64,
    mu_lower: f64,
}

impl CredalSet {
    pub fn new(priors: Vec<FinitePmf>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::EmptyCredalSet);
        }
        let mut all: Vec<f64> = priors.iter().flat_map(|p| p.values()).collect();
        all.sort_by(f64::total_cmp);
        let mut union_support: Vec<f64> = Vec::with_capacity(all.len());
        for x in all {
            match union_support.last() {
                Some(&last) if x - last <= SUPPORT_TOL => {}
                _ => union_support.push(x),
            }
        }
        let means: Vec<f64> = priors.iter().map(FinitePmf::mean).collect();
        let mu_upper = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mu_lower = means.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { priors, union_support, mu_upper, mu_lower })
    }

    pub fn priors(&self) -> &[FinitePmf] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn union_support(&self) -> &[f64] {
        &self.union_support
    }

    /// Upper mean `max_P E_P[X]`.
    pub fn mu_upper(&self) -> f64 {
        self.mu_upper
    }

    /// Lower mean `min_P E_P[X]`.
    pub fn mu_lower(&self) -> f64 {
        self.mu_lower
    }

    /// Index of the first prior attaining the upper mean.
    pub fn argmax_mean(&self) -> usize {
        self.priors.iter().position(|p| p.mean() == self.mu_upper).unwrap_or(0)
    }

    /// Index of the first prior attaining the lower mean.
    pub fn argmin_mean(&self) -> usize {
        self.priors.iter().position(|p| p.mean() == self.mu_lower).unwrap_or(0)
    }

    pub fn min_support(&self) -> f64 {
        self.union_support[0]
    }

    pub fn max_support(&self) -> f64 {
        self.union_support[self.union_support.len() - 1]
    }

    /// Position of `x` in the union support, matching within [`SUPPORT_TOL`].
    pub fn support_index(&self, x: f64) -> Option<usize> {
        let i = self.union_support.partition_point(|&s| s < x - SUPPORT_TOL);
        (i < self.union_support.len() && (self.union_support[i] - x).abs() <= SUPPORT_TOL).then_some(i)
    }

    /// Short stable identifier derived from the exact atom bit patterns.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.priors {
            for &(x, q) in p.atoms() {
                h.update(x.to_bits().to_le_bytes());
                h.update(q.to_bits().to_le_bytes());
            }
            h.update([0xff]);
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: CredalDoc = serde_json::from_str(s)?;
        doc.build()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_doc(&self) -> CredalDoc {
        CredalDoc {
            priors: self
                .priors
                .iter()
                .map(|p| PmfDoc { values: p.values().collect(), probs: p.probs().collect() })
                .collect(),
        }
    }
}

/// Free-function form of [`CredalSet::new`].
pub fn make_credal(priors: Vec<FinitePmf>) -> Result<CredalSet> {
    CredalSet::new(priors)
}

/// On-disk credal set: `{"priors": [{"values": [...], "probs": [...]}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CredalDoc {
    pub priors: Vec<PmfDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PmfDoc {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl CredalDoc {
    pub fn build(&self) -> Result<CredalSet> {
        let priors = self.priors.iter().map(|p| FinitePmf::new(&p.values, &p.probs)).collect::<Result<Vec<_>>>()?;
        CredalSet::new(priors)
    }
}

/// A subset of a credal set's union support.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Event {
    members: Vec<f64>,
}

impl Event {
    pub fn new(members: impl IntoIterator<Item = f64>) -> Self {
        let mut members: Vec<f64> = members.into_iter().collect();
        members.sort_by(f64::total_cmp);
        members.dedup_by(|a, b| (*a - *b).abs() <= SUPPORT_TOL);
        Self { members }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The whole union support of `cs`.
    pub fn full(cs: &CredalSet) -> Self {
        Self { members: cs.union_support().to_vec() }
    }

    /// Support points of `cs` satisfying `pred`.
    pub fn from_predicate(cs: &CredalSet, pred: impl Fn(f64) -> bool) -> Self {
        Self { members: cs.union_support().iter().copied().filter(|&x| pred(x)).collect() }
    }

    pub fn members(&self) -> &[f64] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.members.partition_point(|&m| m < x - SUPPORT_TOL);
        i < self.members.len() && (self.members[i] - x).abs() <= SUPPORT_TOL
    }

    /// Fails with `EventOutsideSupport` on the first member not in `cs`'s support.
    pub fn check(&self, cs: &CredalSet) -> Result<()> {
        match self.members.iter().find(|&&m| cs.support_index(m).is_none()) {
            Some(&m) => Err(Error::EventOutsideSupport(m)),
            None => Ok(()),
        }
    }

    /// Complement within the union support of `cs`.
    pub fn complement(&self, cs: &CredalSet) -> Self {
        Self::from_predicate(cs, |x| !self.contains(x))
    }

    pub fn union(&self, other: &Event) -> Self {
        Self::new(self.members.iter().chain(&other.members).copied())
    }

    pub fn indicator(&self) -> impl Fn(f64) -> f64 + '_ {
        move |x| if self.contains(x) { 1.0 } else { 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn bernoulli_mean() {
        let p = make_pmf(&[0.0, 1.0], &[0.3, 0.7]).unwrap();
        assert!(close(p.mean(), 0.7));
        assert!(close(pmf_expectation(&p, &|x| x).unwrap(), 0.7));
    }

    #[test]
    fn point_mass() {
        let p = make_pmf(&[5.0], &[1.0]).unwrap();
        assert_eq!(p.mean(), 5.0);
        assert_eq!(pmf_expectation(&p, &|x| x * x).unwrap(), 25.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(make_pmf(&[0.0, 1.0], &[0.5, 0.6]), Err(Error::NotNormalized(1.1)));
        assert!(matches!(make_pmf(&[0.0], &[0.5, 0.5]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(make_pmf(&[0.0, 1.0], &[-0.1, 1.1]), Err(Error::NegativeProb { .. })));
        assert!(matches!(make_pmf(&[1.0, 1.0], &[0.5, 0.5]), Err(Error::DuplicateValue(_))));
        assert!(matches!(make_pmf(&[f64::NAN], &[1.0]), Err(Error::NonFiniteValue(_))));
        assert!(matches!(make_pmf(&[], &[]), Err(Error::EmptyPmf)));
        assert!(matches!(CredalSet::new(vec![]), Err(Error::EmptyCredalSet)));
    }

    #[test]
    fn renormalizes_within_slack() {
        let p = make_pmf(&[1.0, 0.0], &[0.5 + 4e-10, 0.5]).unwrap();
        let total: f64 = p.probs().sum();
        assert!(close(total, 1.0));
        assert_eq!(p.values().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn non_finite_function_value() {
        let p = FinitePmf::bernoulli(0.5).unwrap();
        assert_eq!(p.expectation(&|x| 1.0 / x), Err(Error::NonFiniteFunctionValue(0.0)));
    }

    #[test]
    fn fractional_power_expectation() {
        let p = FinitePmf::bernoulli(0.3).unwrap();
        let got = p.expectation(&|x: f64| (x - 0.7).abs().powf(1.5)).unwrap();
        // atoms: 0 w.p. 0.7 at distance 0.7, 1 w.p. 0.3 at distance 0.3
        let expected = 0.7 * 0.7f64.powf(1.5) + 0.3 * 0.3f64.powf(1.5);
        assert!(close(got, expected));
    }

    #[test]
    fn credal_means_and_support() {
        let cs = make_credal(vec![FinitePmf::bernoulli(0.3).unwrap(), FinitePmf::bernoulli(0.7).unwrap()]).unwrap();
        assert!(close(cs.mu_lower(), 0.3));
        assert!(close(cs.mu_upper(), 0.7));
        assert_eq!(cs.argmax_mean(), 1);
        assert_eq!(cs.argmin_mean(), 0);

        let single = make_credal(vec![FinitePmf::point_mass(2.0).unwrap()]).unwrap();
        assert_eq!((single.mu_lower(), single.mu_upper()), (2.0, 2.0));

        let mixed =
            make_credal(vec![FinitePmf::bernoulli(0.5).unwrap(), make_pmf(&[0.0, 2.0], &[0.5, 0.5]).unwrap()]).unwrap();
        assert_eq!(mixed.union_support(), &[0.0, 1.0, 2.0]);
        assert!(close(mixed.mu_lower(), 0.5));
        assert!(close(mixed.mu_upper(), 1.0));
    }

    #[test]
    fn union_support_merges_near_duplicates() {
        let a = make_pmf(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let b = make_pmf(&[0.0, 1.0 + 1e-10], &[0.5, 0.5]).unwrap();
        let cs = make_credal(vec![a, b]).unwrap();
        assert_eq!(cs.union_support(), &[0.0, 1.0]);
        assert_eq!(cs.support_index(1.0 + 1e-10), Some(1));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"priors": [{"values": [0, 1], "probs": [0.7, 0.3]}, {"values": [0, 1], "probs": [0.3, 0.7]}]}"#;
        let cs = CredalSet::from_json_str(text).unwrap();
        assert_eq!(cs.len(), 2);
        let again = cs.to_doc().build().unwrap();
        assert_eq!(cs, again);
        assert_eq!(cs.fingerprint(), again.fingerprint());
        assert!(CredalSet::from_json_str(r#"{"priors": [], "extra": 1}"#).is_err());
        assert_eq!(CredalSet::from_json_str(r#"{"priors": []}"#), Err(Error::EmptyCredalSet));
    }

    #[test]
    fn event_membership() {
        let cs = make_credal(vec![make_pmf(&[0.0, 1.0, 2.0], &[0.2, 0.6, 0.2]).unwrap()]).unwrap();
        let a = Event::new([2.0, 0.0]);
        assert!(a.contains(0.0) && a.contains(2.0) && !a.contains(1.0));
        assert_eq!(a.complement(&cs).members(), &[1.0]);
        assert_eq!(Event::new([3.0]).check(&cs), Err(Error::EventOutsideSupport(3.0)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pmf_strategy() -> impl Strategy<Value = FinitePmf> {
            prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|w| {
                let total: f64 = w.iter().sum();
                let values: Vec<f64> = (0..w.len()).map(|i| i as f64 - 1.5).collect();
                let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                FinitePmf::new(&values, &probs).unwrap()
            })
        }

        proptest! {
            #[test]
            fn expectation_is_linear(p in pmf_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0,
                                     c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
                let f = |x: f64| (c1 * x).sin();
                let g = |x: f64| x * x + c2;
                let lhs = p.expectation(&|x| a * f(x) + b * g(x)).unwrap();
                let rhs = a * p.expectation(&f).unwrap() + b * p.expectation(&g).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }

            #[test]
            fn credal_means_are_extremes(ps in prop::collection::vec(pmf_strategy(), 1..5)) {
                let cs = CredalSet::new(ps.clone()).unwrap();
                let means: Vec<f64> = ps.iter().map(|p| p.expectation(&|x| x).unwrap()).collect();
                let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
                prop_assert!((cs.mu_upper() - hi).abs() <= 1e-12);
                prop_assert!((cs.mu_lower() - lo).abs() <= 1e-12);
                prop_assert!(cs.mu_lower() <= cs.mu_upper());
            }
        }
    }
}
