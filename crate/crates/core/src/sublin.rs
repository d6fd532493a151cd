//! Upper/lower expectations, the capacity pair `(V, v)` and Choquet integrals
//! for a finite credal set.

use serde::Serialize;

use crate::credal::{CredalSet, Event};
use crate::{Result, EXACT_TOL};

/// An upper value paired with its conjugate lower value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperLowerPair {
    pub upper: f64,
    pub lower: f64,
}

impl UpperLowerPair {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `E[f] = max_P E_P[f]`.
pub fn upper_expectation<F: Fn(f64) -> f64 + ?Sized>(cs: &CredalSet, f: &F) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in cs.priors() {
        best = best.max(p.expectation(f)?);
    }
    Ok(best)
}

/// Conjugate expectation `-E[-f]`, i.e. `min_P E_P[f]`.
pub fn lower_expectation<F: Fn(f64) -> f64 + ?Sized>(cs: &CredalSet, f: &F) -> Result<f64> {
    Ok(-upper_expectation(cs, &|x| -f(x))?)
}

pub fn expectation_pair<F: Fn(f64) -> f64 + ?Sized>(cs: &CredalSet, f: &F) -> Result<UpperLowerPair> {
    Ok(UpperLowerPair { upper: upper_expectation(cs, f)?, lower: lower_expectation(cs, f)? })
}

/// `V(A) = max_P P(A)`.
pub fn upper_capacity(cs: &CredalSet, a: &Event) -> Result<f64> {
    a.check(cs)?;
    Ok(cs.priors().iter().map(|p| p.prob_of(a)).fold(0.0, f64::max))
}

/// `v(A) = min_P P(A)`.
pub fn lower_capacity(cs: &CredalSet, a: &Event) -> Result<f64> {
    a.check(cs)?;
    Ok(cs.priors().iter().map(|p| p.prob_of(a)).fold(1.0, f64::min))
}

pub fn capacity_pair(cs: &CredalSet, a: &Event) -> Result<UpperLowerPair> {
    Ok(UpperLowerPair { upper: upper_capacity(cs, a)?, lower: lower_capacity(cs, a)? })
}

/// Which capacity a Choquet integral is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Upper,
    Lower,
}

impl Capacity {
    pub fn eval(self, cs: &CredalSet, a: &Event) -> Result<f64> {
        match self {
            Capacity::Upper => upper_capacity(cs, a),
            Capacity::Lower => lower_capacity(cs, a),
        }
    }
}

/// Choquet integral of the identity variable against `cap`, using the layer-cake
/// sum `x(1) + Σ_{i≥2} (x(i) - x(i-1)) · Cap(X ≥ x(i))` over the sorted support.
pub fn choquet_integral(cs: &CredalSet, cap: Capacity) -> f64 {
    let xs = cs.union_support();
    let mut total = xs[0];
    for i in 1..xs.len() {
        let upper_set = Event::new(xs[i..].iter().copied());
        // members come straight from the support, so the check cannot fail
        let c = cap.eval(cs, &upper_set).expect("support subset");
        total += (xs[i] - xs[i - 1]) * c;
    }
    total
}

pub fn choquet_integral_upper(cs: &CredalSet) -> f64 {
    choquet_integral(cs, Capacity::Upper)
}

pub fn choquet_integral_lower(cs: &CredalSet) -> f64 {
    choquet_integral(cs, Capacity::Lower)
}

/// Outcome of checking the four sub-linear expectation axioms on one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub monotonicity: bool,
    pub constant_preserving: bool,
    pub sub_additivity: bool,
    pub positive_homogeneity: bool,
}

impl AxiomReport {
    pub fn all(&self) -> bool {
        self.monotonicity && self.constant_preserving && self.sub_additivity && self.positive_homogeneity
    }
}

/// Checks monotonicity, constant preservation, sub-additivity and positive
/// homogeneity of the upper expectation for the given `f`, `g`, `lambda`, `c`.
///
/// Comparisons use `1e-12` scaled by the magnitude of the quantities involved.
/// Monotonicity is vacuous unless `f ≥ g` on the whole support.
pub fn axioms_check<F, G>(cs: &CredalSet, f: &F, g: &G, lambda: f64, c: f64) -> Result<AxiomReport>
where
    F: Fn(f64) -> f64 + ?Sized,
    G: Fn(f64) -> f64 + ?Sized,
{
    let tol = |scale: f64| EXACT_TOL * scale.abs().max(1.0);
    let ef = upper_expectation(cs, f)?;
    let eg = upper_expectation(cs, g)?;

    let dominates = cs.union_support().iter().all(|&x| f(x) >= g(x));
    let monotonicity = !dominates || ef >= eg - tol(ef.abs().max(eg.abs()));

    let ec = upper_expectation(cs, &|_| c)?;
    let constant_preserving = (ec - c).abs() <= tol(c);

    let efg = upper_expectation(cs, &|x| f(x) + g(x))?;
    let sub_additivity = efg <= ef + eg + tol(ef.abs() + eg.abs());

    let elf = upper_expectation(cs, &|x| lambda * f(x))?;
    let positive_homogeneity = (elf - lambda * ef).abs() <= tol(lambda * ef);

    Ok(AxiomReport { monotonicity, constant_preserving, sub_additivity, positive_homogeneity })
}
