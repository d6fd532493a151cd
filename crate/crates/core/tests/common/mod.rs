#![allow(dead_code)]

use credal_lln::credal::{CredalSet, Event, FinitePmf};
use credal_lln::sublin::Capacity;
use rand::rngs::StdRng;
use rand::Rng;

pub fn bern_pair() -> CredalSet {
    CredalSet::new(vec![FinitePmf::bernoulli(0.3).unwrap(), FinitePmf::bernoulli(0.7).unwrap()]).unwrap()
}

/// Distinct support values on a 1e-3 grid in [-5, 5].
pub fn random_support(rng: &mut StdRng, m: usize) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::with_capacity(m);
    while values.len() < m {
        let v = (rng.gen_range(-5000i32..=5000) as f64) * 1e-3;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values
}

pub fn random_pmf_on(rng: &mut StdRng, values: &[f64], allow_zero: bool) -> FinitePmf {
    let w: Vec<f64> =
        values.iter().map(|_| if allow_zero && rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.01..1.0) }).collect();
    let mut total: f64 = w.iter().sum();
    let mut w = w;
    if total == 0.0 {
        w[0] = 1.0;
        total = 1.0;
    }
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    FinitePmf::new(values, &probs).unwrap()
}

/// Up to `max_priors` priors, each on a random subset of a shared pool of at most `max_support` points.
pub fn random_credal(rng: &mut StdRng, max_priors: usize, max_support: usize) -> CredalSet {
    let m = rng.gen_range(1..=max_support);
    let pool = random_support(rng, m);
    let k = rng.gen_range(1..=max_priors);
    let priors = (0..k)
        .map(|_| {
            let mut subset: Vec<f64> = pool.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
            if subset.is_empty() {
                subset.push(pool[rng.gen_range(0..pool.len())]);
            }
            random_pmf_on(rng, &subset, true)
        })
        .collect();
    CredalSet::new(priors).unwrap()
}

pub fn random_event(rng: &mut StdRng, cs: &CredalSet) -> Event {
    Event::new(cs.union_support().iter().copied().filter(|_| rng.gen_bool(0.5)))
}

/// Random lookup-table function on the support of `cs`, `0` elsewhere.
pub fn random_table(rng: &mut StdRng, cs: &CredalSet, scale: f64) -> Vec<(f64, f64)> {
    cs.union_support().iter().map(|&x| (x, rng.gen_range(-scale..scale))).collect()
}

pub fn table_fn(table: &[(f64, f64)]) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |x| table.iter().find(|e| (e.0 - x).abs() <= 1e-9).map_or(0.0, |e| e.1)
}

/// Two-tail Choquet integral of the identity, integrating `t -> Cap(X >= t)` piecewise
/// between consecutive breakpoints (support points and 0).
pub fn two_tail_choquet(cs: &CredalSet, cap: Capacity) -> f64 {
    let mut pts: Vec<f64> = cs.union_support().to_vec();
    pts.push(0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let level = |t: f64| -> f64 {
        let probs = cs.priors().iter().map(|p| p.atoms().iter().filter(|a| a.0 >= t).map(|a| a.1).sum::<f64>());
        match cap {
            Capacity::Upper => probs.fold(0.0, f64::max),
            Capacity::Lower => probs.fold(1.0, f64::min),
        }
    };
    let mut total = 0.0;
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if mid > 0.0 {
            total += (w[1] - w[0]) * level(mid);
        } else {
            total += (w[1] - w[0]) * (level(mid) - 1.0);
        }
    }
    total
}

/// Ten functional shapes of `S_n`, centred at `c`.
pub fn shape(k: usize, c: f64) -> impl Fn(f64) -> f64 + Sync {
    move |s: f64| match k % 10 {
        0 => s,
        1 => -s * s,
        2 => f64::from(u8::from((s - c).abs() < 0.6)),
        3 => f64::from(u8::from(s >= c)),
        4 => (0.3 * s).exp(),
        5 => (1.7 * s).sin(),
        6 => (s - c).abs(),
        7 => (s - c).max(0.0),
        8 => (s - c).powi(3),
        _ => 1.0 / (1.0 + (s - c) * (s - c)),
    }
}
