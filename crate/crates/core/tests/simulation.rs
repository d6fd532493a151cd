mod common;

use credal_lln::analyze::{averages_of, cluster_coverage, tail_stats, violation_rate};
use credal_lln::credal::{CredalSet, FinitePmf};
use credal_lln::rng::replicate_seed;
use credal_lln::simulate::{block_targets_policy, replay, sample_path, sample_paths, Interleave, PriorPolicy};

use common::bern_pair;

fn seeds(base: u64, r: usize) -> Vec<u64> {
    (0..r).map(|i| replicate_seed(base, i)).collect()
}

#[test]
fn constant_max_concentrates_at_upper_mean() {
    let cs = bern_pair();
    let paths = sample_paths(&cs, &PriorPolicy::ConstantMax, 10_000, &seeds(1, 200)).unwrap();
    let close = paths.iter().filter(|p| (p.xs.iter().sum::<f64>() / 1e4 - 0.7).abs() <= 0.02).count();
    assert!(close >= 190, "{close} of 200");
    assert!(paths.iter().all(|p| p.policy_trace.iter().all(|&i| i == 1)));
}

#[test]
fn constant_index_within_five_sigma() {
    let cs = CredalSet::new(vec![
        FinitePmf::new(&[-1.0, 0.0, 2.0], &[0.25, 0.5, 0.25]).unwrap(),
        FinitePmf::new(&[-1.0, 2.0], &[0.5, 0.5]).unwrap(),
    ])
    .unwrap();
    let prior = &cs.priors()[1];
    let n = 40_000;
    let bound = 5.0 * prior.variance().sqrt() / (n as f64).sqrt();
    for seed in seeds(9, 20) {
        let p = sample_path(&cs, &PriorPolicy::ConstantIndex(1), n, seed).unwrap();
        let mean = p.xs.iter().sum::<f64>() / n as f64;
        assert!((mean - prior.mean()).abs() <= bound, "seed {seed}: {mean}");
    }
}

#[test]
fn block_average_lands_near_target() {
    // with rho = 2 and a single target the final block alone averages close to it
    let cs = bern_pair();
    let policy = block_targets_policy(&cs, &[0.5], 2.0, Interleave::Deterministic).unwrap();
    let n = (1 << 14) - 1; // blocks 1, 2, 4, .., 8192 end exactly here
    let p = sample_path(&cs, &policy, n, 77).unwrap();
    let last = &p.xs[n - 8192..];
    let avg = last.iter().sum::<f64>() / last.len() as f64;
    assert!((avg - 0.5).abs() <= 0.02, "{avg}");
    let uppers = p.policy_trace[n - 8192..].iter().filter(|&&i| i == 1).count();
    assert_eq!(uppers, 4096, "deterministic interleave splits the block exactly");
}

#[test]
fn randomized_interleave_mixes_in_proportion() {
    let cs = bern_pair();
    let policy = block_targets_policy(&cs, &[0.6], 2.0, Interleave::Randomized).unwrap();
    let p = sample_path(&cs, &policy, (1 << 15) - 1, 5).unwrap();
    let frac = p.policy_trace.iter().filter(|&&i| i == 1).count() as f64 / p.len() as f64;
    assert!((frac - 0.75).abs() <= 0.02, "{frac}");
}

#[test]
fn policy_trace_replays_the_path() {
    let cs = bern_pair();
    let policy = PriorPolicy::custom(|step, sum, len| usize::from(step % 3 == 0 || sum < 0.5 * len as f64));
    let p = sample_path(&cs, &policy, 5000, 123).unwrap();
    assert_eq!(replay(&cs, &p.policy_trace, 123).unwrap(), p.xs);
}

#[test]
fn tail_of_constant_max_stays_in_band() {
    let cs = bern_pair();
    let paths = sample_paths(&cs, &PriorPolicy::ConstantMax, 20_000, &seeds(4, 100)).unwrap();
    let inside = paths
        .iter()
        .map(|p| tail_stats(p, 10_000).unwrap())
        .filter(|s| s.tail_sup <= 0.75 && s.tail_inf >= 0.65)
        .count();
    assert!(inside >= 99, "{inside}");
}

#[test]
fn singleton_never_reaches_distant_target() {
    let cs = CredalSet::new(vec![FinitePmf::bernoulli(0.5).unwrap()]).unwrap();
    let p = sample_path(&cs, &PriorPolicy::ConstantMax, 20_000, 8).unwrap();
    let r = cluster_coverage(&p, &[0.2], 1000, 0.02).unwrap();
    assert!(!r.hits[0].hit);
    assert!(r.hits[0].distance > 0.2);
}

#[test]
fn violation_rate_of_singleton_is_zero() {
    let cs = CredalSet::new(vec![FinitePmf::bernoulli(0.5).unwrap()]).unwrap();
    let paths = sample_paths(&cs, &PriorPolicy::ConstantMin, 20_000, &seeds(2, 100)).unwrap();
    assert_eq!(violation_rate(&paths, 0.5, 0.5, 0.05, 10_000).unwrap(), 0.0);
}

#[test]
fn average_stream_matches_running_mean_column() {
    let cs = bern_pair();
    let p = sample_path(&cs, &PriorPolicy::PeriodicSchedule(vec![0, 1, 1]), 1000, 3).unwrap();
    let avgs = averages_of(&p.xs).unwrap();
    let mut s = 0.0;
    for (i, x) in p.xs.iter().enumerate() {
        s += x;
        assert!((avgs[i] - s / (i + 1) as f64).abs() < 1e-15);
    }
}
