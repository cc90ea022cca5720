//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use pexp4_core::experiment::{run_experiment, ExperimentOptions, RunSummary};
use pexp4_core::netsim::{distance_pct, optimal_min_rate, run_simulation};
use pexp4_core::partitions::{PartitionFunction, PartitionSet};
use pexp4_core::policies::{
    constant_partition_set, optimal_random_distribution, sample_arm, Exp3, Learner, PeriodicExp4,
    PolicyConfig, PolicyKind, ReferenceExp4, Variant,
};
use pexp4_core::regret::{generalized_periodic_opt, RewardMatrix};
use pexp4_core::scenario::{AvailabilityMode, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() {
    let checks: &[(&str, Check)] = &[
        ("oracle equivalence", oracle_equivalence),
        ("exp3 reduction", exp3_reduction),
        ("aggregate consistency", aggregate_consistency),
        ("alternating toy separation", alternating_toy),
        ("max-min oracle exactness", maxmin_exactness),
        ("optimal random and distance values", optimal_random_values),
        ("learning curve on discrete", learning_curve),
        ("fairness trend on discrete", fairness_trend),
        ("regret ceiling", regret_ceiling),
        ("mobility convergence", mobility_convergence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{:>2}] {name}: {} ({:.1}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Random labels over `horizon` steps using at most `max_labels` labels.
fn random_partition(rng: &mut ChaCha8Rng, horizon: usize, max_labels: u32) -> PartitionFunction {
    let p = rng.random_range(1..=max_labels);
    let labels: Vec<u32> = (0..horizon).map(|_| rng.random_range(0..p)).collect();
    PartitionFunction::from_labels(&labels).unwrap()
}

fn random_rewards(rng: &mut ChaCha8Rng, k: usize, horizon: usize) -> Vec<Vec<f64>> {
    (0..horizon)
        .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut experts = 0;
    for trace in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trace);
        let k = rng.random_range(1..=3);
        let horizon = 20;
        let nf = rng.random_range(1..=3);
        let fs = Arc::new(
            PartitionSet::new(
                (0..nf)
                    .map(|_| random_partition(&mut rng, horizon, 3))
                    .collect(),
            )
            .unwrap(),
        );
        let config = PolicyConfig::new(k).with_variant(Variant::Corrected);
        let mut fast = PeriodicExp4::new(Arc::clone(&fs), config.clone()).unwrap();
        let mut slow = ReferenceExp4::new(Arc::clone(&fs), config).unwrap();
        experts = experts.max(slow.num_experts());
        let rewards = random_rewards(&mut rng, k, horizon);
        for x in rewards {
            let a = fast.distribution().unwrap();
            let b = slow.distribution().unwrap();
            worst = worst.max(max_abs_diff(&a.probs, &b.probs));
            let arm = sample_arm(&a, &mut rng);
            fast.update(arm, x[arm]).unwrap();
            slow.update(arm, x[arm]).unwrap();
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max deviation {worst:.2e} over 50 traces, up to {experts} experts, {elapsed:.2?}"),
    )
}

fn exp3_reduction() -> Outcome {
    let mut worst = 0.0f64;
    for trace in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + trace);
        let k = rng.random_range(2..=5);
        let horizon = 200;
        let fs = Arc::new(constant_partition_set(horizon).unwrap());
        let config = PolicyConfig::new(k);
        let mut pe4 = PeriodicExp4::new(fs, config.clone()).unwrap();
        let mut exp3 = Exp3::new(config).unwrap();
        for x in random_rewards(&mut rng, k, horizon) {
            let a = pe4.distribution().unwrap();
            let b = exp3.distribution().unwrap();
            worst = worst.max(max_abs_diff(&a.probs, &b.probs));
            let arm = sample_arm(&a, &mut rng);
            pe4.update(arm, x[arm]).unwrap();
            exp3.update(arm, x[arm]).unwrap();
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 20 traces of 200 steps"),
    )
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn aggregate_consistency() -> Outcome {
    // maintained aggregates after 10^4 updates
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let horizon = 10_000;
    let k = 4;
    let fs = Arc::new(
        PartitionSet::new(
            (0..4)
                .map(|_| random_partition(&mut rng, horizon, 12))
                .collect(),
        )
        .unwrap(),
    );
    let mut pe4 = PeriodicExp4::new(fs, PolicyConfig::new(k)).unwrap();
    for x in random_rewards(&mut rng, k, horizon) {
        let d = pe4.distribution().unwrap();
        let arm = sample_arm(&d, &mut rng);
        pe4.update(arm, x[arm]).unwrap();
    }
    let (log_s, log_b) = pe4.recomputed_aggregates();
    let mut agg_gap = 0.0f64;
    for (fresh, kept) in log_s.iter().zip(pe4.log_label_sums()) {
        for (a, b) in fresh.iter().zip(kept) {
            agg_gap = agg_gap.max(relative_gap(*a, *b));
        }
    }
    for (a, b) in log_b.iter().zip(pe4.log_products()) {
        agg_gap = agg_gap.max(relative_gap(*a, *b));
    }

    // naive against optimized scores at every step
    let mut score_gap = 0.0f64;
    for trace in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3100 + trace);
        let k = rng.random_range(2..=4);
        let horizon = 300;
        let nf = rng.random_range(1..=4);
        let fs = Arc::new(
            PartitionSet::new(
                (0..nf)
                    .map(|_| random_partition(&mut rng, horizon, 6))
                    .collect(),
            )
            .unwrap(),
        );
        let variant = if trace % 2 == 0 {
            Variant::AsWritten
        } else {
            Variant::Corrected
        };
        let mut pe4 = PeriodicExp4::new(fs, PolicyConfig::new(k).with_variant(variant)).unwrap();
        for x in random_rewards(&mut rng, k, horizon) {
            let fast = pe4.scores().unwrap();
            let naive = pe4.naive_scores().unwrap();
            for (a, b) in fast.iter().zip(&naive) {
                score_gap = score_gap.max(relative_gap(*a, *b));
            }
            let d = pe4.distribution().unwrap();
            let arm = sample_arm(&d, &mut rng);
            pe4.update(arm, x[arm]).unwrap();
        }
    }
    outcome(
        agg_gap <= 1e-9 && score_gap <= 1e-9,
        format!(
            "aggregate drift {agg_gap:.2e} after 10^4 updates, naive vs optimized {score_gap:.2e}"
        ),
    )
}

/// Mean reward over the last `tail` steps, averaged over seeds.
fn toy_tail_reward(kind: PolicyKind, seeds: usize, tail: usize) -> f64 {
    let mut s = Scenario::builtin("alternating_toy").unwrap();
    s.policy.kind = kind;
    let compiled = s.compile().unwrap();
    let mut total = 0.0;
    for i in 0..seeds {
        let out = run_simulation(&compiled, 500 + i as u64, false).unwrap();
        let r = &out.realized_rewards[0];
        total += r[r.len() - tail..].iter().sum::<f64>() / tail as f64;
    }
    total / seeds as f64
}

fn alternating_toy() -> Outcome {
    let start = Instant::now();
    let pe4 = toy_tail_reward(PolicyKind::PeriodicExp4, 20, 1000);
    let exp3 = toy_tail_reward(PolicyKind::Exp3, 20, 1000);
    let elapsed = start.elapsed();
    outcome(
        pe4 >= 0.9 && exp3 <= 0.6 && elapsed < Duration::from_secs(30),
        format!("final-1000 mean reward periodic_exp4 {pe4:.3}, exp3 {exp3:.3}, {elapsed:.2?}"),
    )
}

/// Best minimum rate over every assignment of devices to reachable networks.
fn enumerate_min_rate(bandwidths: &[f64], masks: &[Vec<bool>]) -> f64 {
    let k = bandwidths.len();
    let mut best = 0.0f64;
    let mut choice = vec![0usize; masks.len()];
    loop {
        if choice.iter().enumerate().all(|(d, &j)| masks[d][j]) {
            let mut counts = vec![0usize; k];
            choice.iter().for_each(|&j| counts[j] += 1);
            let min = choice
                .iter()
                .map(|&j| bandwidths[j] / counts[j] as f64)
                .fold(f64::INFINITY, f64::min);
            best = best.max(min);
        }
        let mut d = 0;
        loop {
            if d == choice.len() {
                return best;
            }
            choice[d] += 1;
            if choice[d] < k {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
    }
}

fn maxmin_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let k = rng.random_range(1..=4);
        let bandwidths: Vec<f64> = (0..k).map(|_| rng.random_range(0..=20) as f64).collect();
        let masks: Vec<Vec<bool>> = (0..n)
            .map(|_| {
                let mut m: Vec<bool> = (0..k).map(|_| rng.random_bool(0.6)).collect();
                let forced = rng.random_range(0..k);
                m[forced] = true;
                m
            })
            .collect();
        if optimal_min_rate(&bandwidths, &masks).unwrap() != enumerate_min_rate(&bandwidths, &masks)
        {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches on 200 instances"),
    )
}

fn optimal_random_values() -> Outcome {
    let probs = optimal_random_distribution(&[4.0, 10.0, 6.0], &[true; 3])
        .unwrap()
        .probs;
    let distance = distance_pct(5.0, 3.0);
    outcome(
        probs == [0.2, 0.5, 0.3] && distance == 40.0,
        format!("[4,10,6] -> {probs:?}; observed 3 vs optimal 5 -> {distance}%"),
    )
}

fn discrete_summary(kind: PolicyKind) -> RunSummary {
    let mut s = Scenario::builtin("discrete").unwrap();
    s.iterations = 20;
    s.policy.kind = kind;
    run_experiment(&s, &ExperimentOptions::new(5).with_regret(false), None).unwrap()
}

fn discrete_pair() -> &'static (RunSummary, RunSummary) {
    static PAIR: std::sync::OnceLock<(RunSummary, RunSummary)> = std::sync::OnceLock::new();
    PAIR.get_or_init(|| {
        (
            discrete_summary(PolicyKind::PeriodicExp4),
            discrete_summary(PolicyKind::Exp3),
        )
    })
}

fn learning_curve() -> Outcome {
    let start = Instant::now();
    let (pe4, exp3) = discrete_pair();
    let first = pe4.first_iteration_distance();
    let last = pe4.final_iteration_distance();
    let exp3_last = exp3.final_iteration_distance();
    let elapsed = start.elapsed();
    outcome(
        last <= 0.5 * first && last < exp3_last && elapsed < Duration::from_secs(600),
        format!(
            "periodic_exp4 distance {first:.2}% -> {last:.2}%, exp3 final {exp3_last:.2}%, {elapsed:.2?}"
        ),
    )
}

fn fairness_trend() -> Outcome {
    let (pe4, exp3) = discrete_pair();
    outcome(
        pe4.mean_fairness_std_gb < exp3.mean_fairness_std_gb,
        format!(
            "per-device cumulative GB std: periodic_exp4 {:.4}, exp3 {:.4} (median {:.3} vs {:.3})",
            pe4.mean_fairness_std_gb,
            exp3.mean_fairness_std_gb,
            pe4.cumulative_gb.median,
            exp3.cumulative_gb.median
        ),
    )
}

fn regret_ceiling() -> Outcome {
    let (k, p, nf, horizon) = (3usize, 4u32, 4usize, 4000usize);
    let mut total = 0.0;
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + inst);
        // period lengths 1..=4 cycle through labels; one of them drives the rewards
        let fs: Vec<PartitionFunction> = (1..=nf)
            .map(|tau| {
                let labels: Vec<u32> = (0..horizon).map(|t| (t % tau) as u32).collect();
                PartitionFunction::from_labels(&labels).unwrap()
            })
            .collect();
        let fs = Arc::new(PartitionSet::new(fs).unwrap());
        let driver = rng.random_range(0..nf);
        let best: Vec<usize> = (0..p).map(|_| rng.random_range(0..k)).collect();
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|arm| {
                (0..horizon)
                    .map(|t| {
                        let label = fs.functions()[driver].label(t);
                        let mean = if best[label] == arm { 0.7 } else { 0.4 };
                        (mean + rng.random_range(-0.3..0.3f64)).clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect();
        let rm = RewardMatrix::from_rows(rows).unwrap();
        let mut pe4 = PeriodicExp4::new(Arc::clone(&fs), PolicyConfig::new(k)).unwrap();
        let mut alg = 0.0;
        for t in 0..horizon {
            let d = pe4.distribution().unwrap();
            let arm = sample_arm(&d, &mut rng);
            let x = rm.get(arm, t);
            alg += x;
            pe4.update(arm, x).unwrap();
        }
        let (_, opt) = generalized_periodic_opt(&fs, &rm).unwrap();
        total += opt - alg;
    }
    let mean = total / 20.0;
    let (pf, kf, tf) = (p as f64, k as f64, horizon as f64);
    let bound = 10.0 * (pf * kf * tf * kf.ln() + kf * tf * (nf as f64).ln()).sqrt();
    outcome(
        mean <= bound,
        format!("mean regret {mean:.1} vs ceiling {bound:.1}"),
    )
}

fn mobility_summary(mode: AvailabilityMode) -> RunSummary {
    let mut s = Scenario::builtin("mobility").unwrap();
    s.iterations = 10;
    for g in &mut s.devices {
        g.mode = mode;
    }
    run_experiment(&s, &ExperimentOptions::new(5).with_regret(false), None).unwrap()
}

fn mobility_convergence() -> Outcome {
    let vanilla = mobility_summary(AvailabilityMode::Vanilla);
    let aware = mobility_summary(AvailabilityMode::AvailabilityAware);
    let (v1, a1) = (
        vanilla.first_iteration_distance(),
        aware.first_iteration_distance(),
    );
    let (vn, an) = (
        vanilla.final_iteration_distance(),
        aware.final_iteration_distance(),
    );
    outcome(
        a1 < v1 && (vn - an).abs() <= 5.0,
        format!("iteration 1: vanilla {v1:.2}%, aware {a1:.2}%; final: vanilla {vn:.2}%, aware {an:.2}%"),
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let mut s = Scenario::builtin("noisy_discrete").unwrap();
    s.iterations = 2;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(
        &s,
        &ExperimentOptions::new(3).with_parallelism(1),
        Some(a.path()),
    )
    .unwrap();
    run_experiment(
        &s,
        &ExperimentOptions::new(3).with_parallelism(3),
        Some(b.path()),
    )
    .unwrap();
    let fa = read_dir_sorted(a.path());
    let fb = read_dir_sorted(b.path());
    let bytes: usize = fa.iter().map(|(_, c)| c.len()).sum();
    outcome(
        fa == fb && fa.len() == 4,
        format!(
            "{} files, {bytes} bytes identical across two runs with 1 and 3 workers",
            fa.len()
        ),
    )
}
