//! Statistical acceptance of the simulator against closed forms and exact
//! values. Seeds are pinned, so every check is deterministic; tolerances are
//! 3 batch-means standard errors unless noted.

use jacksonnet::analytics::mm1_busy_corr;
use jacksonnet::network::NetworkSpec;
use jacksonnet::sim::{run, SimConfig};

fn single_queue(mu: f64, rho: f64) -> NetworkSpec {
    NetworkSpec::from_rho(vec![mu], vec![0.0], vec![rho]).unwrap()
}

fn two_queue_family(p: f64) -> NetworkSpec {
    NetworkSpec::from_rho(vec![0.3, 0.2], vec![0.0, p, 2.0 * p, 0.0], vec![0.3, 0.7]).unwrap()
}

#[test]
fn independent_queues_decorrelate() {
    let spec = NetworkSpec::from_rho(vec![1.0, 2.0], vec![0.0; 4], vec![0.4, 0.6]).unwrap();
    let cfg = SimConfig {
        spec,
        duration: 42_000.0,
        warmup: 2_000.0,
        seed: 1101,
        subrun_length: 2_000.0,
        omegas: vec![0.5, 2.0],
        pairs: vec![(0, 1), (1, 0)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    for pair in [(0, 1), (1, 0)] {
        let curve = out.curve(pair.0, pair.1).unwrap();
        let stderrs = curve.stderr.as_ref().unwrap();
        for (w, &omega) in curve.omegas.iter().enumerate() {
            let expected = 0.4 * 0.6 / omega;
            let z = (curve.values[w] - expected) / stderrs[w];
            assert!(
                z.abs() <= 3.0,
                "pair {pair:?} omega {omega}: value {} expected {expected} (z = {z:.2})",
                curve.values[w]
            );
        }
    }
}

#[test]
fn single_queue_matches_closed_form_curve() {
    let cfg = SimConfig {
        spec: single_queue(1.0, 0.5),
        duration: 42_000.0,
        warmup: 2_000.0,
        seed: 7,
        subrun_length: 2_000.0,
        omegas: vec![0.5, 2.0],
        pairs: vec![(0, 0)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    let curve = out.curve(0, 0).unwrap();
    let stderrs = curve.stderr.as_ref().unwrap();
    for (w, &omega) in curve.omegas.iter().enumerate() {
        let expected = mm1_busy_corr(1.0, 0.5, omega).unwrap();
        let z = (curve.values[w] - expected) / stderrs[w];
        assert!(z.abs() <= 3.0, "omega {omega}: z = {z:.2}");
    }
}

#[test]
fn busy_fractions_converge_to_utilizations() {
    let cfg = SimConfig {
        spec: two_queue_family(0.1),
        duration: 52_000.0,
        warmup: 2_000.0,
        seed: 31,
        subrun_length: 5_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 1)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    for (q, &rho) in [0.3, 0.7].iter().enumerate() {
        let est = out.busy_fraction[q];
        let z = (est.mean - rho) / est.stderr;
        assert!(z.abs() <= 3.0, "queue {q}: busy {} vs rho {rho} (z = {z:.2})", est.mean);
    }
}

#[test]
fn flow_balance_per_queue() {
    // Admitted arrival rate equals departure rate within batch-means error.
    let cfg = SimConfig {
        spec: two_queue_family(0.3),
        duration: 52_000.0,
        warmup: 2_000.0,
        seed: 57,
        subrun_length: 5_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 1)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    for q in 0..2 {
        let diffs: Vec<f64> = out
            .flow_subruns
            .iter()
            .map(|per_queue| {
                let (a, d) = per_queue[q];
                (a as f64 - d as f64) / cfg.subrun_length
            })
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        assert!(
            mean.abs() <= 3.0 * stderr.max(1e-12),
            "queue {q}: rate gap {mean:e} vs stderr {stderr:e}"
        );
    }
}

#[test]
fn occupancy_marginals_are_geometric() {
    let cfg = SimConfig {
        spec: two_queue_family(0.1),
        duration: 102_000.0,
        warmup: 2_000.0,
        seed: 1009,
        subrun_length: 10_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 1)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    for (q, &rho) in [0.3, 0.7].iter().enumerate() {
        let tv = out.occupancy_tv_vs_geometric(q, 20, rho);
        assert!(
            tv.mean <= 3.0 * tv.stderr,
            "queue {q}: TV {} vs bootstrap stderr {}",
            tv.mean,
            tv.stderr
        );
    }
}

#[test]
fn busy_periods_isolated_queue() {
    let cfg = SimConfig {
        spec: single_queue(1.0, 0.5),
        duration: 22_000.0,
        warmup: 2_000.0,
        seed: 4242,
        subrun_length: 2_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 0)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    let stats = out.busy_period_stats(0).unwrap();
    assert!(stats.count >= 100);
    let z = (stats.mean - 2.0) / stats.stderr;
    assert!(z.abs() <= 3.0, "mean busy period {} (z = {z:.2})", stats.mean);

    // Near-zero load: a busy period is a single service, mean 1/mu.
    let cfg = SimConfig {
        spec: single_queue(2.0, 0.02),
        duration: 52_000.0,
        warmup: 2_000.0,
        seed: 4243,
        subrun_length: 5_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 0)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    let stats = out.busy_period_stats(0).unwrap();
    let z = (stats.mean - 0.5) / stats.stderr;
    assert!(z.abs() <= 3.0, "low-load busy period {} (z = {z:.2})", stats.mean);
}

#[test]
fn busy_period_invariance_in_coupled_network() {
    // Queue 1 embedded in the coupled network keeps the isolated-queue mean
    // busy period 1/(mu_1 (1 - rho_1)).
    let cfg = SimConfig {
        spec: two_queue_family(0.3),
        duration: 102_000.0,
        warmup: 2_000.0,
        seed: 90210,
        subrun_length: 10_000.0,
        omegas: vec![1.0],
        pairs: vec![(0, 1)],
        workers: 0,
    };
    let out = run(&cfg).unwrap();
    let stats = out.busy_period_stats(0).unwrap();
    let expected = 1.0 / (0.3 * 0.7);
    let z = (stats.mean - expected) / stats.stderr;
    assert!(
        z.abs() <= 3.0,
        "coupled busy period {} vs {expected} (z = {z:.2})",
        stats.mean
    );
}

#[test]
fn too_few_periods_is_reported() {
    // lambda = 0.01 completes only ~10 periods in 1000 time units.
    let cfg = SimConfig {
        spec: single_queue(1.0, 0.01),
        duration: 1_100.0,
        warmup: 100.0,
        seed: 5,
        subrun_length: 100.0,
        omegas: vec![1.0],
        pairs: vec![(0, 0)],
        workers: 1,
    };
    let out = run(&cfg).unwrap();
    assert!(matches!(
        out.busy_period_stats(0),
        Err(jacksonnet::sim::SimError::TooFewPeriods { queue: 0, .. })
    ));
}

#[test]
fn identical_seeds_are_bit_identical_across_worker_counts() {
    let mk = |workers: usize| SimConfig {
        spec: two_queue_family(0.1),
        duration: 12_000.0,
        warmup: 1_000.0,
        seed: 777,
        subrun_length: 1_000.0,
        omegas: vec![0.1, 1.0],
        pairs: vec![(0, 1), (1, 0), (0, 0)],
        workers,
    };
    let a = run(&mk(1)).unwrap();
    let b = run(&mk(4)).unwrap();
    let c = run(&mk(0)).unwrap();
    for ((ca, cb), cc) in a.curves.iter().zip(&b.curves).zip(&c.curves) {
        for w in 0..ca.values.len() {
            assert_eq!(ca.values[w].to_bits(), cb.values[w].to_bits());
            assert_eq!(ca.values[w].to_bits(), cc.values[w].to_bits());
            let (ea, eb) = (
                ca.stderr.as_ref().unwrap()[w],
                cb.stderr.as_ref().unwrap()[w],
            );
            assert_eq!(ea.to_bits(), eb.to_bits());
        }
    }
    assert_eq!(a.events, b.events);

    let mut different_seed = mk(1);
    different_seed.seed = 778;
    let d = run(&different_seed).unwrap();
    assert_ne!(
        a.curves[0].values[0].to_bits(),
        d.curves[0].values[0].to_bits(),
        "different seeds must differ"
    );
}
