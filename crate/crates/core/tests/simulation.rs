use rand::Rng;

use stopping_lab::bound::{ThresholdSchedule, PAPER_C1, PAPER_C2, PAPER_C3};
use stopping_lab::model::RandomnessSpec;
use stopping_lab::sim::{
    run_monte_carlo, superstar_level, top_pair_collision_estimate, DiscreteTable, EstimateReport,
    InstanceDistribution, SimPolicy,
};
use stopping_lab::stats::wilson_interval;

fn block_rank() -> SimPolicy {
    SimPolicy::BlockRank { schedule: ThresholdSchedule::paper(PAPER_C1, PAPER_C2, PAPER_C3).unwrap() }
}

#[test]
fn identical_config_identical_report_across_pool_sizes() {
    let dist = InstanceDistribution::IidUniform { n: 30 };
    let spec = RandomnessSpec::new(42, 0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_monte_carlo(&block_rank(), &dist, 20_000, spec).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(1));
    assert_eq!(a.csv_row(), run(2).csv_row());
}

#[test]
fn wilson_coverage_on_known_streams() {
    for &(p, len) in &[(0.3, 200u64), (0.05, 500), (0.5, 50)] {
        let mut covered = 0;
        for meta in 0..1000 {
            let mut rng = RandomnessSpec::new(7, 1).trial_rng(meta);
            let s = (0..len).filter(|_| rng.gen::<f64>() < p).count() as u64;
            let (lo, hi) = wilson_interval(s, len);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 930, "p={p}: {covered}/1000");
    }
}

#[test]
fn single_trial_report_is_valid() {
    let r = run_monte_carlo(&block_rank(), &InstanceDistribution::IidUniform { n: 5 }, 1, RandomnessSpec::new(1, 1))
        .unwrap();
    assert!(r.estimate == 0.0 || r.estimate == 1.0);
    assert!(r.wilson95.0 <= r.estimate && r.estimate <= r.wilson95.1);
    assert!(run_monte_carlo(&block_rank(), &InstanceDistribution::IidUniform { n: 5 }, 0, RandomnessSpec::new(1, 1))
        .is_err());
}

fn z_gap(hi: &EstimateReport, lo: &EstimateReport) -> f64 {
    (lo.estimate - hi.estimate) / (hi.sigma().powi(2) + lo.sigma().powi(2)).sqrt()
}

#[test]
fn block_rank_success_does_not_grow_with_n() {
    let reports: Vec<EstimateReport> = [10, 50, 200, 500]
        .iter()
        .map(|&n| {
            run_monte_carlo(&block_rank(), &InstanceDistribution::IidUniform { n }, 100_000, RandomnessSpec::new(9, n as u32))
                .unwrap()
        })
        .collect();
    for w in reports.windows(2) {
        assert!(z_gap(&w[0], &w[1]) < 3.0, "n={} {} -> n={} {}", w[0].n, w[0].estimate, w[1].n, w[1].estimate);
    }
    assert!(reports.iter().all(|r| r.invariant_violations == Some(0)));
}

#[test]
fn adversarial_heuristic_on_hard_instances_reaches_a_quarter() {
    let n = 200;
    let p = (n as f64).powf(-2.0 / 3.0);
    let dist = InstanceDistribution::BernoulliHard { p: vec![p; n] };
    let r = run_monte_carlo(&SimPolicy::AdversarialThreshold, &dist, 50_000, RandomnessSpec::new(4, 4)).unwrap();
    assert!(r.estimate >= 0.25 - 3.0 * r.sigma(), "{}", r.estimate);
    assert_eq!(r.invariant_violations, None);
}

#[test]
fn superstar_levels() {
    let spec = RandomnessSpec::new(2, 2);
    let iid = superstar_level(&InstanceDistribution::IidUniform { n: 20 }, 40_000, spec).unwrap();
    assert!((iid - 0.05).abs() < 0.01, "{iid}");
    let mut scales = vec![1.0; 10];
    scales[3] = 1e6;
    let dominant = superstar_level(&InstanceDistribution::ScaledExp { scales }, 5_000, spec).unwrap();
    assert!(dominant > 0.99);
    assert_eq!(superstar_level(&InstanceDistribution::IidUniform { n: 1 }, 100, spec).unwrap(), 1.0);
}

#[test]
fn collision_bound_holds_for_every_family() {
    let tables: Vec<DiscreteTable> = (0..40)
        .map(|i| DiscreteTable {
            values: vec![0.0, 1.0 + i as f64, 100.0 + i as f64],
            probs: vec![0.5, 0.45, 0.05],
        })
        .collect();
    let families = [
        InstanceDistribution::IidUniform { n: 60 },
        InstanceDistribution::ScaledExp { scales: (0..60).map(|i| 1.0 + 0.01 * i as f64).collect() },
        InstanceDistribution::BernoulliHard { p: vec![0.05; 60] },
        InstanceDistribution::File { tables },
    ];
    for (f, dist) in families.iter().enumerate() {
        for k in [2, 3, 4] {
            let r = top_pair_collision_estimate(dist, k, 20_000, RandomnessSpec::new(31, (10 * f + k) as u32)).unwrap();
            assert!(r.within_bound(), "{} k={k}: {} vs {}", dist.family(), r.collision.estimate, r.bound);
        }
    }
}

#[test]
fn single_card_always_collides() {
    let r = top_pair_collision_estimate(&InstanceDistribution::IidUniform { n: 1 }, 2, 100, RandomnessSpec::new(0, 0))
        .unwrap();
    assert_eq!(r.collision.estimate, 1.0);
    assert_eq!(r.epsilon, 1.0);
}

#[test]
fn discrete_tables_from_file() {
    let dir = std::env::temp_dir().join(format!("stopping-lab-tables-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tables.json");
    std::fs::write(&path, r#"{"cards": [{"values": [1, 2], "probs": [0.5, 0.5]}, {"values": [1, 2], "probs": [0.5, 0.5]}]}"#)
        .unwrap();
    let dist = InstanceDistribution::from_table_file(&path).unwrap();
    assert_eq!(dist.n(), 2);
    // ties between identical tables are broken, so every sample validates
    let mut rng = RandomnessSpec::new(1, 0).trial_rng(0);
    for _ in 0..100 {
        dist.sample(&mut rng).unwrap();
    }
    std::fs::write(&path, r#"{"cards": [{"values": [1], "probs": [0.4]}]}"#).unwrap();
    assert!(InstanceDistribution::from_table_file(&path).is_err());
    std::fs::remove_dir_all(&dir).ok();
}
