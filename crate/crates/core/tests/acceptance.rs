//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;

use stopping_lab::bound::{
    gamma, optimal_schedule, paper_bound, solve_optimal_threshold, truncated_gamma, ThresholdSchedule, PAPER_C1,
    PAPER_C2, PAPER_C3,
};
use stopping_lab::last_success::{
    conditioned_s_distribution, monotone_rule_success, simulate_last_success, success_upper_bound, AcceptSet,
    LastSuccessInstance,
};
use stopping_lab::model::{GoogolInstance, RandomnessSpec};
use stopping_lab::policies::adversarial_exact_success;
use stopping_lab::rank::{
    brute_force_rank_beat_prob, exact_rank_beat_prob, fmt_rational, p_value, rational, second_order_terms,
    verify_pair_position_independence, verify_rank_dominance, verify_second_order_inequality, PairStructure,
    RankQuery,
};
use stopping_lab::sim::{run_monte_carlo, top_pair_collision_estimate, InstanceDistribution, SimPolicy};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let fast = elapsed < limit;
    outcome(
        o.pass && fast,
        format!("{}; {:.2}s (limit {}s)", o.detail, elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn timed<F: FnOnce() -> Outcome>(limit_secs: Option<u64>, f: F) -> Outcome {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    match limit_secs {
        Some(s) => within_time(o, elapsed, Duration::from_secs(s)),
        None => outcome(o.pass, format!("{}; {:.2}s", o.detail, elapsed.as_secs_f64())),
    }
}

fn c1_gamma_benchmark() -> Outcome {
    let g = gamma(60);
    outcome(
        (0.5014..=0.5034).contains(&g.value),
        format!("gamma(60) = {:.7}, tail bound {:.4}", g.value, g.tail_bound),
    )
}

fn c2_lower_bound_chain() -> Outcome {
    let b = match paper_bound(PAPER_C1, PAPER_C2, PAPER_C3) {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("paper_bound failed: {e}")),
    };
    let expected = [0.0621, 0.0809, 0.1073, 0.2504];
    let close = b.blocks.len() == 4 && b.blocks.iter().zip(expected).all(|(got, want)| (got - want).abs() <= 5e-4);
    let tail_ok = (b.tail - 0.2504).abs() <= 5e-4;
    outcome(
        close && tail_ok && b.total >= 0.5007,
        format!(
            "blocks [{:.7}, {:.7}, {:.7}], tail {:.7}, total {:.7}",
            b.blocks[0], b.blocks[1], b.blocks[2], b.tail, b.total
        ),
    )
}

fn c3_threshold_solver() -> Outcome {
    let root0 = solve_optimal_threshold(0);
    let err0 = (root0 - (1.0 - (-1.0f64).exp())).abs();
    let roots: Vec<f64> = (0..=30).map(solve_optimal_threshold).collect();
    let roots_decreasing = roots.windows(2).all(|w| w[1] < w[0]);
    let c = optimal_schedule(30);
    // c_0 is clipped at 1, so strictness starts at c_1
    let c_decreasing = c.thresholds()[1..].windows(2).all(|w| w[1] < w[0]) && c.c(1) < c.c(0);
    let worst = (5..=30).map(|j| j as f64 * c.c(j)).fold(0.0, f64::max);
    outcome(
        err0 <= 1e-9 && roots_decreasing && c_decreasing && worst <= 3.0,
        format!("|root_0 - (1 - 1/e)| = {err0:.2e}, max j*c_j over 5..=30 = {worst:.4}"),
    )
}

fn c4_rank_dominance() -> Outcome {
    let dom = verify_rank_dominance(11);
    let pos = verify_pair_position_independence(10);
    outcome(
        dom.passed() && pos.passed(),
        format!(
            "dominance {} checks / {} failures, position independence {} checks / {} failures",
            dom.checks,
            dom.failures.len(),
            pos.checks,
            pos.failures.len()
        ),
    )
}

fn c5_second_order() -> Outcome {
    let report = verify_second_order_inequality();
    let one_pair = PairStructure::new(4, vec![(1, 2)]).expect("valid pairing");
    let terms = second_order_terms(&one_pair);
    let x2_y3 = terms.x2_y3 == rational(12, 16);
    let p23 = p_value(RankQuery::new(2, 3).unwrap()) == rational(11, 16);
    let p14 = p_value(RankQuery::new(1, 4).unwrap()) == rational(15, 16);
    outcome(
        report.passed() && report.checks == 10 && x2_y3 && p23 && p14,
        format!(
            "{} pairings, {} failures; Pr[X^2>Y^3] = {}, p(2,3) = {}, p(1,4) = {}",
            report.checks,
            report.failures.len(),
            fmt_rational(&terms.x2_y3),
            fmt_rational(&p_value(RankQuery::new(2, 3).unwrap())),
            fmt_rational(&p_value(RankQuery::new(1, 4).unwrap()))
        ),
    )
}

fn random_instance<R: Rng>(rng: &mut R, n: usize) -> GoogolInstance {
    let mut values: Vec<f64> = (1..=2 * n).map(|v| v as f64).collect();
    values.shuffle(rng);
    GoogolInstance::new(values.chunks(2).map(|c| (c[0], c[1])).collect()).expect("distinct values")
}

fn c6_oracle_equivalence() -> Outcome {
    let mut rng = RandomnessSpec::new(SEED, 6).trial_rng(0);
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let inst = random_instance(&mut rng, n);
        let i = rng.gen_range(1..=n);
        let j = rng.gen_range(1..=n);
        let q = RankQuery::new(i, j).unwrap();
        let exact = exact_rank_beat_prob(q, &PairStructure::of_instance(&inst, q.window()));
        let brute = brute_force_rank_beat_prob(&inst, q);
        checked += 1;
        match (exact, brute) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => mismatches += 1,
        }
    }
    outcome(mismatches == 0, format!("{checked} instances, {mismatches} mismatches"))
}

fn c7_block_rank_monte_carlo() -> Outcome {
    let schedule = ThresholdSchedule::paper(PAPER_C1, PAPER_C2, PAPER_C3).expect("valid schedule");
    let report = run_monte_carlo(
        &SimPolicy::BlockRank { schedule },
        &InstanceDistribution::IidUniform { n: 500 },
        1_000_000,
        RandomnessSpec::new(SEED, 7),
    );
    match report {
        Ok(r) => {
            let violations = r.invariant_violations.unwrap_or(u64::MAX);
            outcome(
                r.estimate >= 0.498 && violations == 0,
                format!(
                    "success {:.5} (95% CI [{:.5}, {:.5}]), invariant violations {}",
                    r.estimate, r.wilson95.0, r.wilson95.1, violations
                ),
            )
        }
        Err(e) => outcome(false, format!("simulation failed: {e}")),
    }
}

fn c8_adversarial_exact() -> Outcome {
    let different = GoogolInstance::new(vec![(10.0, 5.0), (9.0, 1.0)]).unwrap();
    let same = GoogolInstance::new(vec![(10.0, 9.0), (5.0, 1.0)]).unwrap();
    let quarter = rational(1, 4);
    let a = adversarial_exact_success(&different).ok();
    let b = adversarial_exact_success(&same).ok();
    let cases_ok = a.as_ref() == Some(&quarter) && b.as_ref() == Some(&rational(1, 2));
    let mut rng = RandomnessSpec::new(SEED, 8).trial_rng(0);
    let mut worst = rational(1, 1);
    let mut below = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let mut values: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.len() < 2 * n {
            below += 1;
            continue;
        }
        values.shuffle(&mut rng);
        let inst = GoogolInstance::new(values.chunks(2).map(|c| (c[0], c[1])).collect()).unwrap();
        match adversarial_exact_success(&inst) {
            Ok(v) => {
                if v < quarter {
                    below += 1;
                }
                if v < worst {
                    worst = v;
                }
            }
            Err(_) => below += 1,
        }
    }
    let show = |r: Option<stopping_lab::rank::Rational>| r.map(|r| fmt_rational(&r)).unwrap_or_else(|| "error".into());
    outcome(
        cases_ok && below == 0 && !worst.is_zero(),
        format!(
            "different cards {}, same card {}; 100 random instances, min {}, {} below 1/4",
            show(a),
            show(b),
            fmt_rational(&worst),
            below
        ),
    )
}

fn last_success_parts(n: usize) -> stopping_lab::Result<(f64, f64, AcceptSet, f64)> {
    let p = (n as f64).powf(-2.0 / 3.0);
    let s = conditioned_s_distribution(n, p)?;
    let rule = AcceptSet::optimal(&s)?;
    let value = monotone_rule_success(&rule, &s)?;
    Ok((value, success_upper_bound(&s), rule, p))
}

fn c9_last_success() -> Outcome {
    let n = 10_000;
    let (value, bound, rule, p) = match last_success_parts(n) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("exact evaluation failed: {e}")),
    };
    let inst = LastSuccessInstance::uniform(n, p).expect("p in (0, 1)");
    let est = simulate_last_success(|st| rule.contains(st), &inst, 100_000, RandomnessSpec::new(SEED, 9));
    let agrees = est.ci.0 <= value && value <= est.ci.1;
    let bounds: Vec<f64> = [100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&m| last_success_parts(m).map(|t| t.1).unwrap_or(f64::NAN))
        .collect();
    let decreasing = bounds.windows(2).all(|w| w[1] < w[0]) && bounds.iter().all(|&b| b > 0.25);
    outcome(
        rule.is_monotone() && value <= bound && agrees && decreasing,
        format!(
            "n = 10^4: exact {:.5} <= bound {:.5}, simulated {:.5} CI [{:.5}, {:.5}]; bounds over 10^2..10^5: {}",
            value,
            bound,
            est.estimate,
            est.ci.0,
            est.ci.1,
            bounds.iter().map(|b| format!("{b:.5}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c10_no_superstars() -> Outcome {
    let dist = InstanceDistribution::IidUniform { n: 100 };
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [2, 3, 4] {
        match top_pair_collision_estimate(&dist, k, 200_000, RandomnessSpec::new(SEED, 10 + k as u32)) {
            Ok(r) => {
                pass &= r.within_bound();
                parts.push(format!("k={k}: {:.5} vs {:.5} (eps {:.5})", r.collision.estimate, r.bound, r.epsilon));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("k={k}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn c11_truncated_gamma() -> Outcome {
    let g = gamma(60);
    let upper = g.value + g.tail_bound;
    let values: Vec<f64> = (0..=40).map(truncated_gamma).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let schedule = optimal_schedule(40);
    let mut pass = monotone;
    let mut parts = Vec::new();
    for k in [5, 10, 20, 40] {
        let gap = upper - values[k];
        let allowed = 2.0 * schedule.c(k);
        pass &= gap <= allowed;
        parts.push(format!("k={k}: gap {gap:.5} <= {allowed:.5}"));
    }
    outcome(pass, format!("gamma_k non-decreasing over 0..=40: {monotone}; {}", parts.join(", ")))
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 gamma benchmark", Some(10), c1_gamma_benchmark),
        ("2 lower-bound chain", Some(5), c2_lower_bound_chain),
        ("3 threshold solver", None, c3_threshold_solver),
        ("4 rank dominance, exhaustive", Some(60), c4_rank_dominance),
        ("5 second-order inequality, exhaustive", None, c5_second_order),
        ("6 oracle equivalence", None, c6_oracle_equivalence),
        ("7 block-rank Monte Carlo", None, c7_block_rank_monte_carlo),
        ("8 adversarial exactness", None, c8_adversarial_exact),
        ("9 last-success", None, c9_last_success),
        ("10 no-superstars", None, c10_no_superstars),
        ("11 truncated gamma", None, c11_truncated_gamma),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(limit, f);
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
