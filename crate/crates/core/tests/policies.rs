use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;

use stopping_lab::bound::{ThresholdSchedule, PAPER_C1, PAPER_C2, PAPER_C3};
use stopping_lab::model::{
    sample_arrival_times, sample_orientation, AdversarialOrder, GoogolInstance, RandomnessSpec,
};
use stopping_lab::policies::{
    adversarial_exact_success, adversarial_success_for_order, block_rank_monotonicity_check, block_rank_run,
    optimal_small_n_value,
};
use stopping_lab::rank::{rational, Rational};
use stopping_lab::sim::{run_trial, InstanceDistribution, SimPolicy};

fn three_block_schedule() -> ThresholdSchedule {
    ThresholdSchedule::paper(PAPER_C1, PAPER_C2, PAPER_C3).unwrap()
}

#[test]
fn success_iff_exactly_one_special_number() {
    let policy = SimPolicy::BlockRank { schedule: three_block_schedule() };
    for n in [1, 2, 3, 10, 40] {
        let dist = InstanceDistribution::IidUniform { n };
        for t in 0..3000 {
            let rec = run_trial(&policy, &dist, RandomnessSpec::new(5, n as u32), t).unwrap();
            assert_eq!(rec.success, rec.special_count == 1, "n={n} trial {t}");
        }
    }
}

#[test]
fn rejecting_the_accepted_value_moves_to_the_next_record() {
    let spec = RandomnessSpec::new(17, 0);
    let schedule = three_block_schedule();
    let mut checked = 0;
    for t in 0..10_000 {
        let mut rng = spec.trial_rng(t);
        let cards: Vec<(f64, f64)> = (0..20).map(|_| (rng.gen(), rng.gen())).collect();
        let inst = GoogolInstance::new(cards).unwrap();
        let o = sample_orientation(20, &mut rng).unwrap();
        let times = sample_arrival_times(20, &mut rng).unwrap();
        if let Some(out) = block_rank_monotonicity_check(&inst, &o, &times, &schedule).unwrap() {
            assert!(out.pass, "trial {t}: {out:?}");
            checked += 1;
        }
    }
    assert!(checked > 5_000);
}

#[test]
fn degenerate_schedule_takes_first_record_above_top_face_up() {
    let schedule = ThresholdSchedule::new(vec![1.0, 0.0]).unwrap();
    let spec = RandomnessSpec::new(3, 1);
    for t in 0..2000 {
        let mut rng = spec.trial_rng(t);
        let n = rng.gen_range(1..12);
        let cards: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let inst = GoogolInstance::new(cards).unwrap();
        let o = sample_orientation(n, &mut rng).unwrap();
        let times = sample_arrival_times(n, &mut rng).unwrap();
        let top_up = inst.face_up_sorted(&o)[0];
        let mut best_down = f64::NEG_INFINITY;
        let mut expected = None;
        for c in times.processing_order() {
            let v = inst.face_down(c, &o);
            if v > best_down && v > top_up {
                expected = Some(c);
                break;
            }
            best_down = best_down.max(v);
        }
        let trace = block_rank_run(&inst, &o, &times, &schedule).unwrap();
        assert_eq!(trace.accepted_card, expected);
    }
}

fn matchings(items: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().copied().filter(|&x| x != items[k]).collect();
        for mut m in matchings(&rest) {
            m.push((first, items[k]));
            out.push(m);
        }
    }
    out
}

fn instance(m: &[(usize, usize)]) -> GoogolInstance {
    GoogolInstance::new(m.iter().map(|&(a, b)| (a as f64, b as f64)).collect()).unwrap()
}

#[test]
fn worst_order_never_below_a_quarter() {
    let quarter = rational(1, 4);
    for n in 1..=5 {
        let values: Vec<usize> = (1..=2 * n).collect();
        for m in matchings(&values) {
            let v = adversarial_exact_success(&instance(&m)).unwrap();
            assert!(v >= quarter, "{m:?}: {v}");
        }
    }
}

fn all_orders(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in out {
            for c in (0..n).filter(|c| !p.contains(c)) {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

#[test]
fn top_two_on_one_card_gives_half_for_every_order() {
    let half = rational(1, 2);
    for n in 2..=4 {
        let top = 2 * n;
        let rest: Vec<usize> = (1..top - 1).collect();
        for m in matchings(&rest) {
            let mut m = m;
            m.push((top, top - 1));
            let inst = instance(&m);
            for order in all_orders(n) {
                let v = adversarial_success_for_order(&inst, &AdversarialOrder::new(order).unwrap()).unwrap();
                assert_eq!(v, half);
            }
        }
    }
}

#[test]
fn subset_recursion_matches_order_enumeration_on_random_instances() {
    let mut rng = RandomnessSpec::new(11, 2).trial_rng(0);
    for _ in 0..40 {
        let n = rng.gen_range(1..=6);
        let mut values: Vec<usize> = (1..=2 * n).collect();
        values.shuffle(&mut rng);
        let pairs: Vec<(usize, usize)> = values.chunks(2).map(|c| (c[0], c[1])).collect();
        let inst = instance(&pairs);
        let brute = all_orders(n)
            .into_iter()
            .map(|o| adversarial_success_for_order(&inst, &AdversarialOrder::new(o).unwrap()).unwrap())
            .min()
            .unwrap();
        assert_eq!(adversarial_exact_success(&inst).unwrap(), brute);
    }
}

#[test]
fn small_n_optimal_values() {
    let v1 = optimal_small_n_value(1).unwrap();
    assert_eq!(v1, Rational::one());
    let v2 = optimal_small_n_value(2).unwrap();
    let v3 = optimal_small_n_value(3).unwrap();
    assert!(v2 < v1 && v3 < v2, "{v2} {v3}");
    assert!(v3 > rational(1, 2));
    assert!(optimal_small_n_value(4).is_err());
}
