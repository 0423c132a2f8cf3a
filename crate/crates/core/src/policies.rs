//! Stopping policies for the two-sided Game of Googol.
//!
//! * Block-rank (random order): a face-down value arriving at time `t` is
//!   *special* when it beats every earlier face-down value and beats the
//!   `(j+1)`-th largest face-up value for the largest `j` with `t <= c_j`.
//!   The first special value is accepted.
//! * Max-face-up threshold (adversarial order): accept the first face-down
//!   value above the largest face-up value.

use std::collections::HashMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::bound::ThresholdSchedule;
use crate::error::{Error, Result};
use crate::model::{AdversarialOrder, ArrivalTimes, GoogolInstance, Orientation};
use crate::rank::Rational;

/// A face-down value that qualified for acceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialEvent {
    /// Position in processing order (0-based).
    pub position: usize,
    /// Arrival time, for random-order play.
    pub time: Option<f64>,
    pub card: usize,
    pub face_down_value: f64,
    /// Block index `j`; `None` when the time lies below every finite threshold
    /// of a schedule with a nonzero tail, where the rank condition is vacuous.
    pub block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub accepted_card: Option<usize>,
    /// Every qualifying event, including those after acceptance.
    pub special_events: Vec<SpecialEvent>,
    pub success: bool,
}

impl PolicyTrace {
    pub fn accepted(&self) -> Option<&SpecialEvent> {
        self.special_events.first()
    }
}

/// One arriving card as seen by the block-rank scan.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Arrival {
    pub time: f64,
    pub card: usize,
    pub face_down: f64,
}

/// Number of top face-up ranks the block-rank rule can ever consult.
pub(crate) fn needed_face_up_ranks(schedule: &ThresholdSchedule) -> usize {
    schedule.thresholds().len()
}

/// Runs block-rank over arrivals already in processing order.
/// `ys_top` holds the largest face-up values in decreasing order, at least
/// `min(n, needed_face_up_ranks)` of them. The first `forced_rejections`
/// special events are skipped.
pub(crate) fn scan_block_rank<I>(
    ys_top: &[f64],
    arrivals: I,
    schedule: &ThresholdSchedule,
    forced_rejections: usize,
) -> PolicyTrace
where
    I: IntoIterator<Item = Arrival>,
{
    let mut running_max = f64::NEG_INFINITY;
    let mut events = Vec::new();
    for (position, a) in arrivals.into_iter().enumerate() {
        let beats_running = a.face_down > running_max;
        if beats_running {
            running_max = a.face_down;
            if let Some(j) = schedule.block_of(a.time) {
                let threshold = ys_top.get(j).copied().unwrap_or(f64::NEG_INFINITY);
                if a.face_down > threshold {
                    events.push(SpecialEvent {
                        position,
                        time: Some(a.time),
                        card: a.card,
                        face_down_value: a.face_down,
                        block: (j != usize::MAX).then_some(j),
                    });
                }
            }
        }
    }
    let events: Vec<SpecialEvent> = events.into_iter().skip(forced_rejections).collect();
    let accepted = events.first();
    PolicyTrace {
        accepted_card: accepted.map(|e| e.card),
        success: accepted.is_some_and(|e| e.face_down_value == running_max),
        special_events: events,
    }
}

fn check_inputs(inst: &GoogolInstance, orientation: &Orientation, times: &ArrivalTimes) -> Result<()> {
    orientation.check(inst)?;
    if times.len() != inst.n() {
        return Err(Error::SizeMismatch { expected: inst.n(), got: times.len() });
    }
    Ok(())
}

/// Block-rank run; see the module docs.
pub fn block_rank_run(
    inst: &GoogolInstance,
    orientation: &Orientation,
    times: &ArrivalTimes,
    schedule: &ThresholdSchedule,
) -> Result<PolicyTrace> {
    block_rank_run_rejecting(inst, orientation, times, schedule, 0)
}

/// Block-rank run in which the first `forced_rejections` special values are
/// turned down.
pub fn block_rank_run_rejecting(
    inst: &GoogolInstance,
    orientation: &Orientation,
    times: &ArrivalTimes,
    schedule: &ThresholdSchedule,
    forced_rejections: usize,
) -> Result<PolicyTrace> {
    check_inputs(inst, orientation, times)?;
    let ys = inst.face_up_sorted(orientation);
    let arrivals = times.processing_order().into_iter().map(|card| Arrival {
        time: times.times[card],
        card,
        face_down: inst.face_down(card, orientation),
    });
    Ok(scan_block_rank(&ys, arrivals, schedule, forced_rejections))
}

/// Outcome of [`block_rank_monotonicity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityOutcome {
    pub rejected_card: usize,
    pub rerun_accepted: Option<usize>,
    pub expected: Option<usize>,
    pub pass: bool,
}

/// Rejects the accepted value and checks that the resumed policy accepts
/// the first later face-down value larger than it (or nothing, if none).
/// Returns `None` when the original run accepted nothing.
pub fn block_rank_monotonicity_check(
    inst: &GoogolInstance,
    orientation: &Orientation,
    times: &ArrivalTimes,
    schedule: &ThresholdSchedule,
) -> Result<Option<MonotonicityOutcome>> {
    let first = block_rank_run(inst, orientation, times, schedule)?;
    let Some(acc) = first.accepted().cloned() else {
        return Ok(None);
    };
    let rerun = block_rank_run_rejecting(inst, orientation, times, schedule, 1)?;
    let expected = times
        .processing_order()
        .into_iter()
        .skip(acc.position + 1)
        .find(|&c| inst.face_down(c, orientation) > acc.face_down_value);
    Ok(Some(MonotonicityOutcome {
        rejected_card: acc.card,
        rerun_accepted: rerun.accepted_card,
        expected,
        pass: rerun.accepted_card == expected,
    }))
}

/// An adversarial-order game: the order is fixed before the coin flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialGame {
    pub instance: GoogolInstance,
    pub order: AdversarialOrder,
    pub orientation: Orientation,
}

impl AdversarialGame {
    pub fn new(instance: GoogolInstance, order: AdversarialOrder, orientation: Orientation) -> Result<Self> {
        orientation.check(&instance)?;
        if order.order.len() != instance.n() {
            return Err(Error::SizeMismatch { expected: instance.n(), got: order.order.len() });
        }
        Ok(AdversarialGame { instance, order, orientation })
    }
}

/// Accepts the first face-down value above the largest face-up value.
/// Every face-down value above the threshold is recorded as an event.
pub fn adversarial_threshold_run(game: &AdversarialGame) -> PolicyTrace {
    let inst = &game.instance;
    let o = &game.orientation;
    let threshold = (0..inst.n()).map(|c| inst.face_up(c, o)).fold(f64::NEG_INFINITY, f64::max);
    let max_down = (0..inst.n()).map(|c| inst.face_down(c, o)).fold(f64::NEG_INFINITY, f64::max);
    let events: Vec<SpecialEvent> = game
        .order
        .order
        .iter()
        .enumerate()
        .filter_map(|(position, &card)| {
            let v = inst.face_down(card, o);
            (v > threshold).then_some(SpecialEvent { position, time: None, card, face_down_value: v, block: None })
        })
        .collect();
    let accepted = events.first();
    PolicyTrace {
        accepted_card: accepted.map(|e| e.card),
        success: accepted.is_some_and(|e| e.face_down_value == max_down),
        special_events: events,
    }
}

/// Largest `n` accepted by [`adversarial_exact_success`].
pub const ADVERSARIAL_EXACT_LIMIT: usize = 12;

/// Success probability of the threshold rule for a fixed order, averaged
/// over all `2^n` orientations.
pub fn adversarial_success_for_order(inst: &GoogolInstance, order: &AdversarialOrder) -> Result<Rational> {
    let n = inst.n();
    if n > 20 {
        return Err(Error::TooLarge { n, limit: 20 });
    }
    let mut wins = 0u64;
    for mask in 0..1u64 << n {
        let game = AdversarialGame::new(inst.clone(), order.clone(), Orientation::from_mask(n, mask))?;
        if adversarial_threshold_run(&game).success {
            wins += 1;
        }
    }
    Ok(Rational::new(BigInt::from(wins), BigInt::from(1u64 << n)))
}

/// Worst-case order success probability of the threshold rule: the minimum
/// over all `n!` orders of the average over all `2^n` orientations.
///
/// For an orientation where the best face-down card `c` beats the top
/// face-up value, the rule wins iff `c` comes before every other card whose
/// face-down value also beats it. So the win count of an order is a sum
/// over cards of a term that depends only on the set of cards placed
/// earlier, and the minimum over orders is a shortest path over subsets.
pub fn adversarial_exact_success(inst: &GoogolInstance) -> Result<Rational> {
    let n = inst.n();
    if n > ADVERSARIAL_EXACT_LIMIT {
        return Err(Error::TooLarge { n, limit: ADVERSARIAL_EXACT_LIMIT });
    }
    let full = (1usize << n) - 1;
    // blockers[c][D]: orientations whose winning card is c and whose other
    // above-threshold face-down cards are exactly D.
    let mut blockers = vec![vec![0u32; 1 << n]; n];
    for mask in 0..1u64 << n {
        let o = Orientation::from_mask(n, mask);
        let threshold = (0..n).map(|c| inst.face_up(c, &o)).fold(f64::NEG_INFINITY, f64::max);
        let best = (0..n)
            .max_by(|&a, &b| inst.face_down(a, &o).total_cmp(&inst.face_down(b, &o)))
            .expect("n >= 1");
        if inst.face_down(best, &o) < threshold {
            continue;
        }
        let d = (0..n)
            .filter(|&c| c != best && inst.face_down(c, &o) > threshold)
            .fold(0usize, |acc, c| acc | 1 << c);
        blockers[best][d] += 1;
    }
    // subset sums: wins[c][M] = sum over D ⊆ M of blockers[c][D]
    for table in blockers.iter_mut() {
        for bit in 0..n {
            for m in 0..=full {
                if m >> bit & 1 == 1 {
                    table[m] += table[m ^ 1 << bit];
                }
            }
        }
    }
    let mut best = vec![u32::MAX; 1 << n];
    best[0] = 0;
    for placed in 1..=full {
        let mut acc = u32::MAX;
        for c in (0..n).filter(|&c| placed >> c & 1 == 1) {
            let before = placed ^ 1 << c;
            let v = best[before] + blockers[c][full & !before];
            acc = acc.min(v);
        }
        best[placed] = acc;
    }
    Ok(Rational::new(BigInt::from(best[full]), BigInt::from(1u64 << n)))
}

/// Largest `n` accepted by [`optimal_small_n_value`].
pub const OPTIMAL_SMALL_N_LIMIT: usize = 3;

/// Relative-rank pattern of `vals` (rank 0 = smallest).
fn pattern(vals: &[u8]) -> Vec<u8> {
    vals.iter()
        .map(|&v| vals.iter().filter(|&&w| w < v).count() as u8)
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<u8>> {
    fn rec(cur: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                cur.push(v as u8);
                rec(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Value of the best comparison-based policy in the random-order two-sided
/// game with `n` cards whose `2n` values are exchangeable (i.i.d. from one
/// continuous distribution), by backward induction over observation
/// histories.
///
/// A world assigns ranks to slots `u_1..u_n` (face-up values of the cards in
/// arrival order) and `d_1..d_n` (their face-down values); all `(2n)!`
/// worlds are equally likely. Before step `k` the player knows the relative
/// order of `u_1..u_n, d_1..d_{k-1}`; at step `k` it sees where `d_k` falls
/// and may stop. It wins iff `d_k` is the largest face-down value.
pub fn optimal_small_n_value(n: usize) -> Result<Rational> {
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if n > OPTIMAL_SMALL_N_LIMIT {
        return Err(Error::TooLarge { n, limit: OPTIMAL_SMALL_N_LIMIT });
    }
    let worlds = permutations(2 * n);
    let total = worlds.len();
    let mut by_start: HashMap<Vec<u8>, Vec<&[u8]>> = HashMap::new();
    for w in &worlds {
        by_start.entry(pattern(&w[..n])).or_default().push(w);
    }
    let wins: u64 = by_start.values().map(|group| best_wins(group, n, 1)).sum();
    Ok(Rational::new(BigInt::from(wins), BigInt::from(total as u64)))
}

/// Largest number of winning worlds any policy achieves from step `k` on,
/// for worlds sharing one history up to step `k - 1`.
fn best_wins(worlds: &[&[u8]], n: usize, k: usize) -> u64 {
    let mut groups: HashMap<Vec<u8>, Vec<&[u8]>> = HashMap::new();
    for &w in worlds {
        groups.entry(pattern(&w[..n + k])).or_default().push(w);
    }
    groups
        .values()
        .map(|g| {
            let stop = g
                .iter()
                .filter(|w| {
                    let dk = w[n + k - 1];
                    w[n..].iter().all(|&d| d <= dk)
                })
                .count() as u64;
            let cont = if k < n { best_wins(g, n, k + 1) } else { 0 };
            stop.max(cont)
        })
        .sum()
}
