//! Seeded Monte Carlo over instance distributions.
//!
//! Every trial draws from its own substream `(seed, stream, trial)`, so a
//! report depends only on its configuration, never on thread scheduling.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::ThresholdSchedule;
use crate::error::{Error, Result};
use crate::last_success::{HardGoogolInstance, LastSuccessDraw};
use crate::model::{
    sample_arrivals_ordered, sample_orientation, AdversarialOrder, ArrivalTimes, GoogolInstance, Orientation,
    RandomnessSpec,
};
use crate::policies::{
    adversarial_threshold_run, needed_face_up_ranks, scan_block_rank, AdversarialGame, Arrival, PolicyTrace,
};
use crate::stats::{wilson_interval, Proportion};

/// A finite discrete distribution for one card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTable {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteTable {
    fn check(&self) -> Result<()> {
        if self.values.is_empty() || self.values.len() != self.probs.len() {
            return Err(Error::Format("table needs matching non-empty values and probs".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Format("table values must be finite and probs nonnegative".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("table probabilities sum to {total}")));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (v, p) in self.values.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return *v;
            }
        }
        *self.values.last().expect("non-empty table")
    }
}

#[derive(Deserialize)]
struct TableFile {
    cards: Vec<DiscreteTable>,
}

/// Families of per-card distributions. Both sides of card `i` are drawn
/// independently from the same `D_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InstanceDistribution {
    /// `n` cards, every side uniform on `(0, 1)`.
    IidUniform { n: usize },
    /// Card `i` has exponential sides with mean `scales[i]`.
    ScaledExp { scales: Vec<f64> },
    /// Card `i` (1-based) shows `i` with probability `p_i`, else `0`.
    BernoulliHard { p: Vec<f64> },
    /// Explicit discrete tables, one per card.
    File { tables: Vec<DiscreteTable> },
}

impl InstanceDistribution {
    pub fn n(&self) -> usize {
        match self {
            InstanceDistribution::IidUniform { n } => *n,
            InstanceDistribution::ScaledExp { scales } => scales.len(),
            InstanceDistribution::BernoulliHard { p } => p.len(),
            InstanceDistribution::File { tables } => tables.len(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            InstanceDistribution::IidUniform { .. } => "iid-uniform",
            InstanceDistribution::ScaledExp { .. } => "scaled-exp",
            InstanceDistribution::BernoulliHard { .. } => "bernoulli-hard",
            InstanceDistribution::File { .. } => "file",
        }
    }

    /// Reads `{"cards": [{"values": [...], "probs": [...]}, ...]}`.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let file: TableFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let d = InstanceDistribution::File { tables: file.cards };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::EmptyInstance);
        }
        match self {
            InstanceDistribution::IidUniform { .. } => Ok(()),
            InstanceDistribution::ScaledExp { scales } => {
                if scales.iter().all(|&s| s > 0.0 && s.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Domain("scales must be positive".into()))
                }
            }
            InstanceDistribution::BernoulliHard { p } => HardGoogolInstance::new(p.clone()).map(|_| ()),
            InstanceDistribution::File { tables } => tables.iter().try_for_each(DiscreteTable::check),
        }
    }

    /// Tie-break step for the discrete table family: a quarter of the
    /// smallest gap between distinct outcomes, spread over `2n` slots.
    fn table_delta(tables: &[DiscreteTable]) -> f64 {
        let mut vals: Vec<f64> = tables.iter().flat_map(|t| t.values.iter().copied()).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let gap = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let gap = if gap.is_finite() { gap } else { 1.0 };
        gap / (4.0 * tables.len() as f64 + 4.0)
    }

    /// Draws one instance. Side A is the first draw and side B the second.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GoogolInstance> {
        match self {
            InstanceDistribution::IidUniform { n } => {
                loop {
                    let cards: Vec<(f64, f64)> = (0..*n).map(|_| (rng.gen(), rng.gen())).collect();
                    // equal draws have probability ~2^-53 per pair; redraw
                    if let Ok(inst) = GoogolInstance::new(cards) {
                        return Ok(inst);
                    }
                }
            }
            InstanceDistribution::ScaledExp { scales } => loop {
                let mut exp = |s: f64| -s * (1.0 - rng.gen::<f64>()).ln();
                let cards: Vec<(f64, f64)> = scales.iter().map(|&s| (exp(s), exp(s))).collect();
                if let Ok(inst) = GoogolInstance::new(cards) {
                    return Ok(inst);
                }
            },
            InstanceDistribution::BernoulliHard { p } => {
                let hard = HardGoogolInstance::new(p.clone())?;
                Ok(hard.sample(rng)?.instance)
            }
            InstanceDistribution::File { tables } => {
                let delta = Self::table_delta(tables);
                let cards = tables
                    .iter()
                    .enumerate()
                    .map(|(c, t)| {
                        let a = t.sample(rng) + (2 * c + 1) as f64 * delta;
                        let b = t.sample(rng) + (2 * c + 2) as f64 * delta;
                        (a, b)
                    })
                    .collect();
                GoogolInstance::new(cards)
            }
        }
    }
}

/// Which policy a Monte Carlo run plays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SimPolicy {
    /// Random arrival times, block-rank with the given schedule.
    BlockRank { schedule: ThresholdSchedule },
    /// Max-face-up threshold under the heuristic worst order: cards sorted
    /// by increasing larger side, so the strongest cards come last.
    AdversarialThreshold,
}

impl SimPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SimPolicy::BlockRank { .. } => "block-rank",
            SimPolicy::AdversarialThreshold => "adversarial-threshold",
        }
    }
}

/// Heuristic adversarial order: increasing by each card's larger value.
pub fn heuristic_worst_order(inst: &GoogolInstance) -> AdversarialOrder {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by(|&a, &b| {
        let (a0, a1) = inst.cards()[a];
        let (b0, b1) = inst.cards()[b];
        a0.max(a1).total_cmp(&b0.max(b1))
    });
    AdversarialOrder { order }
}

/// Everything about one simulated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub instance: GoogolInstance,
    pub orientation: Orientation,
    pub arrival_times: Option<ArrivalTimes>,
    pub order: Option<AdversarialOrder>,
    pub trace: PolicyTrace,
    pub special_count: usize,
    pub success: bool,
}

fn top_face_up(inst: &GoogolInstance, o: &Orientation, m: usize) -> Vec<f64> {
    let mut ys: Vec<f64> = (0..inst.n()).map(|c| inst.face_up(c, o)).collect();
    let m = m.min(ys.len());
    if m == 0 {
        return Vec::new();
    }
    if m < ys.len() {
        ys.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
        ys.truncate(m);
    }
    ys.sort_by(|a, b| b.total_cmp(a));
    ys
}

/// Plays trial `trial`; the draw order is instance, orientation, then
/// arrivals.
pub fn run_trial(policy: &SimPolicy, dist: &InstanceDistribution, spec: RandomnessSpec, trial: u64) -> Result<TrialRecord> {
    let mut rng = spec.trial_rng(trial);
    let inst = dist.sample(&mut rng)?;
    let n = inst.n();
    let orientation = sample_orientation(n, &mut rng)?;
    match policy {
        SimPolicy::BlockRank { schedule } => {
            let (cards, times) = sample_arrivals_ordered(n, &mut rng)?;
            let ys = top_face_up(&inst, &orientation, needed_face_up_ranks(schedule));
            let arrivals = cards.iter().zip(&times).map(|(&card, &time)| Arrival {
                time,
                card,
                face_down: inst.face_down(card, &orientation),
            });
            let trace = scan_block_rank(&ys, arrivals, schedule, 0);
            let mut per_card = vec![0.0; n];
            for (&c, &t) in cards.iter().zip(&times) {
                per_card[c] = t;
            }
            Ok(TrialRecord {
                trial,
                special_count: trace.special_events.len(),
                success: trace.success,
                instance: inst,
                orientation,
                arrival_times: Some(ArrivalTimes { times: per_card }),
                order: None,
                trace,
            })
        }
        SimPolicy::AdversarialThreshold => {
            let order = heuristic_worst_order(&inst);
            let game = AdversarialGame::new(inst, order.clone(), orientation)?;
            let trace = adversarial_threshold_run(&game);
            Ok(TrialRecord {
                trial,
                special_count: trace.special_events.len(),
                success: trace.success,
                instance: game.instance,
                orientation: game.orientation,
                arrival_times: None,
                order: Some(order),
                trace,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub policy: String,
    pub family: String,
    pub n: usize,
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub wilson95: (f64, f64),
    pub seed: u64,
    /// Block-rank only: trials where "success iff exactly one special
    /// number" failed.
    pub invariant_violations: Option<u64>,
}

impl EstimateReport {
    pub fn sigma(&self) -> f64 {
        Proportion { successes: self.successes, trials: self.trials }.sigma()
    }

    pub const CSV_HEADER: &'static str = "policy,family,n,trials,estimate,lo,hi,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.12},{:.12},{:.12},{}",
            self.policy, self.family, self.n, self.trials, self.estimate, self.wilson95.0, self.wilson95.1, self.seed
        )
    }
}

fn report(policy: &str, family: &str, n: usize, trials: u64, successes: u64, seed: u64, violations: Option<u64>) -> EstimateReport {
    EstimateReport {
        policy: policy.to_string(),
        family: family.to_string(),
        n,
        trials,
        successes,
        estimate: successes as f64 / trials.max(1) as f64,
        wilson95: wilson_interval(successes, trials),
        seed,
        invariant_violations: violations,
    }
}

/// Runs `trials` independent games and aggregates the success rate.
pub fn run_monte_carlo(policy: &SimPolicy, dist: &InstanceDistribution, trials: u64, spec: RandomnessSpec) -> Result<EstimateReport> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    dist.check()?;
    let (successes, violations) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let rec = run_trial(policy, dist, spec, t)?;
            let violated = rec.success != (rec.special_count == 1);
            Ok::<_, Error>((rec.success as u64, violated as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let violations = matches!(policy, SimPolicy::BlockRank { .. }).then_some(violations);
    Ok(report(policy.name(), dist.family(), dist.n(), trials, successes, spec.master_seed, violations))
}

/// Empirical `max_i Pr[X_i is the largest X]`, reading side A as `X`.
pub fn superstar_level(dist: &InstanceDistribution, trials: u64, spec: RandomnessSpec) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    dist.check()?;
    let n = dist.n();
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst = dist.sample(&mut spec.trial_rng(t))?;
            let best = (0..n)
                .max_by(|&a, &b| inst.cards()[a].0.total_cmp(&inst.cards()[b].0))
                .expect("n >= 1");
            let mut v = vec![0u64; n];
            v[best] = 1;
            Ok::<_, Error>(v)
        })
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts.into_iter().max().unwrap_or(0) as f64 / trials as f64)
}

/// True when some card has both values among the top `k` of all `2n`.
pub fn top_pair_collision(inst: &GoogolInstance, k: usize) -> bool {
    let ranks = inst.rank_cards();
    let top = &ranks[..k.min(ranks.len())];
    let mut seen = vec![false; inst.n()];
    top.iter().any(|&c| std::mem::replace(&mut seen[c], true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub k: usize,
    pub collision: EstimateReport,
    /// Measured superstar level, from an independent substream.
    pub epsilon: f64,
    /// `epsilon * k * 2^(k-1)`.
    pub bound: f64,
}

impl CollisionReport {
    /// Estimate within `bound + 3 sigma`.
    pub fn within_bound(&self) -> bool {
        self.collision.estimate <= self.bound + 3.0 * self.collision.sigma()
    }
}

/// Frequency of a top-`k` pair collision together with the bound
/// `ε k 2^{k-1}`, where `ε` is the measured superstar level.
pub fn top_pair_collision_estimate(dist: &InstanceDistribution, k: usize, trials: u64, spec: RandomnessSpec) -> Result<CollisionReport> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    dist.check()?;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| Ok::<_, Error>(top_pair_collision(&dist.sample(&mut spec.trial_rng(t))?, k) as u64))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let epsilon = superstar_level(dist, trials, spec.substream(spec.stream_id.wrapping_add(1)))?;
    let bound = epsilon * k as f64 * 2f64.powi(k as i32 - 1);
    Ok(CollisionReport {
        k,
        collision: report("top-pair-collision", dist.family(), dist.n(), trials, hits, spec.master_seed, None),
        epsilon,
        bound,
    })
}

/// Runs an `(a, b)` rule on hard instances drawn conditioned on no index
/// with both sides nonzero, playing on the card values.
pub fn simulate_hard_googol<F>(rule: F, hard: &HardGoogolInstance, trials: u64, spec: RandomnessSpec) -> Result<EstimateReport>
where
    F: Fn(crate::last_success::LastSuccessState) -> bool + Sync,
{
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = hard.sample_conditioned(&mut spec.trial_rng(t))?;
            Ok::<_, Error>(crate::last_success::play_rule_on_googol(&rule, &s).1 as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(report("ab-rule", "bernoulli-hard", hard.n(), trials, successes, spec.master_seed, None))
}

/// Draws of the conditioned Bernoulli model reused for cross-checks.
pub fn hard_draw(hard: &HardGoogolInstance, spec: RandomnessSpec, trial: u64) -> Result<LastSuccessDraw> {
    Ok(hard.sample_conditioned(&mut spec.trial_rng(trial))?.draw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_block_schedule() -> ThresholdSchedule {
        ThresholdSchedule::paper(0.715598, 0.496376, 0.301284).unwrap()
    }

    #[test]
    fn single_trial_interval() {
        let r = run_monte_carlo(
            &SimPolicy::BlockRank { schedule: three_block_schedule() },
            &InstanceDistribution::IidUniform { n: 5 },
            1,
            RandomnessSpec::new(1, 0),
        )
        .unwrap();
        assert!(r.estimate == 0.0 || r.estimate == 1.0);
        assert!(r.wilson95.0 <= r.estimate && r.estimate <= r.wilson95.1);
    }

    #[test]
    fn deterministic_reports() {
        let d = InstanceDistribution::IidUniform { n: 30 };
        let p = SimPolicy::BlockRank { schedule: three_block_schedule() };
        let a = run_monte_carlo(&p, &d, 2000, RandomnessSpec::new(9, 0)).unwrap();
        let b = run_monte_carlo(&p, &d, 2000, RandomnessSpec::new(9, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.invariant_violations, Some(0));
    }

    #[test]
    fn trial_records_replay() {
        let d = InstanceDistribution::IidUniform { n: 8 };
        let p = SimPolicy::BlockRank { schedule: three_block_schedule() };
        let rec = run_trial(&p, &d, RandomnessSpec::new(4, 2), 17).unwrap();
        let replay = crate::policies::block_rank_run(
            &rec.instance,
            &rec.orientation,
            rec.arrival_times.as_ref().unwrap(),
            &three_block_schedule(),
        )
        .unwrap();
        assert_eq!(replay, rec.trace);
    }

    #[test]
    fn superstar_levels() {
        let spec = RandomnessSpec::new(5, 0);
        assert_eq!(superstar_level(&InstanceDistribution::IidUniform { n: 1 }, 100, spec).unwrap(), 1.0);
        let mut scales = vec![1.0; 10];
        scales[3] = 1e6;
        let lvl = superstar_level(&InstanceDistribution::ScaledExp { scales }, 2000, spec).unwrap();
        assert!(lvl > 0.99, "{lvl}");
        let lvl = superstar_level(&InstanceDistribution::IidUniform { n: 20 }, 20_000, spec).unwrap();
        assert!((0.045..0.065).contains(&lvl), "{lvl}");
    }

    #[test]
    fn single_card_always_collides() {
        let r = top_pair_collision_estimate(&InstanceDistribution::IidUniform { n: 1 }, 2, 50, RandomnessSpec::new(1, 0)).unwrap();
        assert_eq!(r.collision.estimate, 1.0);
        assert_eq!(r.epsilon, 1.0);
        assert!(r.within_bound());
    }

    #[test]
    fn table_family_breaks_ties_without_reordering() {
        let t = DiscreteTable { values: vec![0.0, 1.0], probs: vec![0.5, 0.5] };
        let d = InstanceDistribution::File { tables: vec![t.clone(), t.clone(), t] };
        let mut rng = RandomnessSpec::new(2, 0).trial_rng(0);
        for _ in 0..200 {
            let inst = d.sample(&mut rng).unwrap();
            for &(a, b) in inst.cards() {
                for v in [a, b] {
                    assert!(!(0.5..=1.0).contains(&v), "{v}");
                }
            }
        }
    }

    #[test]
    fn worst_order_puts_strong_cards_last() {
        let inst = GoogolInstance::new(vec![(10.0, 5.0), (9.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(heuristic_worst_order(&inst).order, vec![2, 1, 0]);
    }
}
