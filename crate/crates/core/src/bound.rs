//! Success probability of the block-rank policy as a sum of block integrals.
//!
//! With time running from 1 down to 0 and thresholds `c_0 >= c_1 >= ...`,
//! a face-down value arriving at a time in `(c_{j+1}, c_j]` must beat the
//! `(j+1)`-th largest face-up value. The success probability is
//!
//! ```text
//!   sum_j ∫_{c_{j+1}}^{c_j} ( H_j(0) - ∫_0^y (H_j(x) - H_j(0)) / x dx ) dy
//! ```
//!
//! where `H_j(x) = sum_i Pr[X^{i+1} > Y^{j+1}] x^i`. When no values share a
//! card in the relevant window, `H_j` is `F_j(x) = sum_{k=0}^{j} (2 - x)^{-(k+1)}`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{bisect, integrate};
use crate::rank::{exact_rank_beat_prob, PairStructure, RankQuery};

/// Absolute tolerance used for every integral in this module.
pub const QUAD_TOL: f64 = 1e-12;

/// Below this, `(H(x) - H(0)) / x` is evaluated from its Taylor expansion.
const SERIES_CUTOFF: f64 = 1e-6;

/// Thresholds `c_0 = 1, c_1, c_2, c_3 = c_4 = ...` behind the 0.5007 bound.
pub const PAPER_C1: f64 = 0.715598;
pub const PAPER_C2: f64 = 0.496376;
pub const PAPER_C3: f64 = 0.301284;

/// Non-increasing thresholds `c_0 >= c_1 >= ... >= c_J` in `[0, 1]`; every
/// index past `J` takes the value `tail` (zero unless set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    thresholds: Vec<f64>,
    tail: f64,
}

impl ThresholdSchedule {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        Self::with_tail(thresholds, 0.0)
    }

    pub fn with_tail(thresholds: Vec<f64>, tail: f64) -> Result<Self> {
        let all = thresholds.iter().chain(std::iter::once(&tail));
        for &c in all.clone() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidSchedule(format!("{c} outside [0, 1]")));
            }
        }
        let v: Vec<f64> = all.copied().collect();
        if let Some(w) = v.windows(2).find(|w| w[1] > w[0]) {
            return Err(Error::InvalidSchedule(format!("{} follows {}", w[1], w[0])));
        }
        Ok(ThresholdSchedule { thresholds, tail })
    }

    /// `c_0 = 1, c_1, c_2` and `c_j = c_3` for all `j >= 3`.
    pub fn paper(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        Self::with_tail(vec![1.0, c1, c2, c3], c3)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn c(&self, j: usize) -> f64 {
        self.thresholds.get(j).copied().unwrap_or(self.tail)
    }

    /// Largest `j` with `t <= c_j`. `None` when `t > c_0`; `usize::MAX` when
    /// every index qualifies (`t <= tail`).
    pub fn block_of(&self, t: f64) -> Option<usize> {
        if t <= self.tail {
            return Some(usize::MAX);
        }
        self.thresholds.iter().rposition(|&c| t <= c)
    }
}

/// Supplies the coefficients `Pr[X^{i+1} > Y^{j+1}]` of `H_j`.
pub trait BeatProbProvider: Sync {
    /// `Pr[X^{i+1} > Y^{j+1}]` for `i, j >= 0`.
    fn coefficient(&self, i: usize, j: usize) -> f64;

    fn h(&self, j: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for i in 0..MAX_SERIES_DEGREE {
            let term = self.coefficient(i, j) * pow;
            acc += term;
            pow *= x;
            if i > j + 2 && term < 1e-18 {
                break;
            }
        }
        acc
    }

    /// `(H_j(x) - H_j(0)) / x`, summed as the shifted series so that no
    /// cancellation occurs near `x = 0`.
    fn g(&self, j: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for i in 1..MAX_SERIES_DEGREE {
            let term = self.coefficient(i, j) * pow;
            acc += term;
            pow *= x;
            if i > j + 2 && term < 1e-18 {
                break;
            }
        }
        acc
    }
}

const MAX_SERIES_DEGREE: usize = 4000;

/// `p(i+1, j+1)` in floating point.
pub fn p_value_f64(i: usize, j: usize) -> f64 {
    let mut term = 0.5f64.powi(i as i32 + 1);
    let mut acc = term;
    for k in 0..j {
        term *= (i + k + 1) as f64 / (k + 1) as f64 * 0.5;
        acc += term;
    }
    acc
}

/// Coefficients for the case without pairs among the relevant top values.
#[derive(Debug, Clone, Copy, Default)]
pub struct IidProvider;

impl BeatProbProvider for IidProvider {
    fn coefficient(&self, i: usize, j: usize) -> f64 {
        p_value_f64(i, j)
    }

    fn h(&self, j: usize, x: f64) -> f64 {
        f_series_unchecked(j, x)
    }

    fn g(&self, j: usize, x: f64) -> f64 {
        if x < SERIES_CUTOFF {
            return p_value_f64(1, j) + p_value_f64(2, j) * x + p_value_f64(3, j) * x * x;
        }
        // (2 - x)^{-(k+1)} - 2^{-(k+1)} = 2^{-(k+1)} expm1(-(k+1) ln(1 - x/2))
        let l = (-0.5 * x).ln_1p();
        let mut scale = 1.0;
        let mut acc = 0.0;
        for k in 0..=j {
            scale *= 0.5;
            acc += scale * (-((k + 1) as f64) * l).exp_m1();
        }
        acc / x
    }
}

/// Coefficients computed exactly for a fixed pairing of the top ranks.
/// Ranks below the pairing's window are treated as singletons.
#[derive(Debug)]
pub struct InstanceProvider {
    pairs: PairStructure,
    cache: Mutex<HashMap<(usize, usize), f64>>,
}

impl InstanceProvider {
    pub fn new(pairs: PairStructure) -> Self {
        InstanceProvider { pairs, cache: Mutex::new(HashMap::new()) }
    }
}

impl BeatProbProvider for InstanceProvider {
    fn coefficient(&self, i: usize, j: usize) -> f64 {
        if let Some(&v) = self.cache.lock().expect("cache poisoned").get(&(i, j)) {
            return v;
        }
        let q = RankQuery { i: i + 1, j: j + 1 };
        let v = exact_rank_beat_prob(q, &self.pairs.restrict(q.window()))
            .expect("restricted window matches query")
            .to_f64()
            .expect("probability converts to f64");
        self.cache.lock().expect("cache poisoned").insert((i, j), v);
        v
    }
}

fn f_series_unchecked(j: usize, x: f64) -> f64 {
    let r = 1.0 / (2.0 - x);
    let mut pow = r;
    let mut acc = 0.0;
    for _ in 0..=j {
        acc += pow;
        pow *= r;
    }
    acc
}

/// `F_j(x) = sum_{k=0}^{j} (2 - x)^{-(k+1)}` for `0 <= x < 1`.
pub fn f_series(j: usize, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("F_j needs 0 <= x < 1, got {x}")));
    }
    Ok(f_series_unchecked(j, x))
}

/// Direct power series `sum_{i <= degree} p(i+1, j+1) x^i`.
pub fn f_series_direct(j: usize, x: f64, degree: usize) -> f64 {
    let mut pow = 1.0;
    let mut acc = 0.0;
    for i in 0..=degree {
        acc += p_value_f64(i, j) * pow;
        pow *= x;
    }
    acc
}

fn check_provider(j: usize, provider: &dyn BeatProbProvider) -> Result<()> {
    for i in 0..=j + 8 {
        let c = provider.coefficient(i, j);
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Domain(format!("coefficient ({i}, {j}) = {c} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Block `j` of the success probability over `[lower, upper]`.
///
/// By Fubini the inner integral collapses:
/// `∫_lo^hi ∫_0^y g = ∫_0^hi g(x) (hi - max(x, lo)) dx`, so only single
/// integrals are evaluated.
pub fn block_success_term(j: usize, lower: f64, upper: f64, provider: &dyn BeatProbProvider) -> Result<f64> {
    if !(0.0 <= lower && lower <= upper && upper <= 1.0) {
        return Err(Error::Domain(format!("need 0 <= lower <= upper <= 1, got [{lower}, {upper}]")));
    }
    check_provider(j, provider)?;
    if lower == upper {
        return Ok(0.0);
    }
    let width = upper - lower;
    let h0 = provider.coefficient(0, j);
    let below = if lower > 0.0 {
        width * integrate(|x| provider.g(j, x), 0.0, lower, QUAD_TOL)
    } else {
        0.0
    };
    let inside = integrate(|x| provider.g(j, x) * (upper - x), lower, upper, QUAD_TOL);
    Ok(width * h0 - below - inside)
}

/// Per-block contributions and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub blocks: Vec<f64>,
    pub tail: f64,
    pub total: f64,
    pub thresholds: Vec<f64>,
}

/// `-(1 - c) ln(1 - c)`, the lower bound on all blocks `j >= 3` when
/// `c_3 = c_4 = ... = c`.
pub fn tail_lower_bound(c3: f64) -> f64 {
    if c3 >= 1.0 {
        0.0
    } else {
        -(1.0 - c3) * (-c3).ln_1p()
    }
}

/// Blocks 0..2 with the no-pair coefficients plus the closed-form tail for
/// `c_0 = 1` and `c_j = c3` for `j >= 3`.
pub fn paper_bound(c1: f64, c2: f64, c3: f64) -> Result<BoundBreakdown> {
    if !(c3 > 0.0) {
        return Err(Error::InvalidSchedule(format!("c3 must be positive, got {c3}")));
    }
    let schedule = ThresholdSchedule::paper(c1, c2, c3)?;
    let c = schedule.thresholds();
    let mut blocks = (0..3)
        .map(|j| block_success_term(j, c[j + 1], c[j], &IidProvider))
        .collect::<Result<Vec<f64>>>()?;
    let tail = tail_lower_bound(c3);
    blocks.push(tail);
    let total = blocks.iter().sum();
    Ok(BoundBreakdown { blocks, tail, total, thresholds: c.to_vec() })
}

/// `∫_0^c ((1 - x)^{-j-1} - 1) / x dx`.
pub fn threshold_integral(j: usize, c: f64) -> f64 {
    let m = (j + 1) as f64;
    integrate(
        |x: f64| {
            if x < SERIES_CUTOFF {
                m + m * (m + 1.0) / 2.0 * x + m * (m + 1.0) * (m + 2.0) / 6.0 * x * x
            } else {
                ((-m * (-x).ln_1p()).exp_m1()) / x
            }
        },
        0.0,
        c,
        QUAD_TOL,
    )
}

/// Unique `c` in `(0, 1)` with `∫_0^c ((1 - x)^{-j-1} - 1) / x dx = 1`.
///
/// This is the threshold in units of the whole stream of `2n` values; the
/// block-rank boundary in face-down arrival time is `min(1, 2c)`, see
/// [`optimal_schedule`].
pub fn solve_optimal_threshold(j: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("cache poisoned").get(&j) {
        return c;
    }
    // the j = 0 root 1 - 1/e is the largest, so [0, 0.7] brackets every root
    let c = bisect(|c| threshold_integral(j, c) - 1.0, 0.0, 0.7, 1e-12);
    cache.lock().expect("cache poisoned").insert(j, c);
    c
}

/// Optimal block-rank thresholds `c_j = min(1, 2 * root_j)` for `j <= k`,
/// zero beyond.
pub fn optimal_schedule(k: usize) -> ThresholdSchedule {
    let c = (0..=k).map(|j| (2.0 * solve_optimal_threshold(j)).min(1.0)).collect();
    ThresholdSchedule::new(c).expect("optimal thresholds are decreasing")
}

/// Success probability of a schedule under the no-pair coefficients,
/// summing blocks `0..=J` and treating `c_{J+1}` as the schedule's tail.
pub fn schedule_value(schedule: &ThresholdSchedule, last_block: usize) -> Result<f64> {
    (0..=last_block)
        .map(|j| block_success_term(j, schedule.c(j + 1), schedule.c(j), &IidProvider))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// Success probability of the optimal schedule truncated after block `J`.
    pub value: f64,
    /// Upper bound on the missing mass, `c_J`.
    pub tail_bound: f64,
    pub thresholds: Vec<f64>,
}

/// The optimal schedule truncated after block `j_max`: its value, which
/// approaches `γ ≈ 0.5024` from below, and the bound `c_{j_max}` on the gap.
pub fn gamma(j_max: usize) -> GammaEstimate {
    let schedule = optimal_schedule(j_max);
    let value = schedule_value(&schedule, j_max).expect("optimal schedule is valid");
    GammaEstimate {
        value,
        tail_bound: schedule.c(j_max),
        thresholds: schedule.thresholds().to_vec(),
    }
}

/// `γ_k`: optimal thresholds for `j <= k`, `c_{k+1} = c_{k+2} = ... = 0`.
pub fn truncated_gamma(k: usize) -> f64 {
    gamma(k).value
}
