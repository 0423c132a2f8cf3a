//! The single-sample last-success problem.
//!
//! Bernoulli variables `X_1..X_n` are revealed in order and a prior sample
//! `Y_i` of each is known in advance. Conditioned on no index having
//! `X_i = Y_i = 1`, every one in the combined sequence is an `X` or a `Y`
//! with probability 1/2 each, independently. At the `k`-th `X`-one the
//! state is `(a, b)`: `a` counts ones among `X_1..X_t, Y_1..Y_{t-1}` and `b`
//! counts ones among `Y_{t+1}..Y_n`.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GoogolInstance, Orientation, RandomnessSpec};
use crate::rank::Rational;
use crate::stats::{wilson_interval, KahanSum};

/// Independent Bernoulli probabilities `p_1..p_n`, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastSuccessInstance {
    p: Vec<f64>,
}

impl LastSuccessInstance {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = p.iter().find(|&&x| !(0.0..1.0).contains(&x)) {
            return Err(Error::Domain(format!("probability {bad} outside [0, 1)")));
        }
        Ok(LastSuccessInstance { p })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }
}

/// Probability mass function of `S`, the total number of ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SDistribution {
    pmf: Vec<f64>,
}

impl SDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Domain("pmf entries must be nonnegative".into()));
        }
        let total: f64 = pmf.iter().copied().collect::<KahanSum>().value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("pmf sums to {total}")));
        }
        Ok(SDistribution { pmf })
    }

    pub fn point_mass(s: usize) -> Self {
        let mut pmf = vec![0.0; s + 1];
        pmf[s] = 1.0;
        SDistribution { pmf }
    }

    /// `Pr[S = s]`, zero outside the support.
    pub fn prob(&self, s: usize) -> f64 {
        self.pmf.get(s).copied().unwrap_or(0.0)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Largest index with `Pr[S = s]` possibly positive.
    pub fn max_support(&self) -> usize {
        self.pmf.len().saturating_sub(1)
    }

    pub fn max_mass(&self) -> f64 {
        self.pmf.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_log_concave(&self) -> bool {
        self.pmf.windows(3).all(|w| w[1] * w[1] >= w[0] * w[2] * (1.0 - 1e-12))
    }

    pub fn is_unimodal(&self) -> bool {
        let mode = self
            .pmf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.pmf[..=mode].windows(2).all(|w| w[0] <= w[1]) && self.pmf[mode..].windows(2).all(|w| w[0] >= w[1])
    }
}

/// Binomial(n, q) pmf by the ratio recurrence in log space, normalised with
/// compensated summation. The upper tail is cut where it leaves the normal
/// double range.
pub fn binomial_pmf(n: usize, q: f64) -> Result<SDistribution> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("binomial q = {q} outside (0, 1)")));
    }
    let log_ratio = q.ln() - (-q).ln_1p();
    let mut logw = Vec::with_capacity(n + 1);
    let mut cur = n as f64 * (-q).ln_1p();
    logw.push(cur);
    for k in 1..=n {
        cur += ((n - k + 1) as f64).ln() - (k as f64).ln() + log_ratio;
        logw.push(cur);
    }
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logw.iter().map(|&l| (l - top).exp()).collect();
    let norm = weights.iter().copied().collect::<KahanSum>().value();
    let mut pmf: Vec<f64> = weights.into_iter().map(|w| w / norm).collect();
    // below this level doubles lose mantissa bits and the ratios of
    // neighbouring masses, which drive the stop decision, become noise
    let floor = f64::MIN_POSITIVE * 2f64.powi(52);
    let mode = pmf.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let last = pmf.iter().rposition(|&w| w >= floor).unwrap_or(0).max(mode);
    pmf.truncate(last + 1);
    Ok(SDistribution { pmf })
}

/// Per-index probability that exactly one of `X_i, Y_i` is one, given that
/// not both are: `2p(1-p) / (1-p^2) = 2p / (1+p)`.
pub fn conditioned_one_prob(p: f64) -> f64 {
    2.0 * p / (1.0 + p)
}

/// Law of `S` for i.i.d. `p`, conditioned on no index with `X_i = Y_i = 1`.
pub fn conditioned_s_distribution(n: usize, p: f64) -> Result<SDistribution> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p = {p} outside (0, 1)")));
    }
    binomial_pmf(n, conditioned_one_prob(p))
}

/// Exact conditional law of `S` by enumerating all `4^n` outcomes of
/// `(X_i, Y_i)` with rational `p = num/den`.
pub fn conditioned_s_distribution_exact(n: usize, num: u64, den: u64) -> Result<Vec<Rational>> {
    if n > 10 || num == 0 || num >= den {
        return Err(Error::Domain(format!("need n <= 10 and 0 < {num}/{den} < 1")));
    }
    let p = Rational::new(BigInt::from(num), BigInt::from(den));
    let one_minus = Rational::one() - &p;
    let mut mass = vec![Rational::zero(); n + 1];
    let mut kept = Rational::zero();
    for code in 0u64..1 << (2 * n) {
        let mut w = Rational::one();
        let mut s = 0;
        let mut both = false;
        for i in 0..n {
            let x = code >> (2 * i) & 1 == 1;
            let y = code >> (2 * i + 1) & 1 == 1;
            both |= x && y;
            s += x as usize + y as usize;
            w *= if x { &p } else { &one_minus };
            w *= if y { &p } else { &one_minus };
        }
        if !both {
            kept += &w;
            mass[s] += w;
        }
    }
    Ok(mass.into_iter().map(|m| m / &kept).collect())
}

/// State `(a, b)` at an `X`-one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LastSuccessState {
    pub a: usize,
    pub b: usize,
}

/// `(b+1) Pr[S=a+b+1] / (2 Pr[S=a+b])`.
pub fn stopping_ratio(state: LastSuccessState, s: &SDistribution) -> Result<f64> {
    let here = s.prob(state.a + state.b);
    let next = s.prob(state.a + state.b + 1);
    if here == 0.0 {
        return if next > 0.0 { Err(Error::UndefinedRatio(state.a + state.b)) } else { Ok(0.0) };
    }
    Ok((state.b + 1) as f64 * next / (2.0 * here))
}

/// Stop iff `(b+1) Pr[S=a+b+1] <= 2 Pr[S=a+b]`.
pub fn optimal_stop_decision(state: LastSuccessState, s: &SDistribution) -> Result<bool> {
    let here = s.prob(state.a + state.b);
    let next = s.prob(state.a + state.b + 1);
    if here == 0.0 {
        return if next > 0.0 { Err(Error::UndefinedRatio(state.a + state.b)) } else { Ok(true) };
    }
    Ok((state.b + 1) as f64 * next <= 2.0 * here)
}

/// A stop region over states with `a >= 1`, `b >= 0`, `a + b <= max_total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptSet {
    max_total: usize,
    // accept[a + b][b]
    accept: Vec<Vec<bool>>,
}

impl AcceptSet {
    pub fn from_fn<F: FnMut(LastSuccessState) -> bool>(max_total: usize, mut f: F) -> Self {
        let accept = (0..=max_total)
            .map(|total| (0..=total).map(|b| total > b && f(LastSuccessState { a: total - b, b })).collect())
            .collect();
        AcceptSet { max_total, accept }
    }

    pub fn empty(max_total: usize) -> Self {
        Self::from_fn(max_total, |_| false)
    }

    /// The stop region of [`optimal_stop_decision`] over the support of `s`.
    pub fn optimal(s: &SDistribution) -> Result<Self> {
        let max_total = s.max_support();
        let mut err = None;
        let set = Self::from_fn(max_total, |st| match optimal_stop_decision(st, s) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(set),
        }
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    pub fn contains(&self, st: LastSuccessState) -> bool {
        let total = st.a + st.b;
        st.a >= 1 && total <= self.max_total && self.accept[total][st.b]
    }

    pub fn states(&self) -> impl Iterator<Item = LastSuccessState> + '_ {
        self.accept.iter().enumerate().flat_map(|(total, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(move |(b, _)| LastSuccessState { a: total - b, b })
        })
    }

    /// First violation of: `(a, b)` accepted implies every successor
    /// `(a + b + 1 - b', b')` with `b' <= b` accepted (inside the grid).
    pub fn monotonicity_violation(&self) -> Option<LastSuccessState> {
        for st in self.states() {
            let next_total = st.a + st.b + 1;
            if next_total > self.max_total {
                continue;
            }
            if (0..=st.b).any(|b2| !self.accept[next_total][b2]) {
                return Some(st);
            }
        }
        None
    }

    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violation().is_none()
    }
}

/// Success probability of a monotone stop region:
/// `sum_A 2^{-(b+1)} Pr[S=a+b] - sum_A (b+1) 2^{-(b+2)} Pr[S=a+b+1]`.
pub fn monotone_rule_success(accept: &AcceptSet, s: &SDistribution) -> Result<f64> {
    if let Some(st) = accept.monotonicity_violation() {
        return Err(Error::NonMonotone { a: st.a, b: st.b });
    }
    let mut acc = KahanSum::default();
    for st in accept.states() {
        // 2^{-(b+1)} underflows past b ~ 1070; the terms are long negligible by then
        if st.b > 1060 {
            continue;
        }
        let half_pow = 0.5f64.powi(st.b as i32 + 1);
        acc.add(half_pow * s.prob(st.a + st.b));
        acc.add(-((st.b + 1) as f64) * half_pow * 0.5 * s.prob(st.a + st.b + 1));
    }
    Ok(acc.value())
}

/// `1/4 + 4 max_c Pr[S = c]`.
pub fn success_upper_bound(s: &SDistribution) -> f64 {
    0.25 + 4.0 * s.max_mass()
}

/// `sum_a |Pr[S=a+b] - Pr[S=a+b+1]|` for a fixed `b` (sum over `a >= 1`).
pub fn telescoping_sum(s: &SDistribution, b: usize) -> f64 {
    (1..=s.max_support() + 1)
        .map(|a| (s.prob(a + b) - s.prob(a + b + 1)).abs())
        .collect::<KahanSum>()
        .value()
}

/// One draw of the conditioned Bernoulli sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastSuccessDraw {
    /// Indices (0-based, increasing) with `X_i = 1`.
    pub x_ones: Vec<usize>,
    /// Indices (0-based, increasing) with `Y_i = 1`.
    pub y_ones: Vec<usize>,
}

impl LastSuccessDraw {
    /// The `(a, b)` state at each `X`-one, in order.
    pub fn states(&self) -> Vec<LastSuccessState> {
        let total_y = self.y_ones.len();
        let mut out = Vec::with_capacity(self.x_ones.len());
        let mut yi = 0;
        for (k, &t) in self.x_ones.iter().enumerate() {
            while yi < total_y && self.y_ones[yi] < t {
                yi += 1;
            }
            // Y_t = 0 whenever X_t = 1
            let later_y = total_y - yi;
            out.push(LastSuccessState { a: k + 1 + yi, b: later_y });
        }
        out
    }
}

/// Indices of the ones among `n` Bernoulli(p) draws, via geometric gaps.
fn bernoulli_ones<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    if p >= 1.0 {
        return (0..n).collect();
    }
    let log_q = (-p).ln_1p();
    let mut pos: f64 = -1.0;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        pos += 1.0 + (u.ln() / log_q).floor();
        if pos >= n as f64 {
            return out;
        }
        out.push(pos as usize);
    }
}

/// Draws `X, Y` with i.i.d. Bernoulli(`p_i`) entries, redrawing the whole
/// trial until no index has both ones.
pub fn sample_conditioned<R: Rng + ?Sized>(inst: &LastSuccessInstance, rng: &mut R) -> LastSuccessDraw {
    let uniform = inst.p.windows(2).all(|w| w[0] == w[1]);
    loop {
        let (x_ones, y_ones) = if uniform && !inst.p.is_empty() {
            (bernoulli_ones(inst.n(), inst.p[0], rng), bernoulli_ones(inst.n(), inst.p[0], rng))
        } else {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (i, &p) in inst.p.iter().enumerate() {
                if rng.gen::<f64>() < p {
                    xs.push(i);
                }
                if rng.gen::<f64>() < p {
                    ys.push(i);
                }
            }
            (xs, ys)
        };
        let clash = {
            let (mut i, mut j) = (0, 0);
            let mut hit = false;
            while i < x_ones.len() && j < y_ones.len() {
                match x_ones[i].cmp(&y_ones[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        hit = true;
                        break;
                    }
                }
            }
            hit
        };
        if !clash {
            return LastSuccessDraw { x_ones, y_ones };
        }
    }
}

/// Runs a rule on one draw: returns whether it accepted the last `X`-one.
pub fn play_rule<F: Fn(LastSuccessState) -> bool>(rule: &F, draw: &LastSuccessDraw) -> bool {
    let states = draw.states();
    match states.iter().position(|&st| rule(st)) {
        Some(k) => k + 1 == states.len(),
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastSuccessEstimate {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci: (f64, f64),
}

/// Monte Carlo success rate of `rule` with a 95% Wilson interval.
pub fn simulate_last_success<F>(rule: F, inst: &LastSuccessInstance, trials: u64, rng: RandomnessSpec) -> LastSuccessEstimate
where
    F: Fn(LastSuccessState) -> bool + Sync,
{
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut r = rng.trial_rng(t);
            play_rule(&rule, &sample_conditioned(inst, &mut r))
        })
        .count() as u64;
    let ci = wilson_interval(successes, trials);
    LastSuccessEstimate { trials, successes, estimate: successes as f64 / trials.max(1) as f64, ci }
}

/// Exact success probability of a rule, by enumerating every conditioned
/// outcome (`3^n` of them).
pub fn exact_rule_success<F: Fn(LastSuccessState) -> bool>(rule: &F, n: usize, p: f64) -> Result<f64> {
    if n > 12 {
        return Err(Error::TooLarge { n, limit: 12 });
    }
    let mut win = 0.0;
    let mut kept = 0.0;
    let mut digits = vec![0u8; n];
    loop {
        let x_ones: Vec<usize> = (0..n).filter(|&i| digits[i] == 1).collect();
        let y_ones: Vec<usize> = (0..n).filter(|&i| digits[i] == 2).collect();
        let ones = (x_ones.len() + y_ones.len()) as i32;
        let w = p.powi(ones) * (1.0 - p).powi(2 * n as i32 - ones);
        kept += w;
        if play_rule(rule, &LastSuccessDraw { x_ones, y_ones }) {
            win += w;
        }
        let mut i = 0;
        while i < n && digits[i] == 2 {
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
        digits[i] += 1;
    }
    Ok(win / kept)
}

/// Sampler for the single-sample secretary instance in which card `i`
/// (1-based) has both sides equal to `i` with probability `p_i` and `0`
/// otherwise, sides drawn independently; picking the largest face-down value
/// is picking the last nonzero `X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardGoogolInstance {
    p: Vec<f64>,
}

/// A sampled hard instance with side A as `X` (face-down) and side B as `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardGoogolSample {
    pub instance: GoogolInstance,
    pub orientation: Orientation,
    pub draw: LastSuccessDraw,
}

impl HardGoogolInstance {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::Domain(format!("probability {bad} outside (0, 1]")));
        }
        Ok(HardGoogolInstance { p })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// Card values for a Bernoulli draw. Zeros become distinct tiny negative
    /// numbers keyed by index and side, below every nonzero value; a nonzero
    /// `Y_i` sits just under `X_i = i` so the two sides stay distinct.
    pub fn realize(&self, draw: &LastSuccessDraw) -> Result<HardGoogolSample> {
        let n = self.n();
        let delta = 1.0 / (4.0 * n as f64 + 4.0);
        let zero = |i: usize, side: usize| -((2 * i + side + 1) as f64) * delta;
        let mut cards: Vec<(f64, f64)> = (0..n).map(|i| (zero(i, 0), zero(i, 1))).collect();
        for &i in &draw.x_ones {
            cards[i].0 = (i + 1) as f64;
        }
        for &i in &draw.y_ones {
            cards[i].1 = (i + 1) as f64 - 0.25;
        }
        Ok(HardGoogolSample {
            instance: GoogolInstance::new(cards)?,
            orientation: Orientation::new(vec![false; n]),
            draw: draw.clone(),
        })
    }

    /// Unconditioned draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardGoogolSample> {
        let mut x_ones = Vec::new();
        let mut y_ones = Vec::new();
        for (i, &p) in self.p.iter().enumerate() {
            if rng.gen::<f64>() < p {
                x_ones.push(i);
            }
            if rng.gen::<f64>() < p {
                y_ones.push(i);
            }
        }
        self.realize(&LastSuccessDraw { x_ones, y_ones })
    }

    /// Draw conditioned on no index with both sides nonzero.
    pub fn sample_conditioned<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardGoogolSample> {
        loop {
            let s = self.sample(rng)?;
            if s.draw.x_ones.iter().all(|i| s.draw.y_ones.binary_search(i).is_err()) {
                return Ok(s);
            }
        }
    }
}

/// Plays an `(a, b)` rule directly on the card values of a hard instance,
/// in index order, computing `a` and `b` from the values seen and the
/// face-up side. Returns `(accepted card, success)` where success means the
/// accepted face-down value is the largest face-down value.
pub fn play_rule_on_googol<F: Fn(LastSuccessState) -> bool>(rule: &F, sample: &HardGoogolSample) -> (Option<usize>, bool) {
    let inst = &sample.instance;
    let o = &sample.orientation;
    let n = inst.n();
    let nonzero = |v: f64| v > 0.0;
    let max_down = (0..n).map(|c| inst.face_down(c, o)).fold(f64::NEG_INFINITY, f64::max);
    let mut seen_ones = 0;
    for t in 0..n {
        let x = inst.face_down(t, o);
        if nonzero(x) {
            let later_y = (t + 1..n).filter(|&c| nonzero(inst.face_up(c, o))).count();
            let st = LastSuccessState { a: seen_ones + 1, b: later_y };
            if rule(st) {
                return (Some(t), x == max_down);
            }
            seen_ones += 1;
        }
        if nonzero(inst.face_up(t, o)) {
            seen_ones += 1;
        }
    }
    (None, false)
}
