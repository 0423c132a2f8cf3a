//! Exact rank-beat probabilities `Pr[X^i > Y^j]`.
//!
//! `X^i` is the `i`-th largest face-down value and `Y^j` the `j`-th largest
//! face-up value. With `T = i + j - 1`, the event `X^i > Y^j` holds exactly
//! when at least `i` of the top `T` values `a_1 > ... > a_T` are face-down,
//! so the probability only depends on which of those `T` positions share a
//! card. A [`PairStructure`] records that pairing.
//!
//! Everything here is exact rational arithmetic.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GoogolInstance, Orientation};

pub type Rational = BigRational;

/// Formats a rational as `"num/den"`.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Nearest `f64`; NaN only if the value is outside the `f64` range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// A query for `Pr[X^i > Y^j]`, both ranks 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankQuery {
    pub i: usize,
    pub j: usize,
}

impl RankQuery {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i == 0 || j == 0 {
            return Err(Error::RankZero { i, j });
        }
        Ok(RankQuery { i, j })
    }

    /// `T = i + j - 1`, the number of top values the event depends on.
    pub fn window(&self) -> usize {
        self.i + self.j - 1
    }
}

/// Pairs among the top `window` rank positions (1-based). Positions not
/// covered by a pair are singletons whose partner ranks below the window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairStructure {
    window: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairStructure {
    pub fn new(window: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut used = vec![false; window + 1];
        let mut norm = Vec::with_capacity(pairs.len());
        for (u, v) in pairs {
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            if u == 0 || v > window || u == v {
                return Err(Error::InvalidPairs(format!("pair ({u}, {v}) outside [1, {window}]")));
            }
            if used[u] || used[v] {
                return Err(Error::InvalidPairs(format!("pair ({u}, {v}) overlaps another pair")));
            }
            used[u] = true;
            used[v] = true;
            norm.push((u, v));
        }
        norm.sort_unstable();
        Ok(PairStructure { window, pairs: norm })
    }

    pub fn empty(window: usize) -> Self {
        PairStructure { window, pairs: Vec::new() }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Lower members of the pairs, largest value first (`k_1 < k_2 < ...` as positions).
    pub fn lower_members(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pairs.iter().map(|&(_, v)| v).collect();
        v.sort_unstable();
        v
    }

    /// Restricts to a smaller or larger window. Pairs with a member outside
    /// the new window become singletons.
    pub fn restrict(&self, window: usize) -> PairStructure {
        PairStructure {
            window,
            pairs: self.pairs.iter().copied().filter(|&(_, v)| v <= window).collect(),
        }
    }

    /// The pair structure of the top `window` values of a concrete instance.
    pub fn of_instance(inst: &GoogolInstance, window: usize) -> Self {
        let cards = inst.rank_cards();
        let top = &cards[..window.min(cards.len())];
        let mut pairs = Vec::new();
        for u in 0..top.len() {
            for v in u + 1..top.len() {
                if top[u] == top[v] {
                    pairs.push((u + 1, v + 1));
                }
            }
        }
        PairStructure { window, pairs }
    }
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for t in 0..k {
        acc = acc * BigUint::from(n - t) / BigUint::from(t + 1);
    }
    acc
}

fn pow2(e: usize) -> BigInt {
    BigInt::one() << e
}

/// `p(i, j) = sum_{k=0}^{j-1} C(i-1+k, k) / 2^{i+k}`: the value of
/// `Pr[X^i > Y^j]` when no two of the top `i + j - 1` values share a card.
pub fn p_value(q: RankQuery) -> Rational {
    let mut acc = Rational::zero();
    for k in 0..q.j {
        acc += Rational::new(BigInt::from(binomial(q.i - 1 + k, k)), pow2(q.i + k));
    }
    acc
}

/// Binomial-tail form of `p(i, j)`: `sum_{k=i}^{T} C(T, k) / 2^T`, `T = i + j - 1`.
pub fn p_value_tail_form(q: RankQuery) -> Rational {
    let t = q.window();
    let num: BigUint = (q.i..=t).map(|k| binomial(t, k)).sum();
    Rational::new(BigInt::from(num), pow2(t))
}

/// Number of equally likely orientation outcomes of the window with each
/// face-down count. Every pair has two outcomes with exactly one member
/// face-down; every singleton has two outcomes with zero or one face-down.
fn face_down_histogram(ps: &PairStructure) -> Vec<BigUint> {
    let pairs = ps.pair_count();
    let singles = ps.window - 2 * pairs;
    let mut hist = vec![BigUint::zero(); ps.window + 1];
    // pairs: 2^pairs outcomes, all with `pairs` face-down members.
    let pair_outcomes = BigUint::one() << pairs;
    for m in 0..=singles {
        hist[pairs + m] = &pair_outcomes * binomial(singles, m);
    }
    hist
}

fn beat_from_histogram(hist: &[BigUint], i: usize, free_bits: usize) -> Rational {
    let fav: BigUint = hist.iter().skip(i).sum();
    Rational::new(BigInt::from(fav), pow2(free_bits))
}

fn free_bits(ps: &PairStructure) -> usize {
    ps.window - ps.pair_count()
}

/// `Pr[X^i > Y^j]` for the given pairing of the top `i + j - 1` values.
pub fn exact_rank_beat_prob(q: RankQuery, ps: &PairStructure) -> Result<Rational> {
    if ps.window != q.window() {
        return Err(Error::WindowMismatch { expected: q.window(), got: ps.window });
    }
    let hist = face_down_histogram(ps);
    Ok(beat_from_histogram(&hist, q.i, free_bits(ps)))
}

/// Whole-instance brute force: average over all `2^n` orientations of the
/// indicator `X^i > Y^j`, reading the order statistics directly.
pub fn brute_force_rank_beat_prob(inst: &GoogolInstance, q: RankQuery) -> Result<Rational> {
    let n = inst.n();
    if q.i > n || q.j > n {
        return Err(Error::Domain(format!("rank query ({}, {}) needs at least {} cards", q.i, q.j, q.i.max(q.j))));
    }
    if n > 20 {
        return Err(Error::TooLarge { n, limit: 20 });
    }
    let mut hits = 0u64;
    for mask in 0..1u64 << n {
        let o = Orientation::from_mask(n, mask);
        let xs = inst.face_down_sorted(&o);
        let ys = inst.face_up_sorted(&o);
        if xs[q.i - 1] > ys[q.j - 1] {
            hits += 1;
        }
    }
    Ok(Rational::new(BigInt::from(hits), pow2(n)))
}

/// Every partial matching of `{1, ..., t}`.
pub fn all_pair_structures(t: usize) -> Vec<PairStructure> {
    fn rec(pos: usize, t: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<PairStructure>) {
        if pos > t {
            out.push(PairStructure { window: t, pairs: cur.clone() });
            return;
        }
        if used[pos] {
            rec(pos + 1, t, used, cur, out);
            return;
        }
        // singleton
        rec(pos + 1, t, used, cur, out);
        for v in pos + 1..=t {
            if !used[v] {
                used[v] = true;
                cur.push((pos, v));
                rec(pos + 1, t, used, cur, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(1, t, &mut vec![false; t + 1], &mut Vec::new(), &mut out);
    out
}

/// One line of a verifier report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierEntry {
    pub i: usize,
    pub j: usize,
    pub pairing: Vec<(usize, usize)>,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

impl VerifierEntry {
    fn new(q: RankQuery, ps: &PairStructure, lhs: &Rational, rhs: &Rational, pass: bool) -> Self {
        VerifierEntry {
            i: q.i,
            j: q.j,
            pairing: ps.pairs.clone(),
            lhs: fmt_rational(lhs),
            rhs: fmt_rational(rhs),
            pass,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifierReport {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<VerifierEntry>,
    /// Per query, the configuration with the largest `|lhs - rhs|`.
    pub extremal: Vec<VerifierEntry>,
}

impl VerifierReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Failures followed by extremal entries, as one JSON-ready array.
    pub fn entries(&self) -> Vec<VerifierEntry> {
        self.failures.iter().chain(self.extremal.iter()).cloned().collect()
    }
}

/// Checks `Pr[X^i > Y^j] >= p(i, j)` for `i <= j` and `<=` for `i >= j`
/// over every pairing of every window up to `max_window`.
pub fn verify_rank_dominance(max_window: usize) -> VerifierReport {
    let mut report = VerifierReport { name: "rank-dominance".into(), ..Default::default() };
    let mut extremal: BTreeMap<RankQuery, (Rational, VerifierEntry)> = BTreeMap::new();
    for t in 1..=max_window {
        let queries: Vec<(RankQuery, Rational)> = (1..=t)
            .map(|i| {
                let q = RankQuery { i, j: t + 1 - i };
                (q, p_value(q))
            })
            .collect();
        for ps in all_pair_structures(t) {
            let hist = face_down_histogram(&ps);
            let bits = free_bits(&ps);
            for (q, p) in &queries {
                let lhs = beat_from_histogram(&hist, q.i, bits);
                let pass = (q.i > q.j || lhs >= *p) && (q.i < q.j || lhs <= *p);
                report.checks += 1;
                let entry = VerifierEntry::new(*q, &ps, &lhs, p, pass);
                if !pass {
                    report.failures.push(entry.clone());
                }
                let gap = (&lhs - p).abs();
                match extremal.get(q) {
                    Some((g, _)) if *g >= gap => {}
                    _ => {
                        extremal.insert(*q, (gap, entry));
                    }
                }
            }
        }
    }
    report.extremal = extremal.into_values().map(|(_, e)| e).collect();
    report
}

/// Checks that `Pr[X^i > Y^j]` depends only on the number of pairs inside
/// the window, not on where they sit. Each entry compares the smallest and
/// largest value over all placements with the same pair count.
pub fn verify_pair_position_independence(max_window: usize) -> VerifierReport {
    let mut report = VerifierReport { name: "pair-position-independence".into(), ..Default::default() };
    for t in 1..=max_window {
        let mut by_count: BTreeMap<usize, Vec<PairStructure>> = BTreeMap::new();
        for ps in all_pair_structures(t) {
            by_count.entry(ps.pair_count()).or_default().push(ps);
        }
        for i in 1..=t {
            let q = RankQuery { i, j: t + 1 - i };
            for group in by_count.values() {
                let vals: Vec<Rational> = group
                    .iter()
                    .map(|ps| exact_rank_beat_prob(q, ps).expect("window matches"))
                    .collect();
                report.checks += vals.len();
                let lo = vals.iter().min().expect("non-empty group");
                let hi = vals.iter().max().expect("non-empty group");
                let entry = VerifierEntry::new(q, &group[0], lo, hi, lo == hi);
                if lo != hi {
                    report.failures.push(entry.clone());
                }
                report.extremal.push(entry);
            }
        }
    }
    report
}

/// The three rank-beat terms entering the second-order inequality, for one
/// pairing of `a_1..a_4`.
#[derive(Debug, Clone)]
pub struct SecondOrderTerms {
    pub x2_y3: Rational,
    pub x1_y3: Rational,
    pub x1_y4: Rational,
}

pub fn second_order_terms(top4: &PairStructure) -> SecondOrderTerms {
    let at = |i, j| {
        let q = RankQuery { i, j };
        exact_rank_beat_prob(q, &top4.restrict(q.window())).expect("window matches")
    };
    SecondOrderTerms { x2_y3: at(2, 3), x1_y3: at(1, 3), x1_y4: at(1, 4) }
}

/// Checks `Pr[X^2>Y^3] - p(2,3) <= 2 (Pr[X^1>Y^3] - p(1,3)) + (Pr[X^1>Y^4] - p(1,4))`
/// for all ten pairings of the top four values.
pub fn verify_second_order_inequality() -> VerifierReport {
    let mut report = VerifierReport { name: "second-order-inequality".into(), ..Default::default() };
    let p23 = p_value(RankQuery { i: 2, j: 3 });
    let p13 = p_value(RankQuery { i: 1, j: 3 });
    let p14 = p_value(RankQuery { i: 1, j: 4 });
    let two = rational(2, 1);
    for ps in all_pair_structures(4) {
        let t = second_order_terms(&ps);
        let lhs = &t.x2_y3 - &p23;
        let rhs = &two * (&t.x1_y3 - &p13) + (&t.x1_y4 - &p14);
        let pass = lhs <= rhs;
        report.checks += 1;
        let entry = VerifierEntry::new(RankQuery { i: 2, j: 3 }, &ps, &lhs, &rhs, pass);
        if !pass {
            report.failures.push(entry.clone());
        }
        report.extremal.push(entry);
    }
    report
}
