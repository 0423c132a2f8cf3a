//! Instances, orientations, arrival times and the seeded randomness contract.
//!
//! A [`GoogolInstance`] is a set of cards with two distinct real numbers each.
//! An [`Orientation`] decides which side of every card is face-up; the
//! face-down side is the value the player is trying to pick. Random-order
//! play uses explicit [`ArrivalTimes`] in `(0, 1]`, processed from the
//! largest time down to the smallest.

use std::cmp::Ordering;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One value of an instance together with the card it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedValue {
    pub value: f64,
    pub card: usize,
    /// `true` for the card's first side (`valueA`).
    pub side_a: bool,
}

/// The cards of a two-sided Game of Googol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoogolInstance {
    cards: Vec<(f64, f64)>,
}

impl GoogolInstance {
    /// Builds a validated instance.
    pub fn new(cards: Vec<(f64, f64)>) -> Result<Self> {
        let inst = GoogolInstance { cards };
        inst.validate()?;
        Ok(inst)
    }

    pub fn cards(&self) -> &[(f64, f64)] {
        &self.cards
    }

    pub fn n(&self) -> usize {
        self.cards.len()
    }

    /// Checks the instance invariants and returns the rank view
    /// `a_1 > a_2 > ... > a_{2n}`, each value tagged with its card.
    pub fn validate(&self) -> Result<Vec<RankedValue>> {
        if self.cards.is_empty() {
            return Err(Error::EmptyInstance);
        }
        for &(a, b) in &self.cards {
            for v in [a, b] {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue(v));
                }
            }
        }
        let ranks = self.rank_view_unchecked();
        for w in ranks.windows(2) {
            if w[0].value == w[1].value {
                return Err(Error::DuplicateValue(w[0].value));
            }
        }
        Ok(ranks)
    }

    /// Rank view without validation. Values are sorted descending.
    pub fn rank_view(&self) -> Vec<RankedValue> {
        self.rank_view_unchecked()
    }

    fn rank_view_unchecked(&self) -> Vec<RankedValue> {
        let mut out: Vec<RankedValue> = self
            .cards
            .iter()
            .enumerate()
            .flat_map(|(card, &(a, b))| {
                [
                    RankedValue { value: a, card, side_a: true },
                    RankedValue { value: b, card, side_a: false },
                ]
            })
            .collect();
        out.sort_by(|x, y| y.value.partial_cmp(&x.value).unwrap_or(Ordering::Equal));
        out
    }

    /// The card index of each rank position (0-based ranks).
    pub fn rank_cards(&self) -> Vec<usize> {
        self.rank_view().iter().map(|r| r.card).collect()
    }

    pub fn face_down(&self, card: usize, orientation: &Orientation) -> f64 {
        let (a, b) = self.cards[card];
        if orientation.face_up[card] {
            b
        } else {
            a
        }
    }

    pub fn face_up(&self, card: usize, orientation: &Orientation) -> f64 {
        let (a, b) = self.cards[card];
        if orientation.face_up[card] {
            a
        } else {
            b
        }
    }

    /// Face-up values sorted descending.
    pub fn face_up_sorted(&self, orientation: &Orientation) -> Vec<f64> {
        let mut ys: Vec<f64> = (0..self.n()).map(|c| self.face_up(c, orientation)).collect();
        ys.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        ys
    }

    /// Face-down values sorted descending.
    pub fn face_down_sorted(&self, orientation: &Orientation) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..self.n()).map(|c| self.face_down(c, orientation)).collect();
        xs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        xs
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        let cards = file
            .cards
            .into_iter()
            .map(|c| match c.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::Format(format!("card must have two sides, got {}", c.len()))),
            })
            .collect::<Result<Vec<_>>>()?;
        GoogolInstance::new(cards)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json_str(&s)
    }

    /// Canonical `{"cards": [[a,b], ...]}` encoding, cards in input order.
    pub fn to_json_string(&self) -> String {
        let file = InstanceFile { cards: self.cards.iter().map(|&(a, b)| vec![a, b]).collect() };
        serde_json::to_string(&file).expect("finite floats always serialize")
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    cards: Vec<Vec<f64>>,
}

/// Which side of each card faces up. `true` means `valueA` is face-up.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orientation {
    pub face_up: Vec<bool>,
}

impl Orientation {
    pub fn new(face_up: Vec<bool>) -> Self {
        Orientation { face_up }
    }

    /// Orientation number `mask` out of `2^n`: bit `c` set means side A is up.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Orientation { face_up: (0..n).map(|c| mask >> c & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.face_up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face_up.is_empty()
    }

    pub fn check(&self, inst: &GoogolInstance) -> Result<()> {
        if self.len() != inst.n() {
            return Err(Error::SizeMismatch { expected: inst.n(), got: self.len() });
        }
        Ok(())
    }
}

/// Arrival times of the cards; card `c` arrives at `times[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalTimes {
    pub times: Vec<f64>,
}

impl ArrivalTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for &t in &times {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidTime(t));
            }
        }
        let mut sorted = times.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateTime(w[0]));
        }
        Ok(ArrivalTimes { times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Card indices in processing order (decreasing time).
    pub fn processing_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.times.len()).collect();
        idx.sort_by(|&a, &b| {
            self.times[b].partial_cmp(&self.times[a]).unwrap_or(Ordering::Equal)
        });
        idx
    }
}

/// A fixed presentation order chosen by an adversary (0-based card indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialOrder {
    pub order: Vec<usize>,
}

impl AdversarialOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &c in &order {
            if c >= order.len() || seen[c] {
                return Err(Error::InvalidPermutation);
            }
            seen[c] = true;
        }
        Ok(AdversarialOrder { order })
    }

    pub fn identity(n: usize) -> Self {
        AdversarialOrder { order: (0..n).collect() }
    }
}

/// Master seed and stream id; together with a trial index they pin down
/// one independent random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomnessSpec {
    pub master_seed: u64,
    pub stream_id: u32,
}

impl RandomnessSpec {
    pub fn new(master_seed: u64, stream_id: u32) -> Self {
        RandomnessSpec { master_seed, stream_id }
    }

    /// The substream for `trial`. The ChaCha key carries the master seed and
    /// stream id verbatim and the trial index selects the ChaCha stream, so
    /// draws depend only on `(master_seed, stream_id, trial)`.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..12].copy_from_slice(&self.stream_id.to_le_bytes());
        key[12..16].copy_from_slice(b"slab");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(trial);
        rng
    }

    /// A derived spec for an independent sub-experiment.
    pub fn substream(&self, stream_id: u32) -> Self {
        RandomnessSpec { master_seed: self.master_seed, stream_id }
    }
}

/// `n` independent fair coin flips.
pub fn sample_orientation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Orientation> {
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    Ok(Orientation { face_up: (0..n).map(|_| rng.gen::<bool>()).collect() })
}

/// Arrivals in processing order: `(cards, times)` with `times` strictly
/// decreasing in `(0, 1)` and `cards[k]` the card arriving `k`-th.
///
/// The times are the order statistics of `n` i.i.d. uniforms, built from
/// exponential spacings, and the cards are a uniform random permutation;
/// jointly this is the law of i.i.d. uniform times per card. Draws with a
/// rounding tie are redrawn.
pub fn sample_arrivals_ordered<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let mut times = Vec::with_capacity(n);
    loop {
        times.clear();
        let mut acc = 0.0;
        for _ in 0..n {
            // gen::<f64>() lies in [0, 1); 1 - u in (0, 1], so -ln is >= 0 and finite
            acc += -(1.0 - rng.gen::<f64>()).ln();
            times.push(acc);
        }
        let total = acc - (1.0 - rng.gen::<f64>()).ln();
        for t in times.iter_mut() {
            *t = 1.0 - *t / total;
        }
        if times.windows(2).all(|w| w[0] > w[1]) && times[0] < 1.0 && times[n - 1] > 0.0 {
            break;
        }
    }
    let mut cards: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        cards.swap(k, rng.gen_range(0..=k));
    }
    Ok((cards, times))
}

/// `n` uniform arrival times, one per card, all distinct.
pub fn sample_arrival_times<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ArrivalTimes> {
    let (cards, sorted) = sample_arrivals_ordered(n, rng)?;
    let mut times = vec![0.0; n];
    for (card, t) in cards.into_iter().zip(sorted) {
        times[card] = t;
    }
    Ok(ArrivalTimes { times })
}
