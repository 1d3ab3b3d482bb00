//! Key-based reservoir (WRS-N-W). Each item draws `u` uniform in (0, 1) and
//! gets key `u^(1/w)`; the reservoir keeps the `m` largest keys.
//!
//! Keys are held as `ln(u) / w`, which orders identically and does not
//! underflow for tiny weights.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Result, WrsError};
use crate::item::{check_weight, Sample, SampleEntry, WeightedItem};
use crate::rng::RandomSource;
use crate::sampler::{FeedOutcome, SeqGuard, StreamSampler};

/// `u^(1/w)`.
pub fn compute_key(u: f64, w: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(WrsError::InvalidUniform(u));
    }
    check_weight(0, w)?;
    Ok(u.powf(1.0 / w))
}

/// Remaining weight to skip before the next insertion, `ln(r) / ln(T)`.
pub fn jump_distance(r: f64, threshold: f64) -> f64 {
    r.ln() / threshold.ln()
}

/// Key for an item chosen by a jump: uniform on `(T^w, 1)`, raised to `1/w`.
pub fn jump_key(r: f64, threshold: f64, w: f64) -> f64 {
    let floor = threshold.powf(w);
    (floor + r * (1.0 - floor)).powf(1.0 / w)
}

/// Heap key ordered by log-key; among equal keys the later arrival ranks
/// lower and is evicted first.
#[derive(Debug, Clone, Copy)]
struct Rank {
    log_key: f64,
    seq: u64,
}

impl PartialEq for Rank {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rank {}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_key
            .total_cmp(&other.log_key)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Remaining weight to skip, valid for the threshold it was drawn against.
#[derive(Debug, Clone, Copy, Default)]
pub struct JumpState {
    pub remaining: f64,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct EsReservoir {
    capacity: usize,
    heap: BTreeMap<Rank, WeightedItem>,
    rng: RandomSource,
    items_seen: u64,
    insertions: u64,
    guard: SeqGuard,
    jumps: bool,
    jump: JumpState,
}

impl EsReservoir {
    pub fn new(capacity: usize, rng: RandomSource) -> Result<Self> {
        if capacity == 0 {
            return Err(WrsError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            heap: BTreeMap::new(),
            rng,
            items_seen: 0,
            insertions: 0,
            guard: SeqGuard::default(),
            jumps: false,
            jump: JumpState::default(),
        })
    }

    pub fn with_jumps(capacity: usize, rng: RandomSource) -> Result<Self> {
        let mut res = Self::new(capacity, rng)?;
        res.jumps = true;
        Ok(res)
    }

    pub fn uses_jumps(&self) -> bool {
        self.jumps
    }

    pub fn jump_state(&self) -> JumpState {
        self.jump
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.capacity
    }

    fn min_log_key(&self) -> Option<f64> {
        self.heap.first_key_value().map(|(r, _)| r.log_key)
    }

    /// Smallest key in the reservoir, defined once it is full.
    pub fn threshold(&self) -> Option<f64> {
        if self.is_full() {
            self.min_log_key().map(f64::exp)
        } else {
            None
        }
    }

    /// Key of an occupant.
    pub fn key_of(&self, seq: u64) -> Option<f64> {
        self.heap
            .keys()
            .find(|r| r.seq == seq)
            .map(|r| r.log_key.exp())
    }

    pub fn feed(&mut self, item: WeightedItem) -> Result<FeedOutcome> {
        self.admit(&item)?;
        self.jump.active = false;
        Ok(self.step_plain(Cow::Owned(item)))
    }

    pub fn feed_with_jumps(&mut self, item: WeightedItem) -> Result<FeedOutcome> {
        self.admit(&item)?;
        Ok(self.step_jump(Cow::Owned(item)))
    }

    fn admit(&mut self, item: &WeightedItem) -> Result<()> {
        check_weight(item.seq, item.weight)?;
        self.guard.admit(item.seq)
    }

    pub(crate) fn offer(&mut self, item: &WeightedItem) -> FeedOutcome {
        if self.jumps {
            self.step_jump(Cow::Borrowed(item))
        } else {
            self.step_plain(Cow::Borrowed(item))
        }
    }

    fn step_plain(&mut self, item: Cow<'_, WeightedItem>) -> FeedOutcome {
        self.items_seen += 1;
        let log_key = self.rng.next_unit().ln() / item.weight;
        if !self.is_full() {
            return self.insert(log_key, item.into_owned());
        }
        match self.min_log_key() {
            Some(min) if log_key > min => self.insert(log_key, item.into_owned()),
            _ => FeedOutcome::default(),
        }
    }

    fn step_jump(&mut self, item: Cow<'_, WeightedItem>) -> FeedOutcome {
        if !self.is_full() {
            return self.step_plain(item);
        }
        self.items_seen += 1;
        let Some(log_t) = self.min_log_key() else {
            return FeedOutcome::default();
        };
        if !self.jump.active {
            let r = self.rng.next_unit();
            self.jump = JumpState {
                remaining: r.ln() / log_t,
                active: true,
            };
        }
        let w = item.weight;
        self.jump.remaining -= w;
        if self.jump.remaining > 0.0 {
            return FeedOutcome::default();
        }
        // (T^w + r (1 - T^w)) = 1 + (1 - r) * expm1(w ln T)
        let r = self.rng.next_unit();
        let log_key = ((1.0 - r) * (w * log_t).exp_m1()).ln_1p() / w;
        self.jump.active = false;
        self.insert(log_key, item.into_owned())
    }

    fn insert(&mut self, log_key: f64, item: WeightedItem) -> FeedOutcome {
        let evicted = if self.is_full() {
            self.heap.pop_first().map(|(_, it)| it)
        } else {
            None
        };
        self.heap.insert(
            Rank {
                log_key,
                seq: item.seq,
            },
            item,
        );
        self.insertions += 1;
        FeedOutcome {
            inserted: true,
            evicted,
        }
    }

    /// Changes an occupant's weight while keeping its implicit uniform draw:
    /// `key <- key^(w_old / w_new)`.
    pub fn reweight(&mut self, item_seq: u64, new_weight: f64) -> Result<()> {
        check_weight(item_seq, new_weight)?;
        let rank = *self
            .heap
            .keys()
            .find(|r| r.seq == item_seq)
            .ok_or(WrsError::NotInReservoir(item_seq))?;
        let mut item = self.heap.remove(&rank).expect("rank taken from heap");
        let log_key = rank.log_key * item.weight / new_weight;
        item.weight = new_weight;
        self.heap.insert(
            Rank {
                log_key,
                seq: item_seq,
            },
            item,
        );
        self.jump.active = false;
        Ok(())
    }

    /// Multiplies every occupant's weight by `factor`. Order is preserved, only
    /// the key values (and so the threshold) move.
    pub fn reweight_all(&mut self, factor: f64) -> Result<()> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(WrsError::InvalidBias {
                seq: self.items_seen,
                value: factor,
            });
        }
        let heap = std::mem::take(&mut self.heap);
        self.heap = heap
            .into_iter()
            .map(|(rank, mut item)| {
                item.weight *= factor;
                (
                    Rank {
                        log_key: rank.log_key / factor,
                        seq: rank.seq,
                    },
                    item,
                )
            })
            .collect();
        self.jump.active = false;
        Ok(())
    }

    /// Reservoir contents. Unordered samples list occupants by arrival;
    /// ordered samples list them by key, largest first.
    pub fn get_sample(&self, ordered: bool) -> Sample {
        let mut entries: Vec<(&Rank, &WeightedItem)> = self.heap.iter().collect();
        if ordered {
            entries.reverse();
        } else {
            entries.sort_by_key(|(r, _)| r.seq);
        }
        Sample {
            entries: entries
                .into_iter()
                .map(|(_, it)| SampleEntry {
                    item: it.clone(),
                    multiplicity: 1,
                })
                .collect(),
            ordered,
        }
    }

    pub(crate) fn occupants(&self) -> impl Iterator<Item = &WeightedItem> {
        self.heap.values()
    }

    #[cfg(test)]
    fn insert_with_key(&mut self, key: f64, item: WeightedItem) {
        self.items_seen += 1;
        self.insert(key.ln(), item);
    }
}

impl StreamSampler for EsReservoir {
    fn capacity(&self) -> usize {
        self.capacity
    }

    fn feed_item(&mut self, item: WeightedItem) -> Result<()> {
        if self.jumps {
            self.feed_with_jumps(item).map(|_| ())
        } else {
            self.feed(item).map(|_| ())
        }
    }

    fn get_sample(&self) -> Sample {
        EsReservoir::get_sample(self, false)
    }

    fn ordered_sample(&self) -> Option<Sample> {
        Some(EsReservoir::get_sample(self, true))
    }

    fn rng_draws(&self) -> u64 {
        self.rng.draw_count()
    }

    fn items_seen(&self) -> u64 {
        self.items_seen
    }

    fn insertions(&self) -> u64 {
        self.insertions
    }

    fn supports_reweight(&self) -> bool {
        true
    }

    fn scale_weights(&mut self, factor: f64) -> Result<()> {
        self.reweight_all(factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(seq: u64, w: f64) -> WeightedItem {
        WeightedItem::new(seq, format!("i{seq}"), w).unwrap()
    }

    #[test]
    fn key_examples() {
        assert!((compute_key(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((compute_key(0.25, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            compute_key(0.5, 0.0),
            Err(WrsError::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            compute_key(0.0, 1.0),
            Err(WrsError::InvalidUniform(_))
        ));
        assert!(matches!(
            compute_key(1.0, 1.0),
            Err(WrsError::InvalidUniform(_))
        ));
    }

    #[test]
    fn key_is_monotone() {
        let a = compute_key(0.3, 2.0).unwrap();
        assert!(compute_key(0.4, 2.0).unwrap() > a);
        assert!(compute_key(0.3, 3.0).unwrap() > a);
    }

    #[test]
    fn jump_distance_example() {
        let x = jump_distance(0.25, 0.5);
        assert!((x - 2.0).abs() < 1e-12);
        // cumulative weights 0.8, 1.5, 2.4: the third arrival crosses.
        let mut remaining = x;
        let crossing = [0.8, 0.7, 0.9]
            .iter()
            .position(|w| {
                remaining -= w;
                remaining <= 0.0
            })
            .unwrap();
        assert_eq!(crossing, 2);
    }

    #[test]
    fn jump_key_example() {
        let k = jump_key(0.5, 0.5, 1.0);
        assert!((k - 0.75).abs() < 1e-12);
        // log-domain form used by the reservoir
        let log_key = ((1.0f64 - 0.5) * (1.0 * 0.5f64.ln()).exp_m1()).ln_1p() / 1.0;
        assert!((log_key.exp() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn reweight_examples() {
        let mut r = EsReservoir::new(2, RandomSource::new(0)).unwrap();
        r.insert_with_key(0.25, item(0, 2.0));
        r.insert_with_key(0.81, item(1, 1.0));
        r.reweight(0, 1.0).unwrap();
        assert!((r.key_of(0).unwrap() - 0.0625).abs() < 1e-12);
        r.reweight(1, 2.0).unwrap();
        assert!((r.key_of(1).unwrap() - 0.9).abs() < 1e-12);
        let before = r.key_of(1).unwrap();
        r.reweight(1, 2.0).unwrap();
        assert!((r.key_of(1).unwrap() - before).abs() < 1e-15);
        assert_eq!(r.reweight(7, 1.0), Err(WrsError::NotInReservoir(7)));
        assert!(r.reweight(1, -1.0).is_err());
    }

    #[test]
    fn ordered_sample_sorts_by_key() {
        let mut r = EsReservoir::new(3, RandomSource::new(0)).unwrap();
        r.insert_with_key(0.9, item(0, 1.0));
        r.insert_with_key(0.2, item(1, 1.0));
        r.insert_with_key(0.5, item(2, 1.0));
        let ordered = r.get_sample(true);
        assert!(ordered.ordered);
        assert_eq!(ordered.seqs(), vec![0, 2, 1]);
        let plain = r.get_sample(false);
        assert!(!plain.ordered);
        let mut a = ordered.seqs();
        a.sort();
        assert_eq!(a, plain.seqs());
    }

    #[test]
    fn empty_reservoir_gives_empty_sample() {
        let r = EsReservoir::new(3, RandomSource::new(0)).unwrap();
        assert!(r.get_sample(true).is_empty());
        assert_eq!(r.threshold(), None);
    }

    #[test]
    fn equal_key_does_not_displace_incumbent() {
        let mut r = EsReservoir::new(1, RandomSource::new(0)).unwrap();
        r.insert_with_key(0.5, item(0, 1.0));
        // mirror the plain step's comparison against an equal key
        let min = r.min_log_key().unwrap();
        assert!(0.5f64.ln() <= min);
        // among equal keys the later arrival is the one evicted first
        let mut r = EsReservoir::new(2, RandomSource::new(0)).unwrap();
        r.insert_with_key(0.5, item(0, 1.0));
        r.insert_with_key(0.5, item(1, 1.0));
        let out = r.insert(0.7f64.ln(), item(2, 1.0));
        assert_eq!(out.evicted.unwrap().seq, 1);
    }

    #[test]
    fn plain_variant_draws_once_per_item() {
        let mut r = EsReservoir::new(3, RandomSource::new(1)).unwrap();
        for i in 0..50 {
            r.feed(item(i, 1.0 + i as f64)).unwrap();
        }
        assert_eq!(r.rng_draws(), 50);
        assert_eq!(r.get_sample(false).len(), 3);
    }

    #[test]
    fn threshold_is_non_decreasing() {
        for jumps in [false, true] {
            let rng = RandomSource::new(11);
            let mut r = if jumps {
                EsReservoir::with_jumps(4, rng).unwrap()
            } else {
                EsReservoir::new(4, rng).unwrap()
            };
            let mut last = 0.0;
            for i in 0..500u64 {
                r.feed_item(item(i, 0.1 + (i % 7) as f64)).unwrap();
                if let Some(t) = r.threshold() {
                    assert!(t >= last);
                    assert!(t > 0.0 && t < 1.0);
                    last = t;
                }
            }
        }
    }

    #[test]
    fn tiny_weights_keep_keys_ordered() {
        let mut r = EsReservoir::new(2, RandomSource::new(4)).unwrap();
        for i in 0..100 {
            r.feed(item(i, 1e-6)).unwrap();
        }
        assert_eq!(r.get_sample(false).len(), 2);
        assert!(r.min_log_key().unwrap().is_finite());
    }
}
