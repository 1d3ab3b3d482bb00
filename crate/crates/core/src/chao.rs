//! Chao's unequal-probability reservoir: each item's inclusion probability is
//! proportional to its weight, with over-heavy ("infeasible") items pinned in
//! the reservoir with probability 1.
//!
//! After `k` arrivals the target inclusion probability of item `i` is
//!
//! ```text
//! pi_i = 1                                  if i is infeasible
//! pi_i = (m - |A|) * w_i / (W - W_A)        otherwise
//! ```
//!
//! where `A` is the infeasible set and `W_A` its weight. An arrival enters with
//! its own `pi`; when it does, the occupant to evict is chosen with
//! probability proportional to `1 - pi_i(new) / pi_i(old)`. For occupants that
//! stay feasible that ratio is the same for all of them, so the choice is
//! uniform among them; items that just left `A` get their own mass, and items
//! still in `A` are never evicted.

use std::borrow::Cow;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Result, WrsError};
use crate::item::{check_weight, Sample, WeightedItem};
use crate::rng::RandomSource;
use crate::sampler::{CompensatedSum, FeedOutcome, SeqGuard, StreamSampler};

#[derive(Debug, Clone, Copy)]
struct Pinned {
    weight: f64,
    seq: u64,
    slot: usize,
}

impl PartialEq for Pinned {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pinned {}

impl PartialOrd for Pinned {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pinned {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone)]
struct Slot {
    item: WeightedItem,
    /// Position in `feasible`, `None` while the occupant is pinned.
    feasible_pos: Option<usize>,
}

/// Pending uniform and survival product for the jump variant.
#[derive(Debug, Clone, Copy)]
pub struct JumpState {
    pub pending: Option<f64>,
    pub survival: f64,
}

impl Default for JumpState {
    fn default() -> Self {
        Self {
            pending: None,
            survival: 1.0,
        }
    }
}

/// True once the accumulated selection mass `1 - survival` reaches `u`.
fn crossed(survival: f64, u: f64) -> bool {
    1.0 - survival >= u
}

/// Index of the first probability at which the accumulated mass
/// `1 - prod(1 - p)` reaches `u`.
pub fn jump_crossing(u: f64, probabilities: &[f64]) -> Option<usize> {
    let mut survival = 1.0;
    for (i, p) in probabilities.iter().enumerate() {
        survival *= 1.0 - p;
        if crossed(survival, u) {
            return Some(i);
        }
    }
    None
}

/// Outcome of re-partitioning for one arrival.
struct Partition {
    new_pinned: bool,
    /// Items leaving the infeasible set, lightest first.
    released: Vec<Pinned>,
    free: CompensatedSum,
    /// Weight moved into the free pool by this arrival.
    grown: f64,
    /// `m - |A|` after the arrival.
    room: usize,
}

/// Implements WRS-N-P. Every fed weight stays in the running total, so
/// probabilities are always relative to the whole prefix seen so far.
#[derive(Debug, Clone)]
pub struct ChaoReservoir {
    capacity: usize,
    slots: Vec<Slot>,
    feasible: Vec<usize>,
    pinned: BinaryHeap<Reverse<Pinned>>,
    /// `W - W_A`.
    free: CompensatedSum,
    total: CompensatedSum,
    rng: RandomSource,
    items_seen: u64,
    insertions: u64,
    guard: SeqGuard,
    jumps: bool,
    jump: JumpState,
}

impl ChaoReservoir {
    pub fn new(capacity: usize, rng: RandomSource) -> Result<Self> {
        if capacity == 0 {
            return Err(WrsError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            feasible: Vec::with_capacity(capacity),
            pinned: BinaryHeap::new(),
            free: CompensatedSum::default(),
            total: CompensatedSum::default(),
            rng,
            items_seen: 0,
            insertions: 0,
            guard: SeqGuard::default(),
            jumps: false,
            jump: JumpState::default(),
        })
    }

    /// A reservoir whose [`StreamSampler::feed_item`] uses the jump variant.
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

    pub fn total_weight(&self) -> f64 {
        self.total.value()
    }

    /// `W - W_A`, the weight outside the infeasible set.
    pub fn free_weight(&self) -> f64 {
        self.free.value()
    }

    /// Tracked infeasible items as `(seq, weight)`, lightest first.
    pub fn infeasible(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<Pinned> = self.pinned.iter().map(|r| r.0).collect();
        out.sort();
        out.into_iter().map(|p| (p.seq, p.weight)).collect()
    }

    /// `(W - W_A) / (m - |A|)`: weights strictly above it are infeasible.
    /// Defined once the filling phase is over.
    pub fn feasibility_threshold(&self) -> Option<f64> {
        if self.items_seen <= self.capacity as u64 {
            return None;
        }
        let room = self.capacity - self.pinned.len();
        Some(self.free.value() / room as f64)
    }

    /// Current inclusion probability of an occupant.
    pub fn occupant_probability(&self, seq: u64) -> Option<f64> {
        let slot = self.slots.iter().find(|s| s.item.seq == seq)?;
        match (self.feasibility_threshold(), slot.feasible_pos) {
            (Some(threshold), Some(_)) => Some(slot.item.weight / threshold),
            _ => Some(1.0),
        }
    }

    /// Probability that a hypothetical next arrival of weight `weight` would
    /// enter the reservoir, given the current state.
    pub fn insertion_probability(&self, weight: f64) -> f64 {
        if (self.items_seen as usize) < self.capacity {
            return 1.0;
        }
        let mut pinned: Vec<f64> = if self.items_seen as usize == self.capacity {
            self.slots.iter().map(|s| s.item.weight).collect()
        } else {
            self.pinned.iter().map(|r| r.0.weight).collect()
        };
        pinned.sort_by(f64::total_cmp);
        let mut free = if self.items_seen as usize == self.capacity {
            CompensatedSum::default()
        } else {
            self.free
        };
        let mut count = pinned.len() + 1;
        let mut new_pinned = true;
        let mut next = 0;
        loop {
            let (w_min, is_new) = match (new_pinned, pinned.get(next)) {
                (true, Some(&t)) if t < weight => (t, false),
                (true, _) => (weight, true),
                (false, Some(&t)) => (t, false),
                (false, None) => break,
            };
            if (self.capacity as f64 - count as f64) * w_min <= free.value() {
                count -= 1;
                free.add(w_min);
                if is_new {
                    new_pinned = false;
                } else {
                    next += 1;
                }
            } else {
                break;
            }
        }
        if new_pinned {
            1.0
        } else {
            ((self.capacity - count) as f64 * weight / free.value()).min(1.0)
        }
    }

    /// Standard per-item step.
    pub fn feed(&mut self, item: WeightedItem) -> Result<FeedOutcome> {
        self.admit(&item)?;
        self.jump = JumpState::default();
        Ok(self.step(Cow::Owned(item), false))
    }

    /// Jump step: one uniform decides which future arrival enters next.
    pub fn feed_with_jumps(&mut self, item: WeightedItem) -> Result<FeedOutcome> {
        self.admit(&item)?;
        Ok(self.step(Cow::Owned(item), true))
    }

    fn admit(&mut self, item: &WeightedItem) -> Result<()> {
        check_weight(item.seq, item.weight)?;
        self.guard.admit(item.seq)
    }

    /// Offers an item without the arrival-order check; the item is cloned only
    /// if it enters.
    pub(crate) fn offer(&mut self, item: &WeightedItem) -> FeedOutcome {
        self.step(Cow::Borrowed(item), self.jumps)
    }

    fn step(&mut self, item: Cow<'_, WeightedItem>, use_jumps: bool) -> FeedOutcome {
        let weight = item.weight;
        self.items_seen += 1;
        self.total.add(weight);

        if self.items_seen as usize <= self.capacity {
            self.slots.push(Slot {
                item: item.into_owned(),
                feasible_pos: None,
            });
            self.insertions += 1;
            return FeedOutcome {
                inserted: true,
                evicted: None,
            };
        }
        if self.items_seen as usize == self.capacity + 1 {
            self.pin_filled_slots();
        }

        let feasible_before = self.feasible.len();
        let free_before = self.free.value();
        let part = self.repartition(weight);
        let free_after = part.free.value();
        let rho = part.room as f64 / free_after;
        let p_new = if part.new_pinned {
            1.0
        } else {
            (rho * weight).min(1.0)
        };

        let enters = if part.new_pinned {
            true
        } else if use_jumps {
            let u = match self.jump.pending {
                Some(u) => u,
                None => {
                    let u = self.rng.next_unit();
                    self.jump = JumpState {
                        pending: Some(u),
                        survival: 1.0,
                    };
                    u
                }
            };
            self.jump.survival *= 1.0 - p_new;
            if crossed(self.jump.survival, u) {
                self.jump = JumpState::default();
                true
            } else {
                false
            }
        } else {
            self.rng.next_unit() < p_new
        };

        let mut released = part.released;
        let mut evicted = None;
        if enters {
            // Eviction masses: 1 - pi_new/pi_old per occupant.
            let released_mass: Vec<f64> = released
                .iter()
                .map(|p| (1.0 - rho * p.weight).max(0.0))
                .collect();
            let feasible_mass = if feasible_before == 0 {
                0.0
            } else {
                let room_before = feasible_before as f64;
                let numer =
                    room_before * part.grown - (part.room as f64 - room_before) * free_before;
                (numer / (room_before * free_after)).max(0.0)
            };
            let candidates = released.len() + feasible_before;
            let target = if candidates > 1 {
                let total: f64 =
                    released_mass.iter().sum::<f64>() + feasible_mass * feasible_before as f64;
                Some(self.rng.next_unit() * total)
            } else {
                None
            };
            let choice = pick_victim(target, &released_mass, feasible_mass, feasible_before);
            let victim_slot = match choice {
                Victim::Released(i) => released.swap_remove(i).slot,
                Victim::Feasible(i) => self.feasible[i],
            };
            evicted = Some(self.place(victim_slot, item.into_owned(), part.new_pinned));
            self.insertions += 1;
        }
        for p in released {
            self.mark_feasible(p.slot);
        }
        self.free = part.free;
        FeedOutcome {
            inserted: enters,
            evicted,
        }
    }

    /// Items admitted while filling were taken with probability 1; treat them
    /// as pinned so the first post-fill arrival releases them one by one.
    fn pin_filled_slots(&mut self) {
        self.feasible.clear();
        self.free = CompensatedSum::default();
        for (slot, s) in self.slots.iter_mut().enumerate() {
            s.feasible_pos = None;
            self.pinned.push(Reverse(Pinned {
                weight: s.item.weight,
                seq: s.item.seq,
                slot,
            }));
        }
    }

    /// Releases tracked items lightest first until the fixed point holds,
    /// with the arrival tentatively counted as pinned.
    fn repartition(&mut self, weight: f64) -> Partition {
        let mut free = self.free;
        let mut count = self.pinned.len() + 1;
        let mut new_pinned = true;
        let mut released = Vec::new();
        let mut grown = 0.0;
        loop {
            let top = self.pinned.peek().map(|r| r.0.weight);
            let (w_min, is_new) = match (new_pinned, top) {
                (true, Some(t)) if t < weight => (t, false),
                (true, _) => (weight, true),
                (false, Some(t)) => (t, false),
                (false, None) => break,
            };
            let room = self.capacity as f64 - count as f64;
            if room * w_min > free.value() {
                break;
            }
            count -= 1;
            free.add(w_min);
            grown += w_min;
            if is_new {
                new_pinned = false;
            } else if let Some(Reverse(p)) = self.pinned.pop() {
                released.push(p);
            }
        }
        Partition {
            new_pinned,
            released,
            free,
            grown,
            room: self.capacity - count,
        }
    }

    fn place(&mut self, slot: usize, item: WeightedItem, pinned: bool) -> WeightedItem {
        let seq = item.seq;
        let weight = item.weight;
        let old = std::mem::replace(&mut self.slots[slot].item, item);
        match (self.slots[slot].feasible_pos, pinned) {
            (Some(_), false) => {}
            (None, false) => self.mark_feasible(slot),
            (Some(pos), true) => {
                self.unmark_feasible(pos);
                self.pinned.push(Reverse(Pinned { weight, seq, slot }));
            }
            (None, true) => self.pinned.push(Reverse(Pinned { weight, seq, slot })),
        }
        old
    }

    fn mark_feasible(&mut self, slot: usize) {
        self.slots[slot].feasible_pos = Some(self.feasible.len());
        self.feasible.push(slot);
    }

    fn unmark_feasible(&mut self, pos: usize) {
        let slot = self.feasible.swap_remove(pos);
        self.slots[slot].feasible_pos = None;
        if let Some(&moved) = self.feasible.get(pos) {
            self.slots[moved].feasible_pos = Some(pos);
        }
    }

    pub(crate) fn occupants(&self) -> impl Iterator<Item = &WeightedItem> {
        self.slots.iter().map(|s| &s.item)
    }

    pub fn get_sample(&self) -> Sample {
        Sample::unordered(self.slots.iter().map(|s| s.item.clone()))
    }
}

enum Victim {
    Released(usize),
    Feasible(usize),
}

fn pick_victim(
    target: Option<f64>,
    released: &[f64],
    feasible_mass: f64,
    feasible: usize,
) -> Victim {
    let Some(mut rest) = target else {
        return if released.is_empty() {
            Victim::Feasible(0)
        } else {
            Victim::Released(0)
        };
    };
    for (i, &mass) in released.iter().enumerate() {
        if rest < mass {
            return Victim::Released(i);
        }
        rest -= mass;
    }
    if feasible == 0 {
        return Victim::Released(released.len() - 1);
    }
    let idx = if feasible_mass > 0.0 {
        (rest / feasible_mass) as usize
    } else {
        0
    };
    Victim::Feasible(idx.min(feasible - 1))
}

impl StreamSampler for ChaoReservoir {
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
        ChaoReservoir::get_sample(self)
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
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(seq: u64, w: f64) -> WeightedItem {
        WeightedItem::new(seq, format!("i{seq}"), w).unwrap()
    }

    fn fed(m: usize, weights: &[f64], seed: u64) -> ChaoReservoir {
        let mut r = ChaoReservoir::new(m, RandomSource::new(seed)).unwrap();
        for (i, &w) in weights.iter().enumerate() {
            r.feed(item(i as u64, w)).unwrap();
        }
        r
    }

    #[test]
    fn hypothetical_probability_all_feasible() {
        let r = fed(2, &[1.0, 1.0, 1.0, 2.0], 0);
        assert!((r.insertion_probability(3.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn hypothetical_probability_infeasible_is_one() {
        let r = fed(2, &[1.0, 1.0, 1.0], 0);
        assert_eq!(r.insertion_probability(4.0), 1.0);
    }

    #[test]
    fn hypothetical_probability_right_after_fill() {
        let r = fed(2, &[1.0, 1.0], 0);
        assert!((r.insertion_probability(1.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_item_is_pinned() {
        for seed in 0..50 {
            let r = fed(2, &[1.0, 1.0, 1.0, 4.0], seed);
            assert_eq!(r.infeasible(), vec![(3, 4.0)]);
            assert!(r.get_sample().contains(3));
            let p = r.occupant_probability(3).unwrap();
            assert_eq!(p, 1.0);
            let other = r.get_sample().seqs().into_iter().find(|&s| s != 3).unwrap();
            assert!((r.occupant_probability(other).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_item_released_when_stream_grows() {
        let r = fed(2, &[1.0, 1.0, 1.0, 4.0, 3.0], 1);
        assert!(r.infeasible().is_empty());
        assert!((r.feasibility_threshold().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn filling_phase_has_no_partition() {
        let r = fed(2, &[1.0, 1.0], 0);
        assert!(r.infeasible().is_empty());
        assert_eq!(r.feasibility_threshold(), None);
        assert_eq!(r.get_sample().len(), 2);
        assert_eq!(r.rng_draws(), 0);
    }

    #[test]
    fn sample_sizes_follow_capacity() {
        let r = ChaoReservoir::new(3, RandomSource::new(0)).unwrap();
        assert!(r.get_sample().is_empty());
        assert_eq!(fed(3, &[1.0, 2.0], 0).get_sample().len(), 2);
        assert_eq!(
            fed(3, &[1.0, 2.0, 0.5, 7.0, 1.0, 1.0], 0)
                .get_sample()
                .len(),
            3
        );
    }

    #[test]
    fn out_of_order_feed_is_rejected() {
        let mut r = ChaoReservoir::new(2, RandomSource::new(0)).unwrap();
        r.feed(item(3, 1.0)).unwrap();
        assert_eq!(
            r.feed(item(2, 1.0)),
            Err(WrsError::OutOfOrderFeed { last: 3, got: 2 })
        );
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(matches!(
            ChaoReservoir::new(0, RandomSource::new(0)),
            Err(WrsError::ZeroCapacity)
        ));
    }

    #[test]
    fn survival_product_crossing() {
        assert_eq!(jump_crossing(0.3, &[0.2, 0.25]), Some(1));
        assert_eq!(jump_crossing(0.3, &[0.2]), None);
        assert_eq!(jump_crossing(0.999, &[1.0]), Some(0));
    }

    #[test]
    fn infeasible_arrival_bypasses_pending_jump() {
        let mut r = ChaoReservoir::with_jumps(2, RandomSource::new(5)).unwrap();
        for (i, w) in [1.0, 1.0, 1.0].into_iter().enumerate() {
            r.feed_with_jumps(item(i as u64, w)).unwrap();
        }
        let before = r.jump_state();
        let out = r.feed_with_jumps(item(3, 100.0)).unwrap();
        assert!(out.inserted);
        assert_eq!(r.jump_state().pending, before.pending);
        assert_eq!(r.jump_state().survival, before.survival);
    }

    #[test]
    fn size_one_reservoir_uses_one_draw_per_arrival() {
        let r = fed(1, &[1.0, 2.0, 3.0, 4.0, 5.0], 2);
        assert_eq!(r.rng_draws(), 4);
        assert_eq!(r.get_sample().len(), 1);
    }
}
