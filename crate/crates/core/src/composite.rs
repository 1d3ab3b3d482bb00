//! Samplers assembled from size-1 reservoirs: sampling with replacement, with
//! a bounded number of replacements, and recency-biased wrappers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::chao::ChaoReservoir;
use crate::error::{Result, WrsError};
use crate::es::EsReservoir;
use crate::item::{check_weight, Sample, SampleEntry, WeightedItem};
use crate::rng::RandomSource;
use crate::sampler::{FeedOutcome, SeqGuard, StreamSampler};

/// Base algorithm of each size-1 instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Chao,
    ChaoJumps,
    Es,
    EsJumps,
}

impl Backend {
    pub const ALL: [Backend; 4] = [
        Backend::Chao,
        Backend::ChaoJumps,
        Backend::Es,
        Backend::EsJumps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Chao => "chao",
            Backend::ChaoJumps => "chao-jumps",
            Backend::Es => "es",
            Backend::EsJumps => "es-jumps",
        }
    }

    pub fn is_es(self) -> bool {
        matches!(self, Backend::Es | Backend::EsJumps)
    }

    /// A size-`m` reservoir of this kind.
    pub fn reservoir(self, m: usize, rng: RandomSource) -> Result<Box<dyn StreamSampler>> {
        Ok(match self {
            Backend::Chao => Box::new(ChaoReservoir::new(m, rng)?),
            Backend::ChaoJumps => Box::new(ChaoReservoir::with_jumps(m, rng)?),
            Backend::Es => Box::new(EsReservoir::new(m, rng)?),
            Backend::EsJumps => Box::new(EsReservoir::with_jumps(m, rng)?),
        })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = WrsError;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| WrsError::Malformed(format!("unknown backend {s:?}")))
    }
}

#[derive(Debug, Clone)]
enum Instance {
    Chao(ChaoReservoir),
    Es(EsReservoir),
}

impl Instance {
    fn new(backend: Backend, rng: RandomSource) -> Self {
        let one = "size-1 instance";
        match backend {
            Backend::Chao => Instance::Chao(ChaoReservoir::new(1, rng).expect(one)),
            Backend::ChaoJumps => Instance::Chao(ChaoReservoir::with_jumps(1, rng).expect(one)),
            Backend::Es => Instance::Es(EsReservoir::new(1, rng).expect(one)),
            Backend::EsJumps => Instance::Es(EsReservoir::with_jumps(1, rng).expect(one)),
        }
    }

    fn offer(&mut self, item: &WeightedItem) -> FeedOutcome {
        match self {
            Instance::Chao(r) => r.offer(item),
            Instance::Es(r) => r.offer(item),
        }
    }

    fn occupant(&self) -> Option<&WeightedItem> {
        match self {
            Instance::Chao(r) => r.occupants().next(),
            Instance::Es(r) => r.occupants().next(),
        }
    }

    fn rng_draws(&self) -> u64 {
        match self {
            Instance::Chao(r) => r.rng_draws(),
            Instance::Es(r) => r.rng_draws(),
        }
    }
}

fn instances(m: usize, backend: Backend, rng: &RandomSource) -> Result<Vec<Instance>> {
    if m == 0 {
        return Err(WrsError::ZeroCapacity);
    }
    Ok((0..m)
        .map(|i| Instance::new(backend, rng.derive(&format!("slot-{i}"))))
        .collect())
}

/// Multiset summary of slot occupants, ordered by seq.
fn multiset<'a>(occupants: impl Iterator<Item = &'a WeightedItem>) -> Sample {
    let mut counts: BTreeMap<u64, (&WeightedItem, u32)> = BTreeMap::new();
    for item in occupants {
        counts.entry(item.seq).or_insert((item, 0)).1 += 1;
    }
    Sample {
        entries: counts
            .into_values()
            .map(|(item, multiplicity)| SampleEntry {
                item: item.clone(),
                multiplicity,
            })
            .collect(),
        ordered: false,
    }
}

/// WRS-R: `m` independent size-1 samplers, slot `i` seeded from `"slot-i"`.
#[derive(Debug, Clone)]
pub struct ReplicatedSampler {
    backend: Backend,
    slots: Vec<Instance>,
    guard: SeqGuard,
    items_seen: u64,
    insertions: u64,
}

impl ReplicatedSampler {
    pub fn new(m: usize, backend: Backend, rng: &RandomSource) -> Result<Self> {
        Ok(Self {
            backend,
            slots: instances(m, backend, rng)?,
            guard: SeqGuard::default(),
            items_seen: 0,
            insertions: 0,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn feed(&mut self, item: WeightedItem) -> Result<()> {
        check_weight(item.seq, item.weight)?;
        self.guard.admit(item.seq)?;
        self.items_seen += 1;
        for slot in &mut self.slots {
            if slot.offer(&item).inserted {
                self.insertions += 1;
            }
        }
        Ok(())
    }

    pub fn slot_occupants(&self) -> Vec<Option<&WeightedItem>> {
        self.slots.iter().map(Instance::occupant).collect()
    }

    pub fn sample(&self) -> Sample {
        multiset(self.slots.iter().filter_map(Instance::occupant))
    }
}

impl StreamSampler for ReplicatedSampler {
    fn capacity(&self) -> usize {
        self.slots.len()
    }
    fn feed_item(&mut self, item: WeightedItem) -> Result<()> {
        self.feed(item)
    }
    fn get_sample(&self) -> Sample {
        self.sample()
    }
    fn rng_draws(&self) -> u64 {
        self.slots.iter().map(Instance::rng_draws).sum()
    }
    fn items_seen(&self) -> u64 {
        self.items_seen
    }
    fn insertions(&self) -> u64 {
        self.insertions
    }
}

#[derive(Debug, Clone)]
struct Registration {
    item: WeightedItem,
    cap: usize,
    occupancy: usize,
    /// First instance (0-based) the item has not been offered to yet.
    next_instance: usize,
}

/// WRS-k: a pipeline of `m` size-1 instances where each item may occupy at
/// most `k_i` of them.
///
/// An arriving item is offered to instances in order until it holds `k_i`
/// slots or runs out of instances. An occupant displaced by an offer resumes
/// its own cascade at the first instance it has not seen. Cascades run to
/// completion before the next arrival is accepted.
#[derive(Debug, Clone)]
pub struct PipelineK {
    backend: Backend,
    instances: Vec<Instance>,
    /// Only items that could still occupy or re-enter an instance.
    registry: HashMap<u64, Registration>,
    default_k: usize,
    guard: SeqGuard,
    items_seen: u64,
    insertions: u64,
}

impl PipelineK {
    /// `default_k` is the cap used by [`StreamSampler::feed_item`].
    pub fn new(m: usize, backend: Backend, rng: &RandomSource, default_k: usize) -> Result<Self> {
        let instances = instances(m, backend, rng)?;
        if default_k == 0 || default_k > m {
            return Err(WrsError::BadMultiplicity { k: default_k, m });
        }
        Ok(Self {
            backend,
            instances,
            registry: HashMap::new(),
            default_k,
            guard: SeqGuard::default(),
            items_seen: 0,
            insertions: 0,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn feed(&mut self, item: WeightedItem, k: usize) -> Result<()> {
        let m = self.instances.len();
        if k == 0 || k > m {
            return Err(WrsError::BadMultiplicity { k, m });
        }
        check_weight(item.seq, item.weight)?;
        self.guard.admit(item.seq)?;
        self.items_seen += 1;
        let seq = item.seq;
        self.registry.insert(
            seq,
            Registration {
                item,
                cap: k,
                occupancy: 0,
                next_instance: 0,
            },
        );
        self.cascade(seq);
        Ok(())
    }

    fn cascade(&mut self, start: u64) {
        let m = self.instances.len();
        let mut pending = vec![start];
        while let Some(seq) = pending.pop() {
            let mut suspended = false;
            loop {
                let reg = self.registry.get_mut(&seq).expect("registered item");
                if reg.occupancy >= reg.cap || reg.next_instance >= m {
                    break;
                }
                let j = reg.next_instance;
                reg.next_instance += 1;
                let outcome = self.instances[j].offer(&reg.item);
                if !outcome.inserted {
                    continue;
                }
                reg.occupancy += 1;
                self.insertions += 1;
                if let Some(ev) = outcome.evicted {
                    let displaced = self
                        .registry
                        .get_mut(&ev.seq)
                        .expect("occupant is registered");
                    displaced.occupancy -= 1;
                    pending.push(seq);
                    pending.push(ev.seq);
                    suspended = true;
                    break;
                }
            }
            if !suspended && self.registry[&seq].occupancy == 0 {
                self.registry.remove(&seq);
            }
        }
        debug_assert!(self.registry.values().all(|r| r.occupancy <= r.cap));
    }

    /// Occupancy counts per item, by seq.
    pub fn occupancy(&self) -> BTreeMap<u64, usize> {
        self.registry
            .iter()
            .filter(|(_, r)| r.occupancy > 0)
            .map(|(&s, r)| (s, r.occupancy))
            .collect()
    }

    pub fn sample(&self) -> Sample {
        multiset(self.instances.iter().filter_map(Instance::occupant))
    }
}

impl StreamSampler for PipelineK {
    fn capacity(&self) -> usize {
        self.instances.len()
    }
    fn feed_item(&mut self, item: WeightedItem) -> Result<()> {
        self.feed(item, self.default_k)
    }
    fn get_sample(&self) -> Sample {
        self.sample()
    }
    fn rng_draws(&self) -> u64 {
        self.instances.iter().map(Instance::rng_draws).sum()
    }
    fn items_seen(&self) -> u64 {
        self.items_seen
    }
    fn insertions(&self) -> u64 {
        self.insertions
    }
}

/// Positive multiplier as a function of an item's seq.
#[derive(Clone)]
pub enum BiasFn {
    Identity,
    Constant(f64),
    /// `base^seq`.
    Pow(f64),
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl BiasFn {
    pub fn eval(&self, seq: u64) -> f64 {
        match self {
            BiasFn::Identity => 1.0,
            BiasFn::Constant(c) => *c,
            BiasFn::Pow(base) => base.powf(seq as f64),
            BiasFn::Custom(f) => f(seq),
        }
    }
}

impl fmt::Debug for BiasFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasFn::Identity => f.write_str("Identity"),
            BiasFn::Constant(c) => write!(f, "Constant({c})"),
            BiasFn::Pow(b) => write!(f, "Pow({b})"),
            BiasFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMode {
    /// Multiply the arriving item's weight by `g(seq)`.
    ArrivalBoost,
    /// Multiply every occupant's weight by `g(seq)` before the arrival is
    /// fed unchanged. Needs a key-based backend.
    ReservoirDecay,
}

#[derive(Debug, Clone)]
pub struct BiasPolicy {
    pub g: BiasFn,
    pub mode: BiasMode,
}

impl BiasPolicy {
    pub fn arrival_boost(g: BiasFn) -> Self {
        Self {
            g,
            mode: BiasMode::ArrivalBoost,
        }
    }

    pub fn reservoir_decay(g: BiasFn) -> Self {
        Self {
            g,
            mode: BiasMode::ReservoirDecay,
        }
    }
}

/// Wraps a sampler and encodes a bias into the weights. Samples report the
/// original weights.
pub struct BiasedSampler<S> {
    inner: S,
    policy: BiasPolicy,
    original: HashMap<u64, f64>,
}

impl<S: StreamSampler> BiasedSampler<S> {
    pub fn new(inner: S, policy: BiasPolicy) -> Result<Self> {
        if policy.mode == BiasMode::ReservoirDecay && !inner.supports_reweight() {
            return Err(WrsError::BackendMismatch(
                "reservoir decay needs a key-based (es) backend",
            ));
        }
        Ok(Self {
            inner,
            policy,
            original: HashMap::new(),
        })
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn feed(&mut self, mut item: WeightedItem) -> Result<()> {
        let g = self.policy.g.eval(item.seq);
        if !(g.is_finite() && g > 0.0) {
            return Err(WrsError::InvalidBias {
                seq: item.seq,
                value: g,
            });
        }
        let seq = item.seq;
        let weight = item.weight;
        match self.policy.mode {
            BiasMode::ArrivalBoost => {
                let boosted = weight * g;
                if !(boosted.is_finite() && boosted > 0.0) {
                    return Err(WrsError::InvalidBias { seq, value: g });
                }
                item.weight = boosted;
                self.inner.feed_item(item)?;
            }
            BiasMode::ReservoirDecay => {
                check_weight(seq, weight)?;
                self.inner.scale_weights(g)?;
                self.inner.feed_item(item)?;
            }
        }
        self.original.insert(seq, weight);
        self.compact();
        Ok(())
    }

    fn compact(&mut self) {
        let limit = 2 * self.inner.capacity() + 16;
        if self.original.len() > limit {
            let live: std::collections::HashSet<u64> =
                self.inner.get_sample().seqs().into_iter().collect();
            self.original.retain(|seq, _| live.contains(seq));
        }
    }

    fn restore(&self, mut sample: Sample) -> Sample {
        for entry in &mut sample.entries {
            if let Some(&w) = self.original.get(&entry.item.seq) {
                entry.item.weight = w;
            }
        }
        sample
    }

    pub fn sample(&self) -> Sample {
        self.restore(self.inner.get_sample())
    }
}

impl<S: StreamSampler> StreamSampler for BiasedSampler<S> {
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }
    fn feed_item(&mut self, item: WeightedItem) -> Result<()> {
        self.feed(item)
    }
    fn get_sample(&self) -> Sample {
        self.sample()
    }
    fn ordered_sample(&self) -> Option<Sample> {
        self.inner.ordered_sample().map(|s| self.restore(s))
    }
    fn rng_draws(&self) -> u64 {
        self.inner.rng_draws()
    }
    fn items_seen(&self) -> u64 {
        self.inner.items_seen()
    }
    fn insertions(&self) -> u64 {
        self.inner.insertions()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(seq: u64, w: f64) -> WeightedItem {
        WeightedItem::new(seq, format!("i{seq}"), w).unwrap()
    }

    #[test]
    fn single_item_fills_every_slot() {
        for backend in Backend::ALL {
            let mut r = ReplicatedSampler::new(2, backend, &RandomSource::new(0)).unwrap();
            r.feed(item(0, 3.0)).unwrap();
            let s = r.sample();
            assert_eq!(s.len(), 1);
            assert_eq!(s.entries[0].multiplicity, 2);
        }
    }

    #[test]
    fn pipeline_cap_binds_on_first_item() {
        let mut p = PipelineK::new(2, Backend::Chao, &RandomSource::new(0), 1).unwrap();
        p.feed(item(0, 1.0), 1).unwrap();
        let s = p.sample();
        assert_eq!(s.len(), 1);
        assert_eq!(s.entries[0].multiplicity, 1);
        assert_eq!(s.total_multiplicity(), 1);
    }

    #[test]
    fn pipeline_rejects_bad_multiplicity() {
        let mut p = PipelineK::new(3, Backend::Es, &RandomSource::new(0), 1).unwrap();
        assert_eq!(
            p.feed(item(0, 1.0), 0),
            Err(WrsError::BadMultiplicity { k: 0, m: 3 })
        );
        assert_eq!(
            p.feed(item(0, 1.0), 4),
            Err(WrsError::BadMultiplicity { k: 4, m: 3 })
        );
        assert!(PipelineK::new(3, Backend::Es, &RandomSource::new(0), 0).is_err());
    }

    #[test]
    fn empty_pipeline_sample() {
        let p = PipelineK::new(3, Backend::Chao, &RandomSource::new(0), 2).unwrap();
        assert!(p.sample().is_empty());
    }

    #[test]
    fn pipeline_occupancy_matches_instances() {
        for backend in Backend::ALL {
            let mut p = PipelineK::new(4, backend, &RandomSource::new(9), 2).unwrap();
            for i in 0..200u64 {
                p.feed(item(i, 0.5 + (i % 5) as f64), 1 + (i as usize % 4))
                    .unwrap();
                let s = p.sample();
                let occ = p.occupancy();
                assert_eq!(
                    s.signature(),
                    occ.iter().map(|(&q, &c)| (q, c as u32)).collect::<Vec<_>>()
                );
                for e in &s.entries {
                    let k = 1 + (e.item.seq as usize % 4);
                    assert!(e.multiplicity as usize <= k);
                }
                assert!(p.registry.len() <= 4);
            }
        }
    }

    #[test]
    fn pipeline_with_full_cap_equals_replicated() {
        for backend in Backend::ALL {
            let rng = RandomSource::new(21);
            let mut p = PipelineK::new(3, backend, &rng, 3).unwrap();
            let mut r = ReplicatedSampler::new(3, backend, &rng).unwrap();
            for i in 0..100u64 {
                let w = 1.0 + ((i * 7) % 5) as f64;
                p.feed(item(i, w), 3).unwrap();
                r.feed(item(i, w)).unwrap();
            }
            assert_eq!(p.sample(), r.sample());
            assert_eq!(p.rng_draws(), r.rng_draws());
        }
    }

    #[test]
    fn decay_needs_es_backend() {
        let chao = ChaoReservoir::new(2, RandomSource::new(0)).unwrap();
        assert!(matches!(
            BiasedSampler::new(chao, BiasPolicy::reservoir_decay(BiasFn::Constant(0.5))),
            Err(WrsError::BackendMismatch(_))
        ));
    }

    #[test]
    fn identity_bias_is_bit_identical() {
        let rng = RandomSource::new(3);
        let mut plain = ChaoReservoir::new(2, rng.clone()).unwrap();
        let mut biased = BiasedSampler::new(
            ChaoReservoir::new(2, rng).unwrap(),
            BiasPolicy::arrival_boost(BiasFn::Identity),
        )
        .unwrap();
        for i in 0..100u64 {
            plain.feed(item(i, 1.0 + (i % 3) as f64)).unwrap();
            biased.feed(item(i, 1.0 + (i % 3) as f64)).unwrap();
        }
        assert_eq!(plain.get_sample(), biased.sample());
    }

    #[test]
    fn biased_sample_reports_original_weights() {
        for mode in [BiasMode::ArrivalBoost, BiasMode::ReservoirDecay] {
            let inner = EsReservoir::new(3, RandomSource::new(5)).unwrap();
            let g = match mode {
                BiasMode::ArrivalBoost => BiasFn::Pow(1.01),
                BiasMode::ReservoirDecay => BiasFn::Constant(0.9),
            };
            let mut b = BiasedSampler::new(inner, BiasPolicy { g, mode }).unwrap();
            for i in 0..300u64 {
                b.feed(item(i, 1.0 + (i % 4) as f64)).unwrap();
            }
            for e in b.sample().entries {
                assert_eq!(e.item.weight, 1.0 + (e.item.seq % 4) as f64);
            }
            assert!(b.original.len() <= 2 * 3 + 16 + 1);
        }
    }

    #[test]
    fn overflowing_bias_is_an_error() {
        let inner = ChaoReservoir::new(1, RandomSource::new(0)).unwrap();
        let mut b = BiasedSampler::new(inner, BiasPolicy::arrival_boost(BiasFn::Pow(2.0))).unwrap();
        assert!(matches!(
            b.feed(item(5000, 1.0)),
            Err(WrsError::InvalidBias { .. })
        ));
    }

    #[test]
    fn backend_names_round_trip() {
        for b in Backend::ALL {
            assert_eq!(b.name().parse::<Backend>().unwrap(), b);
        }
        assert!("nope".parse::<Backend>().is_err());
    }
}
