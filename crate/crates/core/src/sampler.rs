use crate::error::{Result, WrsError};
use crate::item::{Sample, WeightedItem};

/// Result of offering one item to a reservoir.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeedOutcome {
    pub inserted: bool,
    pub evicted: Option<WeightedItem>,
}

/// One-pass sampler over a weighted stream.
///
/// After any prefix of feeds, [`StreamSampler::get_sample`] returns a valid
/// sample of the items fed so far. Implementations own their random source,
/// so a fixed seed and stream fully determine every sample.
pub trait StreamSampler: Send {
    fn capacity(&self) -> usize;

    fn feed_item(&mut self, item: WeightedItem) -> Result<()>;

    fn get_sample(&self) -> Sample;

    /// Sample in a meaningful order, for samplers that define one.
    fn ordered_sample(&self) -> Option<Sample> {
        None
    }

    /// Number of unit draws consumed so far.
    fn rng_draws(&self) -> u64;

    fn items_seen(&self) -> u64;

    /// Number of times an arriving item took a reservoir slot.
    fn insertions(&self) -> u64;

    fn supports_reweight(&self) -> bool {
        false
    }

    /// Multiplies the weight of every current occupant by `factor`.
    fn scale_weights(&mut self, _factor: f64) -> Result<()> {
        Err(WrsError::BackendMismatch(
            "this sampler cannot reweight reservoir occupants",
        ))
    }
}

impl<S: StreamSampler + ?Sized> StreamSampler for Box<S> {
    fn capacity(&self) -> usize {
        (**self).capacity()
    }
    fn feed_item(&mut self, item: WeightedItem) -> Result<()> {
        (**self).feed_item(item)
    }
    fn get_sample(&self) -> Sample {
        (**self).get_sample()
    }
    fn ordered_sample(&self) -> Option<Sample> {
        (**self).ordered_sample()
    }
    fn rng_draws(&self) -> u64 {
        (**self).rng_draws()
    }
    fn items_seen(&self) -> u64 {
        (**self).items_seen()
    }
    fn insertions(&self) -> u64 {
        (**self).insertions()
    }
    fn supports_reweight(&self) -> bool {
        (**self).supports_reweight()
    }
    fn scale_weights(&mut self, factor: f64) -> Result<()> {
        (**self).scale_weights(factor)
    }
}

/// Tracks the last fed seq and rejects non-increasing arrivals.
#[derive(Debug, Clone, Default)]
pub(crate) struct SeqGuard {
    last: Option<u64>,
}

impl SeqGuard {
    pub(crate) fn admit(&mut self, seq: u64) -> Result<()> {
        if let Some(last) = self.last {
            if seq <= last {
                return Err(WrsError::OutOfOrderFeed { last, got: seq });
            }
        }
        self.last = Some(seq);
        Ok(())
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_guard_rejects_repeats() {
        let mut g = SeqGuard::default();
        g.admit(0).unwrap();
        g.admit(5).unwrap();
        assert_eq!(
            g.admit(5),
            Err(WrsError::OutOfOrderFeed { last: 5, got: 5 })
        );
        assert_eq!(
            g.admit(3),
            Err(WrsError::OutOfOrderFeed { last: 5, got: 3 })
        );
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        let mut naive = 0.0;
        s.add(1e16);
        naive += 1e16;
        for _ in 0..1000 {
            s.add(1.0);
            naive += 1.0;
        }
        s.add(-1e16);
        naive -= 1e16;
        assert_eq!(s.value(), 1000.0);
        assert_ne!(naive, 1000.0);
    }
}
