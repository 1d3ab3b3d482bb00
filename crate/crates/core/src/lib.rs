//! One-pass weighted random sampling over data streams.
//!
//! Two reservoir algorithms cover the two readings of item weights:
//!
//! * [`chao::ChaoReservoir`] makes each item's inclusion probability
//!   proportional to its weight (WRS-N-P).
//! * [`es::EsReservoir`] keeps the `m` largest keys `u^(1/w)`, which matches
//!   drawing items one at a time proportionally to weight (WRS-N-W).
//!
//! Both come with a jump variant that spends random draws only on the items
//! that actually enter the reservoir. [`composite`] builds sampling with
//! replacement, bounded replacement and recency bias on top of size-1
//! instances, and [`oracle`] holds exact laws plus the Monte Carlo harness.
//!
//! ```
//! use wrs_core::{ChaoReservoir, RandomSource, StreamSampler, WeightedItem};
//!
//! let mut sampler = ChaoReservoir::new(2, RandomSource::new(7)).unwrap();
//! for (seq, w) in [1.0, 1.0, 1.0, 4.0].into_iter().enumerate() {
//!     sampler.feed_item(WeightedItem::new(seq as u64, "x", w).unwrap()).unwrap();
//! }
//! // the heavy item is infeasible and always kept
//! assert!(sampler.get_sample().contains(3));
//! ```

pub mod chao;
pub mod composite;
pub mod error;
pub mod es;
pub mod item;
pub mod oracle;
pub mod rng;
pub mod sampler;

pub use chao::ChaoReservoir;
pub use composite::{
    Backend, BiasFn, BiasMode, BiasPolicy, BiasedSampler, PipelineK, ReplicatedSampler,
};
pub use error::{Result, WrsError};
pub use es::{compute_key, EsReservoir};
pub use item::{parse_weight, validate_item, Sample, SampleEntry, WeightedItem};
pub use oracle::{ExactLaw, Tally, Verdict, VerificationReport};
pub use rng::RandomSource;
pub use sampler::{FeedOutcome, StreamSampler};
