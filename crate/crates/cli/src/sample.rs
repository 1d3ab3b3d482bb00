//! Sampling runs over an item stream.

use std::fmt::Write as _;
use std::str::FromStr;

use wrs_core::{
    Backend, BiasFn, BiasPolicy, BiasedSampler, PipelineK, RandomSource, ReplicatedSampler, Sample,
    StreamSampler, WeightedItem,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Reservoir(Backend),
    WrsR,
    WrsK,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Reservoir(b) => b.name(),
            Algo::WrsR => "wrs-r",
            Algo::WrsK => "wrs-k",
        }
    }
}

impl FromStr for Algo {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wrs-r" => Ok(Algo::WrsR),
            "wrs-k" => Ok(Algo::WrsK),
            _ => s
                .parse::<Backend>()
                .map(Algo::Reservoir)
                .map_err(|_| CliError::Usage(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// `pow:<base>` boosts arrivals by `base^seq`; `decay:<factor>` multiplies
/// occupant weights by `factor` at every arrival (es backends only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasSpec {
    Pow(f64),
    Decay(f64),
}

impl FromStr for BiasSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            CliError::Usage(format!(
                "bad bias {s:?}, expected pow:<base> or decay:<factor>"
            ))
        };
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if !(value.is_finite() && value > 0.0) {
            return Err(bad());
        }
        match kind {
            "pow" => Ok(BiasSpec::Pow(value)),
            "decay" => Ok(BiasSpec::Decay(value)),
            _ => Err(bad()),
        }
    }
}

impl BiasSpec {
    fn policy(self) -> BiasPolicy {
        match self {
            BiasSpec::Pow(base) => BiasPolicy::arrival_boost(BiasFn::Pow(base)),
            BiasSpec::Decay(factor) => BiasPolicy::reservoir_decay(BiasFn::Constant(factor)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub algo: Algo,
    pub size: usize,
    pub seed: u64,
    pub k: Option<usize>,
    pub ordered: bool,
    /// Size-1 backend for `wrs-r` and `wrs-k`.
    pub backend: Option<Backend>,
    pub bias: Option<BiasSpec>,
}

impl SampleConfig {
    pub fn new(algo: Algo, size: usize, seed: u64) -> Self {
        Self {
            algo,
            size,
            seed,
            k: None,
            ordered: false,
            backend: None,
            bias: None,
        }
    }

    /// Rejects flag combinations that do not apply to the algorithm.
    pub fn validate(&self) -> Result<()> {
        let usage = |msg: &str| Err(CliError::Usage(msg.into()));
        if self.size == 0 {
            return usage("--size must be at least 1");
        }
        match (self.algo, self.k) {
            (Algo::WrsK, None) => return usage("wrs-k needs --k"),
            (Algo::WrsK, Some(k)) if k == 0 || k > self.size => {
                return Err(CliError::Usage(format!(
                    "--k must lie in 1..={}",
                    self.size
                )))
            }
            (Algo::WrsK, _) => {}
            (_, Some(_)) => return usage("--k only applies to wrs-k"),
            _ => {}
        }
        let es = matches!(self.algo, Algo::Reservoir(b) if b.is_es());
        if self.ordered && !es {
            return usage("--ordered only applies to es and es-jumps");
        }
        if self.backend.is_some() && matches!(self.algo, Algo::Reservoir(_)) {
            return usage("--backend only applies to wrs-r and wrs-k");
        }
        if matches!(self.bias, Some(BiasSpec::Decay(_))) && !es {
            return usage("decay bias needs es or es-jumps");
        }
        Ok(())
    }

    /// A fresh sampler for this configuration.
    pub fn build(&self) -> Result<Box<dyn StreamSampler>> {
        self.validate()?;
        let rng = RandomSource::new(self.seed);
        let backend = self.backend.unwrap_or(Backend::Chao);
        let base: Box<dyn StreamSampler> = match self.algo {
            Algo::Reservoir(b) => b.reservoir(self.size, rng)?,
            Algo::WrsR => Box::new(ReplicatedSampler::new(self.size, backend, &rng)?),
            Algo::WrsK => Box::new(PipelineK::new(
                self.size,
                backend,
                &rng,
                self.k.unwrap_or(1),
            )?),
        };
        Ok(match self.bias {
            None => base,
            Some(spec) => Box::new(BiasedSampler::new(base, spec.policy())?),
        })
    }
}

/// Feeds every item and returns the final sample.
pub fn run_sample<I>(config: &SampleConfig, items: I) -> Result<Sample>
where
    I: IntoIterator<Item = Result<WeightedItem>>,
{
    let mut sampler = config.build()?;
    for item in items {
        sampler.feed_item(item?)?;
    }
    Ok(if config.ordered {
        sampler
            .ordered_sample()
            .unwrap_or_else(|| sampler.get_sample())
    } else {
        sampler.get_sample()
    })
}

/// `id<TAB>weight<TAB>multiplicity`, one line per entry.
pub fn format_sample(sample: &Sample) -> String {
    let mut out = String::new();
    for e in &sample.entries {
        let _ = writeln!(out, "{}\t{}\t{}", e.item.id, e.item.weight, e.multiplicity);
    }
    out
}
