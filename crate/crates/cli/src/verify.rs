//! Verification suites: samplers against exact laws and against each other.

use std::str::FromStr;

use wrs_core::oracle::{
    compare, exact_wrs_n_p, exact_wrs_n_w, exact_wrs_r, monte_carlo, monte_carlo_slots,
    remark1_estimate, stream_from_weights, total_variation,
};
use wrs_core::{
    Backend, ChaoReservoir, EsReservoir, PipelineK, RandomSource, ReplicatedSampler,
    Result as CoreResult, Sample, StreamSampler, VerificationReport, WeightedItem, WrsError,
};

use crate::error::{CliError, Result};

pub const DEFAULT_TRIALS: u64 = 200_000;
pub const REMARK1_TRIALS: u64 = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Examples,
    Remark1,
    Jumps,
    Pipeline,
    Order,
    Replacement,
    All,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "examples" => Suite::Examples,
            "remark1" => Suite::Remark1,
            "jumps" => Suite::Jumps,
            "pipeline" => Suite::Pipeline,
            "order" => Suite::Order,
            "replacement" => Suite::Replacement,
            "all" => Suite::All,
            other => return Err(CliError::Usage(format!("unknown suite {other:?}"))),
        })
    }
}

fn chao(m: usize) -> impl Fn(RandomSource) -> CoreResult<ChaoReservoir> + Sync {
    move |rng| ChaoReservoir::new(m, rng)
}

fn es(m: usize) -> impl Fn(RandomSource) -> CoreResult<EsReservoir> + Sync {
    move |rng| EsReservoir::new(m, rng)
}

fn inclusion<S, F>(factory: F, stream: &[WeightedItem], trials: u64, seed: u64) -> Result<Vec<f64>>
where
    S: StreamSampler,
    F: Fn(RandomSource) -> CoreResult<S> + Sync,
{
    Ok(monte_carlo(factory, stream, trials, seed, false)?.frequencies())
}

/// Inclusion frequencies of A-Chao and A-ES on the golden instances.
pub fn examples(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for (name, weights) in [
        ("w1112", vec![1.0, 1.0, 1.0, 2.0]),
        ("w1114", vec![1.0, 1.0, 1.0, 4.0]),
    ] {
        let stream = stream_from_weights(&weights)?;
        let p = inclusion(chao(2), &stream, trials, seed)?;
        out.push(
            compare(&exact_wrs_n_p(&weights, 2)?, &p, 0.01)?
                .named(format!("{name}-chao"))
                .with_trials(trials),
        );
        let w = inclusion(es(2), &stream, trials, seed)?;
        out.push(
            compare(&exact_wrs_n_w(&weights, 2)?, &w, 0.01)?
                .named(format!("{name}-es"))
                .with_trials(trials),
        );
        if name == "w1114" {
            out.push(VerificationReport::from_parts(
                "w1114-chao-heavy-always-kept",
                vec![1.0],
                vec![p[3]],
                trials,
                0.0,
            )?);
        }
    }
    let weights = [1.0, 1.0, 1.0, 4.0, 3.0];
    let stream = stream_from_weights(&weights)?;
    let p = inclusion(chao(2), &stream, trials, seed)?;
    out.push(
        compare(&exact_wrs_n_p(&weights, 2)?, &p, 0.01)?
            .named("w11143-chao")
            .with_trials(trials),
    );
    Ok(out)
}

/// `P[U1^(1/w1) <= U2^(1/w2)] = w2 / (w1 + w2)`.
pub fn remark1(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    [(1.0, 1.0), (1.0, 2.0), (3.0, 5.0)]
        .into_iter()
        .map(|(w1, w2)| {
            let est = remark1_estimate(w1, w2, trials, seed)?;
            Ok(VerificationReport::from_parts(
                format!("key-order-{w1}-{w2}"),
                vec![w2 / (w1 + w2)],
                vec![est],
                trials,
                0.005,
            )?)
        })
        .collect()
}

fn set_tv<A, B, FA, FB>(
    a: FA,
    b: FB,
    stream: &[WeightedItem],
    trials: u64,
    seed: u64,
) -> Result<f64>
where
    A: StreamSampler,
    B: StreamSampler,
    FA: Fn(RandomSource) -> CoreResult<A> + Sync,
    FB: Fn(RandomSource) -> CoreResult<B> + Sync,
{
    let ta = monte_carlo(a, stream, trials, seed, true)?;
    let tb = monte_carlo(b, stream, trials, seed.wrapping_add(1), true)?;
    Ok(total_variation(
        &ta.set_distribution(),
        &tb.set_distribution(),
    ))
}

fn distance_report(
    check: &str,
    tv: f64,
    trials: u64,
    tolerance: f64,
) -> Result<VerificationReport> {
    Ok(VerificationReport::from_parts(
        check,
        vec![0.0],
        vec![tv],
        trials,
        tolerance,
    )?)
}

/// Jump and plain variants give the same sample-set distribution.
pub fn jumps(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    let stream = stream_from_weights(&[1.0, 2.0, 3.0, 4.0, 5.0])?;
    let tv_chao = set_tv(
        chao(2),
        |rng| ChaoReservoir::with_jumps(2, rng),
        &stream,
        trials,
        seed,
    )?;
    let tv_es = set_tv(
        es(2),
        |rng| EsReservoir::with_jumps(2, rng),
        &stream,
        trials,
        seed,
    )?;
    Ok(vec![
        distance_report("jumps-chao-tv", tv_chao, trials, 0.01)?,
        distance_report("jumps-es-tv", tv_es, trials, 0.01)?,
    ])
}

/// A pipeline that checks every item's cap after each arrival.
struct CapChecked {
    inner: PipelineK,
    caps: Vec<usize>,
}

impl StreamSampler for CapChecked {
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }
    fn feed_item(&mut self, item: WeightedItem) -> CoreResult<()> {
        let k = self.caps[item.seq as usize % self.caps.len()].min(self.inner.capacity());
        self.inner.feed(item, k)?;
        for e in self.inner.sample().entries {
            let cap = self.caps[e.item.seq as usize % self.caps.len()].min(self.inner.capacity());
            if e.multiplicity as usize > cap {
                return Err(WrsError::BadMultiplicity {
                    k: e.multiplicity as usize,
                    m: cap,
                });
            }
        }
        Ok(())
    }
    fn get_sample(&self) -> Sample {
        self.inner.sample()
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

/// Whether any trial saw an item exceed its multiplicity cap.
pub fn cap_exceeded(backend: Backend, trials: u64, seed: u64) -> Result<bool> {
    let stream = stream_from_weights(&[1.0, 5.0, 2.0, 8.0, 3.0, 1.0, 4.0])?;
    let caps = vec![1, 3, 2, 2, 1, 3, 2];
    let factory = |rng: RandomSource| {
        Ok(CapChecked {
            inner: PipelineK::new(3, backend, &rng, 1)?,
            caps: caps.clone(),
        })
    };
    match monte_carlo(factory, &stream, trials, seed, false) {
        Ok(_) => Ok(false),
        Err(WrsError::BadMultiplicity { .. }) => Ok(true),
        Err(e) => Err(e.into()),
    }
}

/// Caps hold on every trial, and `k = m` matches sampling with replacement.
pub fn pipeline(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    for backend in [Backend::Chao, Backend::Es] {
        let exceeded = cap_exceeded(backend, trials, seed)?;
        out.push(VerificationReport::from_parts(
            format!("pipeline-{backend}-cap-exceeded"),
            vec![0.0],
            vec![f64::from(u8::from(exceeded))],
            trials,
            0.0,
        )?);
    }
    let stream = stream_from_weights(&[1.0, 2.0, 3.0, 4.0])?;
    for backend in [Backend::Chao, Backend::Es] {
        let tv = set_tv(
            |rng| PipelineK::new(2, backend, &rng, 2),
            |rng| ReplicatedSampler::new(2, backend, &rng),
            &stream,
            trials,
            seed,
        )?;
        out.push(distance_report(
            &format!("pipeline-{backend}-k2-vs-replacement-tv"),
            tv,
            trials,
            0.02,
        )?);
    }
    Ok(out)
}

/// A-ES inclusion frequencies on a stream and on its reversal.
pub fn order(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    let weights = [5.0, 1.0, 0.5, 3.0, 2.0, 1.0];
    let forward = inclusion(es(3), &stream_from_weights(&weights)?, trials, seed)?;
    let reversed: Vec<f64> = weights.iter().rev().copied().collect();
    let mut back = inclusion(
        es(3),
        &stream_from_weights(&reversed)?,
        trials,
        seed.wrapping_add(1),
    )?;
    back.reverse();
    Ok(vec![VerificationReport::from_parts(
        "order-es-reversal",
        forward,
        back,
        trials,
        0.01,
    )?])
}

/// Per-slot laws of sampling with replacement, and agreement of backends.
pub fn replacement(trials: u64, seed: u64) -> Result<Vec<VerificationReport>> {
    let weights = [1.0, 2.0, 3.0, 4.0];
    let stream = stream_from_weights(&weights)?;
    let law = exact_wrs_r(&weights)?;
    let m = 3;
    let mut out = Vec::new();
    let mut per_backend = Vec::new();
    for backend in [Backend::Chao, Backend::Es] {
        let slots = monte_carlo_slots(m, backend, &stream, trials, seed)?;
        for (i, freq) in slots.iter().enumerate() {
            out.push(
                compare(&law, freq, 0.01)?
                    .named(format!("replacement-{backend}-slot{i}"))
                    .with_trials(trials),
            );
        }
        per_backend.push(slots.concat());
    }
    out.push(VerificationReport::from_parts(
        "replacement-chao-vs-es",
        per_backend[0].clone(),
        per_backend[1].clone(),
        trials,
        0.01,
    )?);
    Ok(out)
}

/// Runs a suite. `trials` overrides the per-suite defaults.
pub fn run_suite(suite: Suite, trials: Option<u64>, seed: u64) -> Result<Vec<VerificationReport>> {
    let t = trials.unwrap_or(DEFAULT_TRIALS);
    Ok(match suite {
        Suite::Examples => examples(t, seed)?,
        Suite::Remark1 => remark1(trials.unwrap_or(REMARK1_TRIALS), seed)?,
        Suite::Jumps => jumps(t, seed)?,
        Suite::Pipeline => pipeline(t, seed)?,
        Suite::Order => order(t, seed)?,
        Suite::Replacement => replacement(t, seed)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Examples,
                Suite::Remark1,
                Suite::Jumps,
                Suite::Pipeline,
                Suite::Order,
                Suite::Replacement,
            ] {
                all.extend(run_suite(s, trials, seed)?);
            }
            all
        }
    })
}
