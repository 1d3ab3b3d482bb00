//! Timing and counter reports on synthetic streams.

use std::fmt::Write as _;
use std::time::Instant;

use wrs_core::{RandomSource, WeightedItem};

use crate::error::Result;
use crate::sample::{Algo, SampleConfig};

pub const CSV_HEADER: &str = "algorithm,n,m,wall_seconds,rng_draws,insertions";

/// Means over repetitions of one (algorithm, n, m) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub wall_seconds: f64,
    pub rng_draws: f64,
    pub insertions: f64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.9},{},{}",
            self.algorithm, self.n, self.m, self.wall_seconds, self.rng_draws, self.insertions
        )
    }
}

/// `n` items with weights uniform in (0, 1).
pub fn synthetic_stream(n: usize, seed: u64) -> Vec<WeightedItem> {
    let mut rng = RandomSource::new(seed).derive("bench-stream");
    (0..n)
        .map(|i| WeightedItem {
            seq: i as u64,
            id: format!("s{i}"),
            weight: rng.next_unit(),
            payload: Vec::new(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub wall_seconds: f64,
    pub rng_draws: u64,
    pub insertions: u64,
}

/// One run; only the feed loop is timed.
pub fn measure(
    algo: Algo,
    m: usize,
    k: Option<usize>,
    stream: &[WeightedItem],
    seed: u64,
) -> Result<Measurement> {
    let mut config = SampleConfig::new(algo, m, seed);
    if algo == Algo::WrsK {
        config.k = Some(k.unwrap_or(1));
    }
    let mut sampler = config.build()?;
    let items = stream.to_vec();
    let start = Instant::now();
    for item in items {
        sampler.feed_item(item)?;
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(Measurement {
        wall_seconds,
        rng_draws: sampler.rng_draws(),
        insertions: sampler.insertions(),
    })
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algos: Vec<Algo>,
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub seed: u64,
    pub reps: usize,
    /// Multiplicity cap for `wrs-k`.
    pub k: Option<usize>,
}

/// One row per (algorithm, n, m), in that nesting order.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let reps = config.reps.max(1);
    let mut rows = Vec::new();
    for &algo in &config.algos {
        for &n in &config.ns {
            let stream = synthetic_stream(n, config.seed);
            for &m in &config.ms {
                let (mut wall, mut draws, mut ins) = (0.0, 0u64, 0u64);
                for r in 0..reps {
                    let seed = RandomSource::new(config.seed)
                        .derive(&format!("rep-{r}"))
                        .seed();
                    let run = measure(algo, m, config.k, &stream, seed)?;
                    wall += run.wall_seconds;
                    draws += run.rng_draws;
                    ins += run.insertions;
                }
                let r = reps as f64;
                rows.push(BenchRow {
                    algorithm: algo.name().to_owned(),
                    n,
                    m,
                    wall_seconds: wall / r,
                    rng_draws: draws as f64 / r,
                    insertions: ins as f64 / r,
                });
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.to_csv());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use wrs_core::Backend;

    #[test]
    fn grid_shape() {
        let config = BenchConfig {
            algos: vec![
                Algo::Reservoir(Backend::Chao),
                Algo::Reservoir(Backend::EsJumps),
                Algo::WrsK,
            ],
            ns: vec![50, 100],
            ms: vec![1, 5],
            seed: 0,
            reps: 2,
            k: Some(1),
        };
        let rows = run_bench(&config).unwrap();
        assert_eq!(rows.len(), 12);
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.lines().all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn plain_es_draws_once_per_item() {
        let stream = synthetic_stream(1000, 3);
        let run = measure(Algo::Reservoir(Backend::Es), 10, None, &stream, 1).unwrap();
        assert_eq!(run.rng_draws, 1000);
        assert!(stream.iter().all(|i| i.weight > 0.0 && i.weight < 1.0));
    }
}
