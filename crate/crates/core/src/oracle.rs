//! Ground truth for small instances and the Monte Carlo machinery used to
//! check samplers against it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::composite::{Backend, ReplicatedSampler};
use crate::error::{Result, WrsError};
use crate::item::{check_weight, Sample, WeightedItem};
use crate::rng::RandomSource;
use crate::sampler::StreamSampler;

/// Largest number of ordered tuples [`exact_wrs_n_w`] will enumerate.
pub const MAX_ENUMERATED_TUPLES: u64 = 1_000_000;

/// Exact per-item inclusion probabilities. For with-replacement laws `m` is 1
/// and `inclusion` is the per-slot law.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    pub weights: Vec<f64>,
    pub m: usize,
    pub inclusion: Vec<f64>,
}

fn check_weights(weights: &[f64], m: usize) -> Result<()> {
    for (i, &w) in weights.iter().enumerate() {
        check_weight(i as u64, w)?;
    }
    if m > weights.len() {
        return Err(WrsError::SampleLargerThanPopulation {
            n: weights.len(),
            m,
        });
    }
    Ok(())
}

fn tuple_count(n: usize, m: usize) -> Option<u64> {
    (0..m).try_fold(1u64, |acc, i| acc.checked_mul((n - i) as u64))
}

/// Sequential-rounds law: each round picks an unselected item with
/// probability proportional to its weight among the unselected ones.
/// Enumerates every ordered `m`-tuple of distinct items.
pub fn exact_wrs_n_w(weights: &[f64], m: usize) -> Result<ExactLaw> {
    check_weights(weights, m)?;
    let n = weights.len();
    match tuple_count(n, m) {
        Some(c) if c <= MAX_ENUMERATED_TUPLES => {}
        _ => return Err(WrsError::TooLarge { n, m }),
    }
    let total: f64 = weights.iter().sum();
    let mut inclusion = vec![0.0; n];
    let mut chosen = Vec::with_capacity(m);
    let mut used = vec![false; n];
    enumerate(
        weights,
        m,
        total,
        1.0,
        &mut chosen,
        &mut used,
        &mut inclusion,
    );
    Ok(ExactLaw {
        weights: weights.to_vec(),
        m,
        inclusion,
    })
}

fn enumerate(
    weights: &[f64],
    m: usize,
    remaining: f64,
    prob: f64,
    chosen: &mut Vec<usize>,
    used: &mut [bool],
    inclusion: &mut [f64],
) {
    if chosen.len() == m {
        for &i in chosen.iter() {
            inclusion[i] += prob;
        }
        return;
    }
    for i in 0..weights.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        chosen.push(i);
        enumerate(
            weights,
            m,
            remaining - weights[i],
            prob * weights[i] / remaining,
            chosen,
            used,
            inclusion,
        );
        chosen.pop();
        used[i] = false;
    }
}

/// Proportional-inclusion law: infeasible items get probability 1, the rest
/// `(m - |A|) * w / (W - W_A)`.
pub fn exact_wrs_n_p(weights: &[f64], m: usize) -> Result<ExactLaw> {
    check_weights(weights, m)?;
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));

    let mut infeasible = 0;
    let mut infeasible_weight = 0.0;
    for &j in &order {
        let count = infeasible + 1;
        if count > m {
            break;
        }
        let w = weights[j];
        if (m - count) as f64 * w > total - infeasible_weight - w {
            infeasible = count;
            infeasible_weight += w;
        } else {
            break;
        }
    }
    let scale = (m - infeasible) as f64 / (total - infeasible_weight);
    let mut inclusion = vec![0.0; n];
    for (rank, &j) in order.iter().enumerate() {
        inclusion[j] = if rank < infeasible {
            1.0
        } else {
            (scale * weights[j]).min(1.0)
        };
    }
    Ok(ExactLaw {
        weights: weights.to_vec(),
        m,
        inclusion,
    })
}

/// With-replacement law: every slot holds item `i` with probability `w_i / W`.
pub fn exact_wrs_r(weights: &[f64]) -> Result<ExactLaw> {
    if weights.is_empty() {
        return Err(WrsError::Malformed("empty weight vector".into()));
    }
    check_weights(weights, 1)?;
    let total: f64 = weights.iter().sum();
    Ok(ExactLaw {
        weights: weights.to_vec(),
        m: 1,
        inclusion: weights.iter().map(|w| w / total).collect(),
    })
}

/// Largest per-item gap between the proportional and sequential-rounds laws.
pub fn law_gap(weights: &[f64], m: usize) -> Result<f64> {
    let p = exact_wrs_n_p(weights, m)?;
    let w = exact_wrs_n_w(weights, m)?;
    Ok(max_abs_dev(&p.inclusion, &w.inclusion))
}

fn max_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Builds a stream with seqs `0..n`.
pub fn stream_from_weights(weights: &[f64]) -> Result<Vec<WeightedItem>> {
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| WeightedItem::new(i as u64, format!("item{}", i + 1), w))
        .collect()
}

/// Random source of trial `trial` under `base_seed`.
pub fn trial_source(base_seed: u64, trial: u64) -> RandomSource {
    RandomSource::new(base_seed).derive(&format!("trial-{trial}"))
}

pub type Signature = Vec<(u64, u32)>;

/// Counts over many independent trials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tally {
    pub trials: u64,
    /// Stream seqs, in stream order; the counters below are indexed alike.
    pub seqs: Vec<u64>,
    /// Number of trials whose sample contained the item.
    pub inclusion: Vec<u64>,
    /// Sum of the item's multiplicities over all trials.
    pub multiplicity: Vec<u64>,
    /// Counts per sample multiset, when requested.
    pub sets: BTreeMap<Signature, u64>,
}

impl Tally {
    fn empty(seqs: &[u64]) -> Self {
        Self {
            trials: 0,
            seqs: seqs.to_vec(),
            inclusion: vec![0; seqs.len()],
            multiplicity: vec![0; seqs.len()],
            sets: BTreeMap::new(),
        }
    }

    fn record(&mut self, sample: &Sample, track_sets: bool) {
        self.trials += 1;
        for entry in &sample.entries {
            if let Some(i) = self.seqs.iter().position(|&s| s == entry.item.seq) {
                self.inclusion[i] += 1;
                self.multiplicity[i] += u64::from(entry.multiplicity);
            }
        }
        if track_sets {
            *self.sets.entry(sample.signature()).or_insert(0) += 1;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        for (a, b) in self.inclusion.iter_mut().zip(other.inclusion) {
            *a += b;
        }
        for (a, b) in self.multiplicity.iter_mut().zip(other.multiplicity) {
            *a += b;
        }
        for (sig, c) in other.sets {
            *self.sets.entry(sig).or_insert(0) += c;
        }
        self
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.trials.max(1) as f64;
        self.inclusion.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn set_distribution(&self) -> BTreeMap<Signature, f64> {
        let t = self.trials.max(1) as f64;
        self.sets
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / t))
            .collect()
    }
}

/// Runs `trials` independent samplers over `stream`. Trial `t` gets
/// [`trial_source`]`(base_seed, t)`, so the tally depends only on the
/// arguments, whatever the thread scheduling.
pub fn monte_carlo<S, F>(
    factory: F,
    stream: &[WeightedItem],
    trials: u64,
    base_seed: u64,
    track_sets: bool,
) -> Result<Tally>
where
    S: StreamSampler,
    F: Fn(RandomSource) -> Result<S> + Sync,
{
    let seqs: Vec<u64> = stream.iter().map(|it| it.seq).collect();
    (0..trials)
        .into_par_iter()
        .try_fold(
            || Tally::empty(&seqs),
            |mut tally, t| {
                let mut sampler = factory(trial_source(base_seed, t))?;
                for item in stream {
                    sampler.feed_item(item.clone())?;
                }
                tally.record(&sampler.get_sample(), track_sets);
                Ok(tally)
            },
        )
        .try_reduce(|| Tally::empty(&seqs), |a, b| Ok(a.merge(b)))
}

/// Per-slot occupancy frequencies of a replicated sampler: `out[slot][item]`.
pub fn monte_carlo_slots(
    m: usize,
    backend: Backend,
    stream: &[WeightedItem],
    trials: u64,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = stream.len();
    let counts = (0..trials)
        .into_par_iter()
        .try_fold(
            || vec![vec![0u64; n]; m],
            |mut counts, t| {
                let mut sampler = ReplicatedSampler::new(m, backend, &trial_source(base_seed, t))?;
                for item in stream {
                    sampler.feed(item.clone())?;
                }
                for (slot, occ) in sampler.slot_occupants().into_iter().enumerate() {
                    if let Some(i) = occ.and_then(|o| stream.iter().position(|s| s.seq == o.seq)) {
                        counts[slot][i] += 1;
                    }
                }
                Ok::<_, WrsError>(counts)
            },
        )
        .try_reduce(
            || vec![vec![0u64; n]; m],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                Ok(a)
            },
        )?;
    let t = trials.max(1) as f64;
    Ok(counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / t).collect())
        .collect())
}

/// Half the L1 distance between two discrete distributions.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb;
        }
    }
    sum / 2.0
}

/// Fraction of trials with `U1^(1/w1) <= U2^(1/w2)`.
pub fn remark1_estimate(w1: f64, w2: f64, trials: u64, seed: u64) -> Result<f64> {
    check_weight(0, w1)?;
    check_weight(1, w2)?;
    let mut rng = RandomSource::new(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let x1 = rng.next_unit().powf(1.0 / w1);
        let x2 = rng.next_unit().powf(1.0 / w2);
        if x1 <= x2 {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

/// Exact vs. observed values for one check; passes iff the largest absolute
/// deviation is within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub exact: Vec<f64>,
    pub empirical: Vec<f64>,
    pub trials: u64,
    pub max_abs_dev: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn from_parts(
        check: impl Into<String>,
        exact: Vec<f64>,
        empirical: Vec<f64>,
        trials: u64,
        tolerance: f64,
    ) -> Result<Self> {
        if exact.len() != empirical.len() {
            return Err(WrsError::LengthMismatch {
                expected: exact.len(),
                got: empirical.len(),
            });
        }
        let dev = max_abs_dev(&exact, &empirical);
        Ok(Self {
            check: check.into(),
            exact,
            empirical,
            trials,
            max_abs_dev: dev,
            tolerance,
            verdict: if dev <= tolerance {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        })
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn named(mut self, check: impl Into<String>) -> Self {
        self.check = check.into();
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    /// Human-readable block: a verdict line and one line per item.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "[{}] {}: max_abs_dev={:.6} tolerance={:.6} trials={}\n",
            self.verdict.as_str().to_uppercase(),
            self.check,
            self.max_abs_dev,
            self.tolerance,
            self.trials
        );
        for (i, (e, o)) in self.exact.iter().zip(&self.empirical).enumerate() {
            let _ = writeln!(
                out,
                "  {i}: exact={e:.6} empirical={o:.6} dev={:.6}",
                (e - o).abs()
            );
        }
        out
    }

    /// One `key=value` record per line, terminated by a blank line.
    pub fn to_kv(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "check={}\nverdict={}\ntrials={}\nmax_abs_dev={}\ntolerance={}\nexact={}\nempirical={}\n\n",
            self.check,
            self.verdict.as_str(),
            self.trials,
            self.max_abs_dev,
            self.tolerance,
            join(&self.exact),
            join(&self.empirical)
        )
    }
}

/// Compares an exact law with observed frequencies.
pub fn compare(exact: &ExactLaw, empirical: &[f64], tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::from_parts(
        "compare",
        exact.inclusion.clone(),
        empirical.to_vec(),
        0,
        tolerance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chao::ChaoReservoir;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn wrs_n_w_examples() {
        let law = exact_wrs_n_w(&[1.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!(close(
            &law.inclusion,
            &[13.0 / 30.0, 13.0 / 30.0, 13.0 / 30.0, 0.7],
            1e-12
        ));
        let law = exact_wrs_n_w(&[1.0, 1.0, 1.0, 4.0], 2).unwrap();
        assert!(close(&law.inclusion, &[0.381, 0.381, 0.381, 0.857], 5e-4));
        let law = exact_wrs_n_w(&[1.0, 1.0], 1).unwrap();
        assert!(close(&law.inclusion, &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn wrs_n_w_bounds() {
        assert!(matches!(
            exact_wrs_n_w(&[1.0; 40], 5),
            Err(WrsError::TooLarge { .. })
        ));
        assert!(exact_wrs_n_w(&[1.0; 8], 4).is_ok());
        assert!(matches!(
            exact_wrs_n_w(&[1.0; 2], 3),
            Err(WrsError::SampleLargerThanPopulation { .. })
        ));
    }

    #[test]
    fn wrs_n_p_examples() {
        let law = exact_wrs_n_p(&[1.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!(close(&law.inclusion, &[0.4, 0.4, 0.4, 0.8], 1e-12));
        let law = exact_wrs_n_p(&[1.0, 1.0, 1.0, 4.0], 2).unwrap();
        assert!(close(
            &law.inclusion,
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0],
            1e-12
        ));
        let law = exact_wrs_n_p(&[1.0, 1.0, 1.0, 4.0, 3.0], 2).unwrap();
        assert!(close(&law.inclusion, &[0.2, 0.2, 0.2, 0.8, 0.6], 1e-12));
    }

    #[test]
    fn wrs_n_p_whole_population() {
        let law = exact_wrs_n_p(&[1.0, 5.0, 2.0], 3).unwrap();
        assert!(close(&law.inclusion, &[1.0, 1.0, 1.0], 1e-12));
    }

    #[test]
    fn wrs_r_examples() {
        assert!(close(
            &exact_wrs_r(&[1.0, 1.0, 2.0]).unwrap().inclusion,
            &[0.25, 0.25, 0.5],
            1e-15
        ));
        assert_eq!(exact_wrs_r(&[5.0]).unwrap().inclusion, vec![1.0]);
        assert_eq!(exact_wrs_r(&[1.0, 1.0]).unwrap().inclusion, vec![0.5, 0.5]);
        assert!(exact_wrs_r(&[]).is_err());
    }

    #[test]
    fn laws_coincide_for_equal_weights() {
        for (n, m) in [(4, 2), (6, 3), (5, 1)] {
            let w = vec![1.0; n];
            let p = exact_wrs_n_p(&w, m).unwrap();
            let q = exact_wrs_n_w(&w, m).unwrap();
            let expect = vec![m as f64 / n as f64; n];
            assert!(close(&p.inclusion, &expect, 1e-12));
            assert!(close(&q.inclusion, &expect, 1e-12));
        }
    }

    #[test]
    fn compare_examples() {
        let law = |v: Vec<f64>| ExactLaw {
            weights: vec![1.0; v.len()],
            m: 1,
            inclusion: v,
        };
        let r = compare(&law(vec![0.5, 0.5]), &[0.5, 0.5], 0.01).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_abs_dev, 0.0);
        let r = compare(&law(vec![0.4, 0.6]), &[0.42, 0.58], 0.01).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.max_abs_dev - 0.02).abs() < 1e-12);
        let r = compare(&law(vec![0.4, 0.6]), &[0.405, 0.595], 0.01).unwrap();
        assert!(r.passed());
        assert!(matches!(
            compare(&law(vec![0.4, 0.6]), &[0.4], 0.01),
            Err(WrsError::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn report_formats() {
        let r = VerificationReport::from_parts("demo", vec![0.4, 0.6], vec![0.41, 0.59], 100, 0.05)
            .unwrap();
        let kv = r.to_kv();
        assert!(kv.contains("check=demo\n"));
        assert!(kv.contains("verdict=pass\n"));
        assert!(kv.contains("exact=0.4,0.6\n"));
        assert!(r.to_text().starts_with("[PASS] demo:"));
    }

    #[test]
    fn single_trial_frequencies_are_binary() {
        let stream = stream_from_weights(&[1.0, 2.0, 3.0]).unwrap();
        let t = monte_carlo(|rng| ChaoReservoir::new(2, rng), &stream, 1, 0, false).unwrap();
        assert!(t.frequencies().iter().all(|&f| f == 0.0 || f == 1.0));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let stream = stream_from_weights(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = monte_carlo(|rng| ChaoReservoir::new(2, rng), &stream, 2000, 7, true).unwrap();
        let b = monte_carlo(|rng| ChaoReservoir::new(2, rng), &stream, 2000, 7, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 2000);
    }

    #[test]
    fn total_variation_basics() {
        let a: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into();
        let b: BTreeMap<u8, f64> = [(1, 0.5), (2, 0.5)].into();
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
