//! Python bindings: reservoir samplers, composite samplers and exact laws.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use wrs_core::oracle;
use wrs_core::{
    Backend, ChaoReservoir, EsReservoir, PipelineK, RandomSource, ReplicatedSampler, Sample,
    StreamSampler, WeightedItem, WrsError,
};

fn err(e: WrsError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type Entry = (String, f64, u32);

fn entries(sample: Sample) -> Vec<Entry> {
    sample
        .entries
        .into_iter()
        .map(|e| (e.item.id, e.item.weight, e.multiplicity))
        .collect()
}

fn backend(name: &str) -> PyResult<Backend> {
    name.parse().map_err(err)
}

/// Assigns seqs in arrival order.
#[derive(Default)]
struct Counter(u64);

impl Counter {
    fn item(&mut self, id: &str, weight: f64, payload: Option<&[u8]>) -> PyResult<WeightedItem> {
        let item = wrs_core::validate_item(id, weight, payload.unwrap_or_default(), self.0)
            .map_err(err)?;
        self.0 += 1;
        Ok(item)
    }
}

/// Size-m sampler with inclusion probabilities proportional to weight.
#[pyclass(module = "wrs_stream")]
struct ChaoSampler {
    inner: ChaoReservoir,
    seqs: Counter,
}

#[pymethods]
impl ChaoSampler {
    #[new]
    #[pyo3(signature = (size, seed = 0, jumps = false))]
    fn new(size: usize, seed: u64, jumps: bool) -> PyResult<Self> {
        let rng = RandomSource::new(seed);
        let inner = if jumps {
            ChaoReservoir::with_jumps(size, rng)
        } else {
            ChaoReservoir::new(size, rng)
        };
        Ok(Self {
            inner: inner.map_err(err)?,
            seqs: Counter::default(),
        })
    }

    #[pyo3(signature = (id, weight, payload = None))]
    fn feed(&mut self, id: &str, weight: f64, payload: Option<&[u8]>) -> PyResult<()> {
        let item = self.seqs.item(id, weight, payload)?;
        self.inner.feed_item(item).map_err(err)
    }

    fn sample(&self) -> Vec<Entry> {
        entries(self.inner.get_sample())
    }

    /// Inclusion probability of a hypothetical arrival of this weight.
    fn insertion_probability(&self, weight: f64) -> f64 {
        self.inner.insertion_probability(weight)
    }

    #[getter]
    fn rng_draws(&self) -> u64 {
        self.inner.rng_draws()
    }

    #[getter]
    fn items_seen(&self) -> u64 {
        self.inner.items_seen()
    }
}

/// Size-m sampler keeping the m largest keys `u^(1/w)`.
#[pyclass(module = "wrs_stream")]
struct EsSampler {
    inner: EsReservoir,
    seqs: Counter,
}

#[pymethods]
impl EsSampler {
    #[new]
    #[pyo3(signature = (size, seed = 0, jumps = false))]
    fn new(size: usize, seed: u64, jumps: bool) -> PyResult<Self> {
        let rng = RandomSource::new(seed);
        let inner = if jumps {
            EsReservoir::with_jumps(size, rng)
        } else {
            EsReservoir::new(size, rng)
        };
        Ok(Self {
            inner: inner.map_err(err)?,
            seqs: Counter::default(),
        })
    }

    #[pyo3(signature = (id, weight, payload = None))]
    fn feed(&mut self, id: &str, weight: f64, payload: Option<&[u8]>) -> PyResult<()> {
        let item = self.seqs.item(id, weight, payload)?;
        self.inner.feed_item(item).map_err(err)
    }

    #[pyo3(signature = (ordered = false))]
    fn sample(&self, ordered: bool) -> Vec<Entry> {
        entries(self.inner.get_sample(ordered))
    }

    /// Smallest key once the reservoir is full.
    #[getter]
    fn threshold(&self) -> Option<f64> {
        self.inner.threshold()
    }

    /// Multiplies every occupant's weight by `factor`.
    fn reweight_all(&mut self, factor: f64) -> PyResult<()> {
        self.inner.reweight_all(factor).map_err(err)
    }

    #[getter]
    fn rng_draws(&self) -> u64 {
        self.inner.rng_draws()
    }

    #[getter]
    fn items_seen(&self) -> u64 {
        self.inner.items_seen()
    }
}

/// Sampling with replacement from m independent size-1 reservoirs.
#[pyclass(module = "wrs_stream")]
struct ReplacementSampler {
    inner: ReplicatedSampler,
    seqs: Counter,
}

#[pymethods]
impl ReplacementSampler {
    #[new]
    #[pyo3(signature = (size, seed = 0, backend = "chao"))]
    fn new(size: usize, seed: u64, backend: &str) -> PyResult<Self> {
        let inner = ReplicatedSampler::new(size, self::backend(backend)?, &RandomSource::new(seed))
            .map_err(err)?;
        Ok(Self {
            inner,
            seqs: Counter::default(),
        })
    }

    #[pyo3(signature = (id, weight, payload = None))]
    fn feed(&mut self, id: &str, weight: f64, payload: Option<&[u8]>) -> PyResult<()> {
        let item = self.seqs.item(id, weight, payload)?;
        self.inner.feed(item).map_err(err)
    }

    fn sample(&self) -> Vec<Entry> {
        entries(self.inner.sample())
    }

    /// Occupant id of each slot.
    fn slots(&self) -> Vec<Option<String>> {
        self.inner
            .slot_occupants()
            .into_iter()
            .map(|o| o.map(|it| it.id.clone()))
            .collect()
    }

    #[getter]
    fn rng_draws(&self) -> u64 {
        self.inner.rng_draws()
    }
}

/// Bounded replacement: an item occupies at most k of the m slots.
#[pyclass(module = "wrs_stream")]
struct PipelineSampler {
    inner: PipelineK,
    seqs: Counter,
    k: usize,
}

#[pymethods]
impl PipelineSampler {
    #[new]
    #[pyo3(signature = (size, k = 1, seed = 0, backend = "chao"))]
    fn new(size: usize, k: usize, seed: u64, backend: &str) -> PyResult<Self> {
        let inner = PipelineK::new(size, self::backend(backend)?, &RandomSource::new(seed), k)
            .map_err(err)?;
        Ok(Self {
            inner,
            seqs: Counter::default(),
            k,
        })
    }

    /// `k` overrides the default cap for this item.
    #[pyo3(signature = (id, weight, payload = None, k = None))]
    fn feed(
        &mut self,
        id: &str,
        weight: f64,
        payload: Option<&[u8]>,
        k: Option<usize>,
    ) -> PyResult<()> {
        let item = self.seqs.item(id, weight, payload)?;
        self.inner.feed(item, k.unwrap_or(self.k)).map_err(err)
    }

    fn sample(&self) -> Vec<Entry> {
        entries(self.inner.sample())
    }

    #[getter]
    fn rng_draws(&self) -> u64 {
        self.inner.rng_draws()
    }
}

/// Exact inclusion probabilities of sequential weighted draws.
#[pyfunction]
fn exact_wrs_n_w(weights: Vec<f64>, m: usize) -> PyResult<Vec<f64>> {
    Ok(oracle::exact_wrs_n_w(&weights, m).map_err(err)?.inclusion)
}

/// Exact inclusion probabilities proportional to weight, capped at 1.
#[pyfunction]
fn exact_wrs_n_p(weights: Vec<f64>, m: usize) -> PyResult<Vec<f64>> {
    Ok(oracle::exact_wrs_n_p(&weights, m).map_err(err)?.inclusion)
}

/// Per-slot law of sampling with replacement.
#[pyfunction]
fn exact_wrs_r(weights: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(oracle::exact_wrs_r(&weights).map_err(err)?.inclusion)
}

/// Largest difference between the two without-replacement laws.
#[pyfunction]
fn law_gap(weights: Vec<f64>, m: usize) -> PyResult<f64> {
    oracle::law_gap(&weights, m).map_err(err)
}

/// Estimate of `P[U1^(1/w1) <= U2^(1/w2)]`.
#[pyfunction]
#[pyo3(signature = (w1, w2, trials, seed = 0))]
fn remark1_estimate(py: Python<'_>, w1: f64, w2: f64, trials: u64, seed: u64) -> PyResult<f64> {
    py.detach(|| oracle::remark1_estimate(w1, w2, trials, seed))
        .map_err(err)
}

#[pyfunction]
fn compute_key(u: f64, w: f64) -> PyResult<f64> {
    wrs_core::compute_key(u, w).map_err(err)
}

#[pymodule]
fn wrs_stream(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ChaoSampler>()?;
    m.add_class::<EsSampler>()?;
    m.add_class::<ReplacementSampler>()?;
    m.add_class::<PipelineSampler>()?;
    m.add_function(wrap_pyfunction!(exact_wrs_n_w, m)?)?;
    m.add_function(wrap_pyfunction!(exact_wrs_n_p, m)?)?;
    m.add_function(wrap_pyfunction!(exact_wrs_r, m)?)?;
    m.add_function(wrap_pyfunction!(law_gap, m)?)?;
    m.add_function(wrap_pyfunction!(remark1_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_key, m)?)?;
    Ok(())
}
