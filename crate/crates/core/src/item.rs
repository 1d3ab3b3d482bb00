//! Stream elements and samples.

use crate::error::{Result, WrsError};

/// One element of a weighted stream.
///
/// `seq` is the arrival index and the true identity of the item; `id` is a
/// free-form label and may repeat within a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedItem {
    pub seq: u64,
    pub id: String,
    pub weight: f64,
    pub payload: Vec<u8>,
}

impl WeightedItem {
    /// Builds an item after checking the weight. Same rules as [`validate_item`].
    pub fn new(seq: u64, id: impl Into<String>, weight: f64) -> Result<Self> {
        check_weight(seq, weight)?;
        Ok(Self {
            seq,
            id: id.into(),
            weight,
            payload: Vec::new(),
        })
    }

    pub fn with_payload(mut self, payload: impl Into<Vec<u8>>) -> Self {
        self.payload = payload.into();
        self
    }
}

pub(crate) fn check_weight(seq: u64, weight: f64) -> Result<()> {
    if !weight.is_finite() {
        return Err(WrsError::NonFiniteWeight { seq });
    }
    if weight <= 0.0 {
        return Err(WrsError::NonPositiveWeight { seq, weight });
    }
    Ok(())
}

/// Checks raw fields and assembles a [`WeightedItem`]. Never clamps.
///
/// Ids containing tabs or line breaks are rejected since they cannot survive
/// the line-oriented formats.
pub fn validate_item(
    raw_id: &str,
    raw_weight: f64,
    payload: &[u8],
    seq: u64,
) -> Result<WeightedItem> {
    if raw_id.contains(['\t', '\n', '\r']) {
        return Err(WrsError::Malformed(format!(
            "item {seq}: id contains a tab or line break"
        )));
    }
    check_weight(seq, raw_weight)?;
    Ok(WeightedItem {
        seq,
        id: raw_id.to_owned(),
        weight: raw_weight,
        payload: payload.to_vec(),
    })
}

/// Parses a decimal or scientific-notation weight, locale independent.
pub fn parse_weight(text: &str, seq: u64) -> Result<f64> {
    let trimmed = text.trim();
    let value: f64 = trimmed
        .parse()
        .map_err(|_| WrsError::Malformed(format!("item {seq}: cannot parse weight {trimmed:?}")))?;
    check_weight(seq, value)?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEntry {
    pub item: WeightedItem,
    pub multiplicity: u32,
}

/// Sampler output: items with their multiplicities.
///
/// `ordered` is set when the entry order carries meaning (largest key first
/// for key-based samplers).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub entries: Vec<SampleEntry>,
    pub ordered: bool,
}

impl Sample {
    pub fn unordered(items: impl IntoIterator<Item = WeightedItem>) -> Self {
        Self {
            entries: items
                .into_iter()
                .map(|item| SampleEntry {
                    item,
                    multiplicity: 1,
                })
                .collect(),
            ordered: false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.multiplicity)).sum()
    }

    pub fn seqs(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.item.seq).collect()
    }

    pub fn contains(&self, seq: u64) -> bool {
        self.entries.iter().any(|e| e.item.seq == seq)
    }

    pub fn multiplicity_of(&self, seq: u64) -> u32 {
        self.entries
            .iter()
            .filter(|e| e.item.seq == seq)
            .map(|e| e.multiplicity)
            .sum()
    }

    /// Canonical multiset signature: `(seq, multiplicity)` sorted by seq.
    pub fn signature(&self) -> Vec<(u64, u32)> {
        let mut sig: Vec<(u64, u32)> = self
            .entries
            .iter()
            .map(|e| (e.item.seq, e.multiplicity))
            .collect();
        sig.sort_unstable();
        sig
    }
}
