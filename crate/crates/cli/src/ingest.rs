//! Line-oriented stream readers: TSV `id<TAB>weight[<TAB>payload]` and JSONL
//! objects with `"id"`, `"weight"` and an optional `"payload"`.

use std::io::BufRead;
use std::str::FromStr;

use serde::Deserialize;
use wrs_core::{parse_weight, validate_item, WeightedItem, WrsError};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Jsonl,
}

impl Format {
    /// JSONL if the line opens an object, TSV otherwise.
    pub fn infer(first_line: &str) -> Self {
        if first_line.trim_start().starts_with('{') {
            Format::Jsonl
        } else {
            Format::Tsv
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(CliError::Usage(format!(
                "unknown format {other:?}, expected tsv or jsonl"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    weight: f64,
    #[serde(default)]
    payload: Option<String>,
}

fn parse_tsv(line: &str, seq: u64) -> Result<WeightedItem, WrsError> {
    let mut fields = line.splitn(3, '\t');
    let id = fields.next().unwrap_or_default();
    let weight = fields
        .next()
        .ok_or_else(|| WrsError::Malformed("expected id<TAB>weight".into()))?;
    let payload = fields.next().unwrap_or_default();
    if id.is_empty() {
        return Err(WrsError::Malformed("empty id".into()));
    }
    validate_item(id, parse_weight(weight, seq)?, payload.as_bytes(), seq)
}

fn parse_jsonl(line: &str, seq: u64) -> Result<WeightedItem, WrsError> {
    let rec: Record = serde_json::from_str(line).map_err(|e| WrsError::Malformed(e.to_string()))?;
    let payload = rec.payload.unwrap_or_default();
    validate_item(&rec.id, rec.weight, payload.as_bytes(), seq)
}

/// Parses one line in the given format.
pub fn parse_line(line: &str, format: Format, seq: u64) -> Result<WeightedItem, WrsError> {
    match format {
        Format::Tsv => parse_tsv(line, seq),
        Format::Jsonl => parse_jsonl(line, seq),
    }
}

/// Streaming reader yielding items with seqs 0, 1, 2, ... Blank lines are
/// ignored. With `skip_bad`, malformed lines are counted instead of failing.
pub struct Ingest<R> {
    reader: R,
    format: Option<Format>,
    skip_bad: bool,
    line_no: u64,
    next_seq: u64,
    skipped: u64,
    buf: String,
}

impl<R: BufRead> Ingest<R> {
    pub fn new(reader: R, format: Option<Format>, skip_bad: bool) -> Self {
        Self {
            reader,
            format,
            skip_bad,
            line_no: 0,
            next_seq: 0,
            skipped: 0,
            buf: String::new(),
        }
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn format(&self) -> Option<Format> {
        self.format
    }
}

impl<R: BufRead> Iterator for Ingest<R> {
    type Item = Result<WeightedItem>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            let format = *self.format.get_or_insert_with(|| Format::infer(line));
            match parse_line(line, format, self.next_seq) {
                Ok(item) => {
                    self.next_seq += 1;
                    return Some(Ok(item));
                }
                Err(_) if self.skip_bad => self.skipped += 1,
                Err(source) => {
                    return Some(Err(CliError::Parse {
                        line: self.line_no,
                        source,
                    }))
                }
            }
        }
    }
}

/// Reads a whole stream into memory.
pub fn ingest<R: BufRead>(
    reader: R,
    format: Option<Format>,
    skip_bad: bool,
) -> Result<(Vec<WeightedItem>, u64)> {
    let mut it = Ingest::new(reader, format, skip_bad);
    let items = it.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((items, it.skipped()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<(Vec<WeightedItem>, u64)> {
        ingest(text.as_bytes(), None, false)
    }

    #[test]
    fn tsv_line() {
        let (items, _) = read("a\t1.5\n").unwrap();
        assert_eq!(items, vec![WeightedItem::new(0, "a", 1.5).unwrap()]);
    }

    #[test]
    fn tsv_payload_and_scientific() {
        let (items, _) = read("a\t2e-3\thello\tworld\r\n").unwrap();
        assert_eq!(items[0].weight, 2e-3);
        assert_eq!(items[0].payload, b"hello\tworld");
    }

    #[test]
    fn negative_weight_names_the_line() {
        match read("a\t-1\n") {
            Err(CliError::Parse { line, source }) => {
                assert_eq!(line, 1);
                assert!(matches!(source, WrsError::NonPositiveWeight { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jsonl_seqs() {
        let (items, _) =
            read("{\"id\":\"x\",\"weight\":2}\n{\"id\":\"y\",\"weight\":3,\"payload\":\"p\"}\n")
                .unwrap();
        assert_eq!(items.iter().map(|i| i.seq).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(items[1].payload, b"p");
    }

    #[test]
    fn empty_stream() {
        assert!(read("").unwrap().0.is_empty());
        assert!(read("\n\n").unwrap().0.is_empty());
    }

    #[test]
    fn skip_bad_counts() {
        let (items, skipped) = ingest("a\t1\nb\tx\nc\t0\nd\t2\n".as_bytes(), None, true).unwrap();
        assert_eq!(skipped, 2);
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].seq, 1);
        assert!(matches!(
            read("a\t1\nb\n"),
            Err(CliError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn core_rejects_the_same_items() {
        for (w, ok) in [
            ("1", true),
            ("0", false),
            ("-2", false),
            ("inf", false),
            ("NaN", false),
            ("1e300", true),
        ] {
            let line = format!("a\t{w}");
            assert_eq!(parse_line(&line, Format::Tsv, 0).is_ok(), ok, "{w}");
        }
    }
}
