//! RSSI traces: schema, raw log ingestion, completeness filtering,
//! synthetic clean links and feature scaling.
//!
//! Raw logs are UTF-8 text with one section per link:
//!
//! ```text
//! # link <id> noise=<label>
//! <seq>,<rssi>
//! <seq>,<rssi>
//! ```
//!
//! Traces are stored as CSV with the header `link_id,idx,rssi`.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Conventions shared by every trace of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSchema {
    pub expected_length: usize,
    pub rssi_min: f64,
    pub rssi_max: f64,
    pub sample_period_ms: u32,
}

impl Default for TraceSchema {
    fn default() -> Self {
        Self {
            expected_length: 300,
            rssi_min: 0.0,
            rssi_max: 128.0,
            sample_period_ms: 100,
        }
    }
}

impl TraceSchema {
    pub fn with_length(expected_length: usize) -> Self {
        Self {
            expected_length,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rssi_min < self.rssi_max) {
            return Err(Error::Config(format!(
                "rssi_min {} must be below rssi_max {}",
                self.rssi_min, self.rssi_max
            )));
        }
        if self.expected_length < 2 {
            return Err(Error::Config("expected_length must be at least 2".into()));
        }
        Ok(())
    }

    pub fn contains(&self, rssi: f64) -> bool {
        rssi.is_finite() && rssi >= self.rssi_min && rssi <= self.rssi_max
    }

    pub fn clamp(&self, rssi: f64) -> f64 {
        rssi.clamp(self.rssi_min, self.rssi_max)
    }
}

/// One link's sequence of RSSI samples, one per sample period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiTrace {
    pub link_id: String,
    samples: Vec<f64>,
}

impl RssiTrace {
    /// Builds a trace, checking length and that every sample lies inside
    /// the schema's RSSI range.
    pub fn new(link_id: impl Into<String>, samples: Vec<f64>, schema: &TraceSchema) -> Result<Self> {
        let link_id = link_id.into();
        if samples.len() < 2 {
            return Err(Error::Schema(format!(
                "trace {link_id} has {} samples, need at least 2",
                samples.len()
            )));
        }
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| !schema.contains(**s)) {
            return Err(Error::Schema(format!(
                "trace {link_id} sample {i} = {s} outside [{}, {}]",
                schema.rssi_min, schema.rssi_max
            )));
        }
        Ok(Self { link_id, samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            link_id: self.link_id.clone(),
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub seq: u64,
    pub rssi: f64,
}

/// An unfiltered link section of a raw measurement log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLinkLog {
    pub link_id: String,
    pub noise_level: String,
    pub records: Vec<RawRecord>,
}

fn parse_header(line: &str, lineno: usize) -> Result<(String, String)> {
    let err = |msg: &str| Error::Parse {
        line: lineno,
        msg: format!("{msg}: {line:?}"),
    };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("#") || tokens.next() != Some("link") {
        return Err(err("expected `# link <id> noise=<label>`"));
    }
    let id = tokens.next().ok_or_else(|| err("missing link id"))?;
    let noise = tokens
        .next()
        .and_then(|t| t.strip_prefix("noise="))
        .ok_or_else(|| err("missing noise=<label>"))?;
    if tokens.next().is_some() {
        return Err(err("trailing tokens in link header"));
    }
    Ok((id.to_string(), noise.to_string()))
}

/// Parses a raw log into one [`RawLinkLog`] per link section, keeping
/// records in file order. Blank lines are ignored.
pub fn ingest_raw_log<R: BufRead>(reader: R, schema: &TraceSchema) -> Result<Vec<RawLinkLog>> {
    let mut logs: Vec<RawLinkLog> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let (link_id, noise_level) = parse_header(line, lineno)?;
            logs.push(RawLinkLog {
                link_id,
                noise_level,
                records: Vec::new(),
            });
            continue;
        }
        let log = logs.last_mut().ok_or_else(|| Error::Parse {
            line: lineno,
            msg: "record before any link header".into(),
        })?;
        let (seq, rssi) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected `<seq>,<rssi>`, got {line:?}"),
        })?;
        let seq: u64 = seq.trim().parse().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad sequence number {seq:?}: {e}"),
        })?;
        let rssi: f64 = rssi.trim().parse().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad rssi {rssi:?}: {e}"),
        })?;
        if !schema.contains(rssi) {
            return Err(Error::Schema(format!(
                "line {lineno}: rssi {rssi} outside [{}, {}]",
                schema.rssi_min, schema.rssi_max
            )));
        }
        if let Some(prev) = log.records.last() {
            if seq <= prev.seq {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("sequence number {seq} not above previous {}", prev.seq),
                });
            }
        }
        log.records.push(RawRecord { seq, rssi });
    }
    Ok(logs)
}

pub fn write_raw_logs<W: Write>(mut w: W, logs: &[RawLinkLog]) -> Result<()> {
    for log in logs {
        writeln!(w, "# link {} noise={}", log.link_id, log.noise_level)?;
        for r in &log.records {
            writeln!(w, "{},{}", r.seq, r.rssi)?;
        }
    }
    Ok(())
}

/// Keeps the links without packet loss: exactly `expected_length` records
/// whose sequence numbers are consecutive.
pub fn filter_complete(logs: &[RawLinkLog], schema: &TraceSchema) -> Vec<RssiTrace> {
    logs.iter()
        .filter(|log| {
            log.records.len() == schema.expected_length
                && log.records.windows(2).all(|p| p[1].seq == p[0].seq + 1)
        })
        .filter_map(|log| {
            let samples = log.records.iter().map(|r| r.rssi).collect();
            RssiTrace::new(log.link_id.clone(), samples, schema).ok()
        })
        .collect()
}

/// Generative profile for synthetic non-anomalous links: a per-link
/// constant baseline plus bounded integer jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub baseline_min: i64,
    pub baseline_max: i64,
    pub jitter: i64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            baseline_min: 25,
            baseline_max: 60,
            jitter: 2,
        }
    }
}

pub fn synthesize_clean<R: Rng + ?Sized>(
    count: usize,
    schema: &TraceSchema,
    rng: &mut R,
    profile: &SynthProfile,
) -> Result<Vec<RssiTrace>> {
    schema.validate()?;
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    if profile.baseline_min > profile.baseline_max {
        return Err(Error::Config(format!(
            "empty baseline range [{}, {}]",
            profile.baseline_min, profile.baseline_max
        )));
    }
    if profile.jitter < 0 {
        return Err(Error::Config("jitter must be non-negative".into()));
    }
    let width = count.to_string().len().max(5);
    let traces = (0..count)
        .map(|i| {
            let baseline = rng.gen_range(profile.baseline_min..=profile.baseline_max);
            let samples = (0..schema.expected_length)
                .map(|_| {
                    let jitter = if profile.jitter == 0 {
                        0
                    } else {
                        rng.gen_range(-profile.jitter..=profile.jitter)
                    };
                    schema.clamp((baseline + jitter) as f64)
                })
                .collect();
            RssiTrace {
                link_id: format!("syn-{i:0width$}"),
                samples,
            }
        })
        .collect();
    Ok(traces)
}

/// Min-max scaling of each sample into `[0, 1]` using the schema bounds.
pub fn normalize<T: Scalar>(trace: &RssiTrace, schema: &TraceSchema) -> Vec<T> {
    let span = schema.rssi_max - schema.rssi_min;
    trace
        .samples
        .iter()
        .map(|&s| T::of((s - schema.rssi_min) / span))
        .collect()
}

pub fn write_traces_csv<W: Write>(w: W, traces: &[RssiTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["link_id", "idx", "rssi"])?;
    for t in traces {
        for (i, s) in t.samples.iter().enumerate() {
            out.write_record([t.link_id.as_str(), &i.to_string(), &s.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the trace CSV. Rows of one link must be contiguous with
/// `idx` counting up from 0.
pub fn read_traces_csv<R: std::io::Read>(r: R, schema: &TraceSchema) -> Result<Vec<RssiTrace>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["link_id", "idx", "rssi"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header link_id,idx,rssi, got {:?}", headers),
        });
    }
    let mut traces = Vec::new();
    let mut current: Option<(String, Vec<f64>)> = None;
    for (i, row) in reader.records().enumerate() {
        let lineno = i + 2;
        let row = row?;
        if row.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 fields, got {}", row.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: lineno,
            msg: format!("bad {what}"),
        };
        let id = &row[0];
        let idx: usize = row[1].parse().map_err(|_| bad("idx"))?;
        let rssi: f64 = row[2].parse().map_err(|_| bad("rssi"))?;
        let continues = matches!(&current, Some((cur, _)) if cur == id);
        if !continues {
            if let Some((cur, samples)) = current.take() {
                traces.push(RssiTrace::new(cur, samples, schema)?);
            }
            current = Some((id.to_string(), Vec::new()));
        }
        let (_, samples) = current.as_mut().expect("current trace");
        if idx != samples.len() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("idx {idx} out of order for link {id}, expected {}", samples.len()),
            });
        }
        samples.push(rssi);
    }
    if let Some((cur, samples)) = current {
        traces.push(RssiTrace::new(cur, samples, schema)?);
    }
    Ok(traces)
}
