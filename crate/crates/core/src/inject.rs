//! Synthetic link-layer anomalies and per-point ground truth.
//!
//! Four degradations are injected into clean traces: a permanent drop
//! (SuddenD), a drop with recovery (SuddenR), isolated single-sample
//! drops (InstaD) and a gradual linear decline (SlowD). Onset ranges are
//! given as 1-based sample ordinals and converted to 0-based indices when
//! drawn; all ranges are inclusive.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::trace::{RssiTrace, TraceSchema};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyKind {
    SuddenD,
    SuddenR,
    InstaD,
    SlowD,
    None,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 5] = [
        AnomalyKind::SuddenD,
        AnomalyKind::SuddenR,
        AnomalyKind::InstaD,
        AnomalyKind::SlowD,
        AnomalyKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::SuddenD => "SuddenD",
            AnomalyKind::SuddenR => "SuddenR",
            AnomalyKind::InstaD => "InstaD",
            AnomalyKind::SlowD => "SlowD",
            AnomalyKind::None => "None",
        }
    }

    pub fn is_anomalous(self) -> bool {
        self != AnomalyKind::None
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown anomaly kind {s:?}")))
    }
}

/// Inclusive interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: PartialOrd + Copy> Bounds<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionParams {
    /// 1-based ordinals.
    pub suddend_onset: Bounds<usize>,
    /// 1-based ordinals.
    pub suddenr_onset: Bounds<usize>,
    pub suddenr_duration: Bounds<usize>,
    pub instad_fraction: f64,
    /// 1-based ordinals.
    pub slowd_onset: Bounds<usize>,
    pub slowd_duration: Bounds<usize>,
    pub slowd_slope: Bounds<f64>,
    pub drop_floor: f64,
}

impl Default for InjectionParams {
    fn default() -> Self {
        Self {
            suddend_onset: Bounds::new(200, 280),
            suddenr_onset: Bounds::new(25, 275),
            suddenr_duration: Bounds::new(5, 20),
            instad_fraction: 0.01,
            slowd_onset: Bounds::new(1, 20),
            slowd_duration: Bounds::new(150, 180),
            slowd_slope: Bounds::new(0.5, 1.5),
            drop_floor: 0.0,
        }
    }
}

impl InjectionParams {
    /// Rescales the 300-sample defaults to traces of `length` samples.
    ///
    /// Onset positions and the SlowD window scale with the trace, and the
    /// SlowD slope scales inversely so the total decline over the window
    /// stays the same. SuddenR keeps its absolute duration and its latest
    /// onset is pulled in so the window still fits.
    pub fn for_length(length: usize) -> Self {
        let base = Self::default();
        if length == 300 {
            return base;
        }
        let scale = |v: usize| ((v as f64 * length as f64 / 300.0).round() as usize).max(1);
        let scaled = |b: Bounds<usize>| Bounds::new(scale(b.lo), scale(b.hi).max(scale(b.lo)));
        let suddenr_duration = base.suddenr_duration;
        let mut suddenr_onset = scaled(base.suddenr_onset);
        suddenr_onset.hi = suddenr_onset
            .hi
            .min((length + 1).saturating_sub(suddenr_duration.hi));
        let slowd_duration = scaled(base.slowd_duration);
        let mut slowd_onset = scaled(base.slowd_onset);
        slowd_onset.hi = slowd_onset
            .hi
            .min((length + 1).saturating_sub(slowd_duration.hi));
        let mut suddend_onset = scaled(base.suddend_onset);
        suddend_onset.hi = suddend_onset.hi.min(length);
        let stretch = 300.0 / length as f64;
        let slowd_slope = Bounds::new(base.slowd_slope.lo * stretch, base.slowd_slope.hi * stretch);
        Self {
            suddend_onset,
            suddenr_onset,
            suddenr_duration,
            slowd_onset,
            slowd_duration,
            slowd_slope,
            ..base
        }
    }

    /// Checks that every interval is nonempty and every drawable window
    /// fits inside a trace of `length` samples.
    pub fn validate(&self, length: usize, schema: &TraceSchema) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let onsets = [
            ("suddend_onset", self.suddend_onset),
            ("suddenr_onset", self.suddenr_onset),
            ("slowd_onset", self.slowd_onset),
        ];
        for (name, b) in onsets {
            if b.is_empty() || b.lo == 0 {
                return cfg(format!("{name} [{}, {}] must be a nonempty range of 1-based ordinals", b.lo, b.hi));
            }
        }
        for (name, b) in [("suddenr_duration", self.suddenr_duration), ("slowd_duration", self.slowd_duration)] {
            if b.is_empty() || b.lo == 0 {
                return cfg(format!("{name} [{}, {}] must be a nonempty range of positive counts", b.lo, b.hi));
            }
        }
        if self.slowd_slope.is_empty() || !self.slowd_slope.lo.is_finite() || !self.slowd_slope.hi.is_finite() {
            return cfg("slowd_slope must be a nonempty finite range".into());
        }
        if self.suddend_onset.hi > length {
            return cfg(format!("suddend onset {} beyond trace length {length}", self.suddend_onset.hi));
        }
        if self.suddenr_onset.hi - 1 + self.suddenr_duration.hi > length {
            return cfg(format!(
                "suddenr window {}+{} exceeds trace length {length}",
                self.suddenr_onset.hi, self.suddenr_duration.hi
            ));
        }
        if self.slowd_onset.hi - 1 + self.slowd_duration.hi > length {
            return cfg(format!(
                "slowd window {}+{} exceeds trace length {length}",
                self.slowd_onset.hi, self.slowd_duration.hi
            ));
        }
        if !(self.instad_fraction > 0.0) || instad_count(self.instad_fraction, length) > length {
            return cfg(format!("instad_fraction {} must be in (0, 1]", self.instad_fraction));
        }
        if instad_count(self.instad_fraction, length) == 0 {
            return cfg(format!(
                "instad_fraction {} selects no point of a {length}-sample trace",
                self.instad_fraction
            ));
        }
        if !schema.contains(self.drop_floor) {
            return cfg(format!("drop_floor {} outside schema range", self.drop_floor));
        }
        Ok(())
    }
}

fn instad_count(fraction: f64, length: usize) -> usize {
    (fraction * length as f64).round() as usize
}

/// What was injected into a trace, with every random draw recorded.
/// Onsets are 0-based sample indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Injection {
    None,
    SuddenD { onset: usize },
    SuddenR { onset: usize, duration: usize },
    InstaD { indices: Vec<usize> },
    SlowD { onset: usize, duration: usize, slope: f64 },
}

impl Injection {
    pub fn kind(&self) -> AnomalyKind {
        match self {
            Injection::None => AnomalyKind::None,
            Injection::SuddenD { .. } => AnomalyKind::SuddenD,
            Injection::SuddenR { .. } => AnomalyKind::SuddenR,
            Injection::InstaD { .. } => AnomalyKind::InstaD,
            Injection::SlowD { .. } => AnomalyKind::SlowD,
        }
    }

    /// Per-point ground truth implied by the descriptor.
    pub fn label_mask(&self, length: usize) -> Vec<u8> {
        let mut labels = vec![0u8; length];
        let mut mark = |range: std::ops::Range<usize>| {
            for l in &mut labels[range.start.min(length)..range.end.min(length)] {
                *l = 1;
            }
        };
        match self {
            Injection::None => {}
            Injection::SuddenD { onset } => mark(*onset..length),
            Injection::SuddenR { onset, duration } | Injection::SlowD { onset, duration, .. } => {
                mark(*onset..onset + duration)
            }
            Injection::InstaD { indices } => {
                for &i in indices {
                    mark(i..i + 1);
                }
            }
        }
        labels
    }
}

/// A trace after injection with one label per sample (1 = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub trace: RssiTrace,
    pub labels: Vec<u8>,
    pub injection: Injection,
}

impl LabeledTrace {
    pub fn clean(trace: RssiTrace) -> Self {
        let labels = vec![0; trace.len()];
        Self {
            trace,
            labels,
            injection: Injection::None,
        }
    }

    pub fn kind(&self) -> AnomalyKind {
        self.injection.kind()
    }

    pub fn anomalous_points(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    fn from_injection(original: &RssiTrace, samples: Vec<f64>, injection: Injection) -> Self {
        let labels = injection.label_mask(samples.len());
        Self {
            trace: original.with_samples(samples),
            labels,
            injection,
        }
    }
}

fn draw_onset<R: Rng + ?Sized>(rng: &mut R, ordinals: Bounds<usize>) -> usize {
    rng.gen_range(ordinals.lo..=ordinals.hi) - 1
}

pub fn inject_suddend<R: Rng + ?Sized>(
    trace: &RssiTrace,
    params: &InjectionParams,
    schema: &TraceSchema,
    rng: &mut R,
) -> Result<LabeledTrace> {
    params.validate(trace.len(), schema)?;
    let onset = draw_onset(rng, params.suddend_onset);
    let mut samples = trace.samples().to_vec();
    for s in &mut samples[onset..] {
        *s = params.drop_floor;
    }
    Ok(LabeledTrace::from_injection(trace, samples, Injection::SuddenD { onset }))
}

pub fn inject_suddenr<R: Rng + ?Sized>(
    trace: &RssiTrace,
    params: &InjectionParams,
    schema: &TraceSchema,
    rng: &mut R,
) -> Result<LabeledTrace> {
    params.validate(trace.len(), schema)?;
    let onset = draw_onset(rng, params.suddenr_onset);
    let duration = rng.gen_range(params.suddenr_duration.lo..=params.suddenr_duration.hi);
    let mut samples = trace.samples().to_vec();
    for s in &mut samples[onset..onset + duration] {
        *s = params.drop_floor;
    }
    Ok(LabeledTrace::from_injection(
        trace,
        samples,
        Injection::SuddenR { onset, duration },
    ))
}

pub fn inject_instad<R: Rng + ?Sized>(
    trace: &RssiTrace,
    params: &InjectionParams,
    schema: &TraceSchema,
    rng: &mut R,
) -> Result<LabeledTrace> {
    params.validate(trace.len(), schema)?;
    let k = instad_count(params.instad_fraction, trace.len());
    let mut indices = rand::seq::index::sample(rng, trace.len(), k).into_vec();
    indices.sort_unstable();
    let mut samples = trace.samples().to_vec();
    for &i in &indices {
        samples[i] = params.drop_floor;
    }
    Ok(LabeledTrace::from_injection(trace, samples, Injection::InstaD { indices }))
}

/// Gradual decline: inside the window each sample is lowered by
/// `slope * (x - onset)` and clamped to the schema range.
pub fn inject_slowd<R: Rng + ?Sized>(
    trace: &RssiTrace,
    params: &InjectionParams,
    schema: &TraceSchema,
    rng: &mut R,
) -> Result<LabeledTrace> {
    params.validate(trace.len(), schema)?;
    let onset = draw_onset(rng, params.slowd_onset);
    let duration = rng.gen_range(params.slowd_duration.lo..=params.slowd_duration.hi);
    let slope = if params.slowd_slope.lo == params.slowd_slope.hi {
        params.slowd_slope.lo
    } else {
        rng.gen_range(params.slowd_slope.lo..=params.slowd_slope.hi)
    };
    let samples = apply_slowd(trace.samples(), onset, duration, slope, schema);
    Ok(LabeledTrace::from_injection(
        trace,
        samples,
        Injection::SlowD {
            onset,
            duration,
            slope,
        },
    ))
}

/// The SlowD update with fixed draws.
pub fn apply_slowd(
    samples: &[f64],
    onset: usize,
    duration: usize,
    slope: f64,
    schema: &TraceSchema,
) -> Vec<f64> {
    let mut out = samples.to_vec();
    for (x, s) in out.iter_mut().enumerate().skip(onset).take(duration) {
        let offset = (-slope * (x - onset) as f64).min(0.0);
        *s = schema.clamp(*s + offset);
    }
    out
}

pub fn inject<R: Rng + ?Sized>(
    kind: AnomalyKind,
    trace: &RssiTrace,
    params: &InjectionParams,
    schema: &TraceSchema,
    rng: &mut R,
) -> Result<LabeledTrace> {
    match kind {
        AnomalyKind::SuddenD => inject_suddend(trace, params, schema, rng),
        AnomalyKind::SuddenR => inject_suddenr(trace, params, schema, rng),
        AnomalyKind::InstaD => inject_instad(trace, params, schema, rng),
        AnomalyKind::SlowD => inject_slowd(trace, params, schema, rng),
        AnomalyKind::None => Ok(LabeledTrace::clean(trace.clone())),
    }
}

/// Requested number of traces per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Composition {
    pub suddend: usize,
    pub suddenr: usize,
    pub instad: usize,
    pub slowd: usize,
    pub clean: usize,
}

impl Composition {
    /// 700 of each anomaly, 5692 clean: 8492 traces.
    pub fn paper() -> Self {
        Self::each(700, 5692)
    }

    pub fn each(per_anomaly: usize, clean: usize) -> Self {
        Self {
            suddend: per_anomaly,
            suddenr: per_anomaly,
            instad: per_anomaly,
            slowd: per_anomaly,
            clean,
        }
    }

    pub fn count(&self, kind: AnomalyKind) -> usize {
        match kind {
            AnomalyKind::SuddenD => self.suddend,
            AnomalyKind::SuddenR => self.suddenr,
            AnomalyKind::InstaD => self.instad,
            AnomalyKind::SlowD => self.slowd,
            AnomalyKind::None => self.clean,
        }
    }

    pub fn total(&self) -> usize {
        AnomalyKind::ALL.iter().map(|&k| self.count(k)).sum()
    }

    pub fn anomalous(&self) -> usize {
        self.total() - self.clean
    }
}

/// Draws the requested composition from a pool of clean traces. Each
/// source trace is used at most once. Every output trace gets its own
/// random stream derived from `master_seed` and its position, so the
/// result does not depend on thread scheduling.
pub fn build_dataset(
    clean: &[RssiTrace],
    composition: &Composition,
    params: &InjectionParams,
    schema: &TraceSchema,
    master_seed: u64,
) -> Result<Vec<LabeledTrace>> {
    let total = composition.total();
    if total > clean.len() {
        return Err(Error::Capacity {
            requested: total,
            available: clean.len(),
        });
    }
    if composition.anomalous() > 0 {
        for t in clean {
            params.validate(t.len(), schema)?;
        }
    }
    let mut pool: Vec<usize> = (0..clean.len()).collect();
    pool.shuffle(&mut seed::rng(seed::derive_seed(master_seed, "pool")));
    let jobs: Vec<(usize, AnomalyKind)> = AnomalyKind::ALL
        .iter()
        .flat_map(|&k| std::iter::repeat(k).take(composition.count(k)))
        .zip(pool)
        .map(|(k, src)| (src, k))
        .collect();
    let mut out = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(src, kind))| {
            let mut rng = seed::rng(seed::derive_indexed(master_seed, "inject", i as u64));
            inject(kind, &clean[src], params, schema, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    out.shuffle(&mut seed::rng(seed::derive_seed(master_seed, "order")));
    Ok(out)
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Descriptor {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    onset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    duration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    indices: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    link_id: String,
    kind: AnomalyKind,
    descriptor: Descriptor,
    samples: Vec<f64>,
    labels: Vec<u8>,
}

impl From<&LabeledTrace> for Record {
    fn from(t: &LabeledTrace) -> Self {
        let descriptor = match &t.injection {
            Injection::None => Descriptor::default(),
            Injection::SuddenD { onset } => Descriptor {
                onset: Some(*onset),
                ..Default::default()
            },
            Injection::SuddenR { onset, duration } => Descriptor {
                onset: Some(*onset),
                duration: Some(*duration),
                ..Default::default()
            },
            Injection::InstaD { indices } => Descriptor {
                indices: Some(indices.clone()),
                ..Default::default()
            },
            Injection::SlowD {
                onset,
                duration,
                slope,
            } => Descriptor {
                onset: Some(*onset),
                duration: Some(*duration),
                slope: Some(*slope),
                ..Default::default()
            },
        };
        Record {
            link_id: t.trace.link_id.clone(),
            kind: t.kind(),
            descriptor,
            samples: t.trace.samples().to_vec(),
            labels: t.labels.clone(),
        }
    }
}

impl Record {
    fn into_labeled(self, schema: &TraceSchema, line: usize) -> Result<LabeledTrace> {
        let err = |msg: String| Error::Parse { line, msg };
        let d = self.descriptor;
        let need = |v: Option<usize>, f: &str| v.ok_or_else(|| err(format!("{} record without {f}", self.kind)));
        let injection = match self.kind {
            AnomalyKind::None => Injection::None,
            AnomalyKind::SuddenD => Injection::SuddenD {
                onset: need(d.onset, "onset")?,
            },
            AnomalyKind::SuddenR => Injection::SuddenR {
                onset: need(d.onset, "onset")?,
                duration: need(d.duration, "duration")?,
            },
            AnomalyKind::InstaD => Injection::InstaD {
                indices: d.indices.ok_or_else(|| err("InstaD record without indices".into()))?,
            },
            AnomalyKind::SlowD => Injection::SlowD {
                onset: need(d.onset, "onset")?,
                duration: need(d.duration, "duration")?,
                slope: d.slope.ok_or_else(|| err("SlowD record without slope".into()))?,
            },
        };
        let trace = RssiTrace::new(self.link_id, self.samples, schema)?;
        if self.labels != injection.label_mask(trace.len()) {
            return Err(err(format!(
                "labels of {} disagree with its {} descriptor",
                trace.link_id, self.kind
            )));
        }
        Ok(LabeledTrace {
            trace,
            labels: self.labels,
            injection,
        })
    }
}

/// Writes one JSON record per line.
pub fn write_dataset<W: Write>(mut w: W, data: &[LabeledTrace]) -> Result<()> {
    for t in data {
        serde_json::to_writer(&mut w, &Record::from(t))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R, schema: &TraceSchema) -> Result<Vec<LabeledTrace>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec.into_labeled(schema, i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{synthesize_clean, SynthProfile};

    fn flat(len: usize, v: f64) -> RssiTrace {
        RssiTrace::new("t", vec![v; len], &TraceSchema::default()).unwrap()
    }

    fn ramp(len: usize) -> RssiTrace {
        let samples = (0..len).map(|i| 30.0 + (i % 7) as f64).collect();
        RssiTrace::new("r", samples, &TraceSchema::default()).unwrap()
    }

    #[test]
    fn suddend_labels_tail() {
        let schema = TraceSchema::default();
        let t = ramp(300);
        let params = InjectionParams {
            suddend_onset: Bounds::new(251, 251),
            ..Default::default()
        };
        let out = inject_suddend(&t, &params, &schema, &mut seed::rng(0)).unwrap();
        assert_eq!(out.injection, Injection::SuddenD { onset: 250 });
        assert_eq!(out.anomalous_points(), 50);
        assert!(out.trace.samples()[250..].iter().all(|&s| s == 0.0));
        assert_eq!(&out.trace.samples()[..250], &t.samples()[..250]);
    }

    #[test]
    fn suddenr_recovers() {
        let schema = TraceSchema::default();
        let t = ramp(300);
        let params = InjectionParams {
            suddenr_onset: Bounds::new(101, 101),
            suddenr_duration: Bounds::new(5, 5),
            ..Default::default()
        };
        let out = inject_suddenr(&t, &params, &schema, &mut seed::rng(0)).unwrap();
        let ones: Vec<usize> = (0..300).filter(|&i| out.labels[i] == 1).collect();
        assert_eq!(ones, vec![100, 101, 102, 103, 104]);
        assert_eq!(out.trace.samples()[105], t.samples()[105]);
        for i in 0..300 {
            if out.labels[i] == 0 {
                assert_eq!(out.trace.samples()[i], t.samples()[i]);
            }
        }
    }

    #[test]
    fn suddenr_durations_within_range() {
        let schema = TraceSchema::default();
        let t = flat(300, 40.0);
        let params = InjectionParams::default();
        let mut rng = seed::rng(5);
        for _ in 0..500 {
            let out = inject_suddenr(&t, &params, &schema, &mut rng).unwrap();
            assert!((5..=20).contains(&out.anomalous_points()));
            let Injection::SuddenR { onset, .. } = out.injection else { panic!() };
            assert!((24..=274).contains(&onset));
        }
    }

    #[test]
    fn instad_three_distinct_points() {
        let schema = TraceSchema::default();
        let t = ramp(300);
        assert_eq!((0.01f64 * 300.0).round() as usize, 3);
        let mut rng = seed::rng(9);
        for _ in 0..50 {
            let out = inject_instad(&t, &InjectionParams::default(), &schema, &mut rng).unwrap();
            let Injection::InstaD { indices } = &out.injection else { panic!() };
            assert_eq!(indices.len(), 3);
            assert_eq!(out.anomalous_points(), 3);
            let mut d = indices.clone();
            d.dedup();
            assert_eq!(d.len(), 3);
            for i in 0..300 {
                if out.labels[i] == 0 {
                    assert_eq!(out.trace.samples()[i], t.samples()[i]);
                } else {
                    assert_eq!(out.trace.samples()[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn instad_rejects_nonpositive_fraction() {
        let params = InjectionParams {
            instad_fraction: 0.0,
            ..Default::default()
        };
        let err = inject_instad(&ramp(300), &params, &TraceSchema::default(), &mut seed::rng(0));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn slowd_footnote_values() {
        let schema = TraceSchema::default();
        let samples = vec![80.0; 200];
        let out = apply_slowd(&samples, 10, 150, 1.0, &schema);
        assert_eq!(out[15], 75.0);
        assert_eq!(out[10], 80.0);
        assert_eq!(out[9], 80.0);
        let low = apply_slowd(&vec![40.0; 200], 5, 150, 1.5, &schema);
        assert_eq!(low[100], 0.0);
        assert_eq!(low[155], 40.0);
    }

    #[test]
    fn slowd_labels_whole_window() {
        let schema = TraceSchema::default();
        let t = flat(300, 60.0);
        let out = inject_slowd(&t, &InjectionParams::default(), &schema, &mut seed::rng(2)).unwrap();
        let Injection::SlowD { onset, duration, slope } = out.injection else { panic!() };
        assert!((0..=19).contains(&onset));
        assert!((150..=180).contains(&duration));
        assert!((0.5..=1.5).contains(&slope));
        assert_eq!(out.labels[onset], 1);
        assert_eq!(out.trace.samples()[onset], 60.0);
        assert_eq!(out.anomalous_points(), duration);
    }

    #[test]
    fn window_exceeding_trace_is_config_error() {
        let schema = TraceSchema::with_length(100);
        let t = RssiTrace::new("s", vec![40.0; 100], &schema).unwrap();
        let err = inject_suddend(&t, &InjectionParams::default(), &schema, &mut seed::rng(0));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn scaled_params_fit_short_traces() {
        for len in [60, 100, 150, 300, 600] {
            let p = InjectionParams::for_length(len);
            p.validate(len, &TraceSchema::with_length(len)).unwrap();
        }
        let p = InjectionParams::for_length(100);
        assert_eq!(p.suddend_onset, Bounds::new(67, 93));
        assert_eq!(p.suddenr_duration, Bounds::new(5, 20));
        assert_eq!(p.slowd_duration, Bounds::new(50, 60));
        assert_eq!(p.slowd_slope, Bounds::new(1.5, 4.5));
        assert_eq!(InjectionParams::for_length(300), InjectionParams::default());
    }

    #[test]
    fn suddend_onset_histogram_uniform() {
        let schema = TraceSchema::default();
        let t = flat(300, 50.0);
        let params = InjectionParams::default();
        let mut rng = seed::rng(17);
        let mut hist = vec![0usize; 300];
        let n = 1000;
        for _ in 0..n {
            let out = inject_suddend(&t, &params, &schema, &mut rng).unwrap();
            let Injection::SuddenD { onset } = out.injection else { panic!() };
            hist[onset] += 1;
        }
        assert!(hist[..199].iter().all(|&c| c == 0));
        assert!(hist[280..].iter().all(|&c| c == 0));
        // 81 cells; chi-square with 80 dof, 0.999 quantile ~ 124.8
        let expected = n as f64 / 81.0;
        let chi2: f64 = hist[199..280]
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 124.8, "chi2 = {chi2}");
    }

    #[test]
    fn injection_is_deterministic() {
        let schema = TraceSchema::default();
        let t = ramp(300);
        for kind in AnomalyKind::ALL {
            let a = inject(kind, &t, &InjectionParams::default(), &schema, &mut seed::rng(4)).unwrap();
            let b = inject(kind, &t, &InjectionParams::default(), &schema, &mut seed::rng(4)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn build_dataset_compositions() {
        let schema = TraceSchema::with_length(100);
        let pool =
            synthesize_clean(520, &schema, &mut seed::rng(1), &SynthProfile::default()).unwrap();
        let params = InjectionParams::for_length(100);
        let comp = Composition::each(50, 300);
        let data = build_dataset(&pool, &comp, &params, &schema, 3).unwrap();
        assert_eq!(data.len(), 500);
        let nonzero = data.iter().filter(|d| d.anomalous_points() > 0).count();
        assert_eq!(nonzero, 200);
        for kind in AnomalyKind::ALL {
            assert_eq!(data.iter().filter(|d| d.kind() == kind).count(), comp.count(kind));
        }
        let mut ids: Vec<_> = data.iter().map(|d| d.trace.link_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 500);

        let single = Composition {
            suddend: 1,
            ..Default::default()
        };
        assert_eq!(build_dataset(&pool, &single, &params, &schema, 3).unwrap().len(), 1);

        let again = build_dataset(&pool, &comp, &params, &schema, 3).unwrap();
        assert_eq!(data, again);
    }

    #[test]
    fn build_dataset_reports_shortfall() {
        let schema = TraceSchema::with_length(100);
        let pool = synthesize_clean(10, &schema, &mut seed::rng(1), &SynthProfile::default()).unwrap();
        let err = build_dataset(&pool, &Composition::each(3, 0), &InjectionParams::for_length(100), &schema, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 12, available: 10 }));
        assert!(err.to_string().contains("short by 2"));
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let schema = TraceSchema::with_length(100);
        let pool = synthesize_clean(60, &schema, &mut seed::rng(8), &SynthProfile::default()).unwrap();
        let data = build_dataset(&pool, &Composition::each(10, 10), &InjectionParams::for_length(100), &schema, 8)
            .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let back = read_dataset(buf.as_slice(), &schema).unwrap();
        assert_eq!(data.len(), back.len());
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.injection, b.injection);
            assert_eq!(a.labels, b.labels);
            let bits = |t: &LabeledTrace| t.trace.samples().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        let mut again = Vec::new();
        write_dataset(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn read_rejects_inconsistent_labels() {
        let line = r#"{"link_id":"a","kind":"SuddenD","descriptor":{"onset":1},"samples":[40,0,0],"labels":[0,1,0]}"#;
        assert!(matches!(
            read_dataset(line.as_bytes(), &TraceSchema::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn unlabeled_points_unchanged_and_in_bounds(
                seed_v in any::<u64>(),
                base in 20.0f64..100.0,
                kind_ix in 0usize..5,
            ) {
                let schema = TraceSchema::default();
                let samples: Vec<f64> = (0..300).map(|i| base + (i % 5) as f64).collect();
                let t = RssiTrace::new("p", samples, &schema).unwrap();
                let kind = AnomalyKind::ALL[kind_ix];
                let out = inject(kind, &t, &InjectionParams::default(), &schema, &mut seed::rng(seed_v)).unwrap();
                prop_assert_eq!(out.labels.len(), 300);
                prop_assert_eq!(out.labels.iter().all(|&l| l == 0), kind == AnomalyKind::None);
                prop_assert_eq!(&out.labels, &out.injection.label_mask(300));
                for i in 0..300 {
                    let s = out.trace.samples()[i];
                    prop_assert!(schema.contains(s));
                    if out.labels[i] == 0 {
                        prop_assert_eq!(s, t.samples()[i]);
                    }
                }
            }
        }
    }
}
