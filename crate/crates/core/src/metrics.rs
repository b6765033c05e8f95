//! Per-class precision, recall and F1 over per-point predictions.
//!
//! Points are pooled within a split, then each metric is averaged over
//! splits. A metric whose denominator is zero is reported as 0 and the
//! split is flagged.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-vs-rest counts for a single positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same table with the positive class swapped.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Tables for both classes; `anomalous` treats label 1 as positive,
/// `normal` treats label 0 as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassConfusion {
    pub anomalous: ConfusionCounts,
    pub normal: ConfusionCounts,
}

impl ClassConfusion {
    pub fn merge(&mut self, other: &Self) {
        self.anomalous.merge(&other.anomalous);
        self.normal.merge(&other.normal);
    }
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ClassConfusion> {
    if pred.len() != truth.len() {
        return Err(Error::shape(
            "confusion",
            format!("{} predictions for {} labels", pred.len(), truth.len()),
        ));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(ClassConfusion {
        anomalous: c,
        normal: c.swapped(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Scores of one table and whether any denominator was zero.
pub fn precision_recall_f1(c: &ConfusionCounts) -> (Scores, bool) {
    let (precision, d1) = ratio(c.tp, c.tp + c.fp);
    let (recall, d2) = ratio(c.tp, c.tp + c.fn_);
    let (f1, d3) = f1_of(precision, recall);
    (
        Scores {
            precision,
            recall,
            f1,
        },
        d1 || d2 || d3,
    )
}

fn f1_of(precision: f64, recall: f64) -> (f64, bool) {
    let s = precision + recall;
    if s == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / s, false)
    }
}

/// Scores from given precision and recall values.
pub fn scores_from(precision: f64, recall: f64) -> Scores {
    Scores {
        precision,
        recall,
        f1: f1_of(precision, recall).0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: usize,
    pub anomalous: Scores,
    pub normal: Scores,
    pub confusion: ClassConfusion,
    /// Some metric hit a zero denominator and was reported as 0.
    pub zero_denominator: bool,
}

impl SplitMetrics {
    pub fn from_confusion(split: usize, confusion: ClassConfusion) -> Self {
        let (anomalous, za) = precision_recall_f1(&confusion.anomalous);
        let (normal, zn) = precision_recall_f1(&confusion.normal);
        Self {
            split,
            anomalous,
            normal,
            confusion,
            zero_denominator: za || zn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub anomalous: Scores,
    pub normal: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_split: Vec<SplitMetrics>,
    pub averages: ClassScores,
    pub parameter_count: usize,
    pub config: serde_json::Value,
}

fn mean_scores<'a>(it: impl Iterator<Item = &'a Scores>, n: usize) -> Scores {
    let mut acc = Scores::default();
    for s in it {
        acc.precision += s.precision;
        acc.recall += s.recall;
        acc.f1 += s.f1;
    }
    let n = n as f64;
    Scores {
        precision: acc.precision / n,
        recall: acc.recall / n,
        f1: acc.f1 / n,
    }
}

/// Arithmetic mean of every metric across splits.
pub fn aggregate(
    per_split: Vec<SplitMetrics>,
    parameter_count: usize,
    config: serde_json::Value,
) -> Result<EvalReport> {
    if per_split.is_empty() {
        return Err(Error::Config("cannot aggregate zero splits".into()));
    }
    let n = per_split.len();
    let averages = ClassScores {
        anomalous: mean_scores(per_split.iter().map(|s| &s.anomalous), n),
        normal: mean_scores(per_split.iter().map(|s| &s.normal), n),
    };
    Ok(EvalReport {
        per_split,
        averages,
        parameter_count,
        config,
    })
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "parameters: {}", self.parameter_count);
        let _ = writeln!(s, "splits: {}", self.per_split.len());
        let _ = writeln!(
            s,
            "{:<8} {:<14} {:>9} {:>9} {:>9}",
            "split", "class", "precision", "recall", "f1"
        );
        let mut row = |label: &str, class: &str, sc: &Scores, flag: bool| {
            let _ = writeln!(
                s,
                "{:<8} {:<14} {:>9.4} {:>9.4} {:>9.4}{}",
                label,
                class,
                sc.precision,
                sc.recall,
                sc.f1,
                if flag { "  (zero denominator)" } else { "" }
            );
        };
        for m in &self.per_split {
            let label = m.split.to_string();
            row(&label, "anomalous", &m.anomalous, m.zero_denominator);
            row(&label, "non-anomalous", &m.normal, m.zero_denominator);
        }
        row("average", "anomalous", &self.averages.anomalous, false);
        row("average", "non-anomalous", &self.averages.normal, false);
        s
    }

    /// Class by metric table of the averages.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1\n");
        for (class, sc) in [
            ("anomalous", &self.averages.anomalous),
            ("non-anomalous", &self.averages.normal),
        ] {
            let _ = writeln!(s, "{class},{},{},{}", sc.precision, sc.recall, sc.f1);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Maximal runs of 1s as `(start, length)`.
pub fn intervals(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, labels.len() - s));
    }
    out
}

/// Jaccard index of the positive sets of two label vectors; two empty
/// sets score 1.
pub fn jaccard(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("jaccard", format!("lengths {} and {}", a.len(), b.len())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += usize::from(x != 0 && y != 0);
        union += usize::from(x != 0 || y != 0);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
