//! Time series to graph transformation through a Markov transition field.
//!
//! 1. every sample becomes a node carrying its (normalized) value;
//! 2. samples are quantized into quantile bins, a first-order bin
//!    transition matrix `W` is estimated from consecutive samples, and the
//!    field `M[a][b] = W[bin(a)][bin(b)]` relates every pair of time steps;
//! 3. each positive `M[a][b]` becomes the directed edge `a -> b` with that
//!    weight.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::trace::{normalize, RssiTrace, TraceSchema};
use crate::{Error, Result, Scalar};

/// Largest series for which the full `N x N` field is materialized.
pub const DENSE_FIELD_LIMIT: usize = 1024;

/// Quantile bin edges. A value's bin is the number of edges strictly
/// below it.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer<T> {
    edges: Vec<T>,
    requested_bins: usize,
}

impl<T: Scalar> Quantizer<T> {
    /// Places edges at the `k / n_bins` quantiles (`k = 1 .. n_bins - 1`),
    /// interpolating linearly between order statistics. Tied edges are
    /// merged, and edges at or above the series maximum are dropped since
    /// they would only open an empty top bin.
    pub fn fit(series: &[T], n_bins: usize) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::shape("fit_quantizer", "empty series"));
        }
        if n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        let mut sorted = series.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite series"));
        let n = sorted.len();
        let max = sorted[n - 1];
        let mut edges: Vec<T> = (1..n_bins)
            .map(|k| interpolated_quantile(&sorted, k, n_bins))
            .filter(|&e| e < max)
            .collect();
        edges.dedup();
        Ok(Self {
            edges,
            requested_bins: n_bins,
        })
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    /// Effective number of bins after merging ties.
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn requested_bins(&self) -> usize {
        self.requested_bins
    }

    pub fn bin(&self, value: T) -> usize {
        self.edges.partition_point(|&e| e < value)
    }

    pub fn assign(&self, series: &[T]) -> Vec<usize> {
        series.iter().map(|&v| self.bin(v)).collect()
    }
}

/// Quantile `k / q` of an ascending slice. The rank `k (n-1) / q` is split
/// in integer arithmetic so whole ranks hit order statistics exactly.
fn interpolated_quantile<T: Scalar>(sorted: &[T], k: usize, q: usize) -> T {
    let n = sorted.len();
    let scaled = k * (n - 1);
    let (i, rem) = (scaled / q, scaled % q);
    if rem == 0 || i + 1 >= n {
        return sorted[i];
    }
    let (lo, hi) = (sorted[i], sorted[i + 1]);
    let frac = T::of(rem as f64 / q as f64);
    (lo + frac * (hi - lo)).max(lo).min(hi)
}

pub fn fit_quantizer<T: Scalar>(series: &[T], n_bins: usize) -> Result<Quantizer<T>> {
    Quantizer::fit(series, n_bins)
}

/// Row-stochastic bin transition matrix, `q x q` row-major. Rows of bins
/// that never transition anywhere get a self-transition of 1.
pub fn transition_matrix<T: Scalar>(bins: &[usize], q: usize) -> Result<Vec<T>> {
    if let Some(&b) = bins.iter().find(|&&b| b >= q) {
        return Err(Error::shape("transition_matrix", format!("bin {b} >= {q}")));
    }
    let mut counts = vec![0usize; q * q];
    for pair in bins.windows(2) {
        counts[pair[0] * q + pair[1]] += 1;
    }
    let mut w = vec![T::zero(); q * q];
    for i in 0..q {
        let row = &counts[i * q..(i + 1) * q];
        let total: usize = row.iter().sum();
        if total == 0 {
            w[i * q + i] = T::one();
            continue;
        }
        let total = T::of(total as f64);
        for j in 0..q {
            w[i * q + j] = T::of(row[j] as f64) / total;
        }
    }
    Ok(w)
}

/// The bin transition matrix together with the per-time-step field it
/// induces.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionField<T> {
    bins: Vec<usize>,
    n_bins: usize,
    w: Vec<T>,
    dense: Option<Vec<T>>,
}

impl<T: Scalar> TransitionField<T> {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// `W[i][j]`.
    pub fn w(&self, i: usize, j: usize) -> T {
        self.w[i * self.n_bins + j]
    }

    /// Row-major `W`.
    pub fn w_matrix(&self) -> &[T] {
        &self.w
    }

    /// `M[a][b]`.
    pub fn m(&self, a: usize, b: usize) -> T {
        match &self.dense {
            Some(m) => m[a * self.bins.len() + b],
            None => self.w(self.bins[a], self.bins[b]),
        }
    }

    /// Row-major `M` when it was materialized (series up to
    /// [`DENSE_FIELD_LIMIT`] samples).
    pub fn dense(&self) -> Option<&[T]> {
        self.dense.as_deref()
    }
}

pub fn mtf<T: Scalar>(series: &[T], n_bins: usize) -> Result<TransitionField<T>> {
    if series.len() < 2 {
        return Err(Error::shape("mtf", "series needs at least 2 samples"));
    }
    let quantizer = Quantizer::fit(series, n_bins)?;
    let bins = quantizer.assign(series);
    let q = quantizer.n_bins();
    let w = transition_matrix(&bins, q)?;
    let n = bins.len();
    let dense = (n <= DENSE_FIELD_LIMIT).then(|| {
        let mut m = Vec::with_capacity(n * n);
        for &ba in &bins {
            let row = &w[ba * q..(ba + 1) * q];
            m.extend(bins.iter().map(|&bb| row[bb]));
        }
        m
    });
    Ok(TransitionField {
        bins,
        n_bins: q,
        w,
        dense,
    })
}

/// Graph of one trace: a node per sample, a weighted directed edge per
/// positive field entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TsGraph<T> {
    pub node_features: Vec<T>,
    pub edges: Vec<(usize, usize)>,
    pub edge_weights: Vec<T>,
}

impl<T: Scalar> TsGraph<T> {
    pub fn n_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.edges.len() != self.edge_weights.len() {
            return Err(Error::shape(
                "graph",
                format!("{} edges but {} weights", self.edges.len(), self.edge_weights.len()),
            ));
        }
        if let Some(w) = self.edge_weights.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::shape("graph", format!("edge weight {w} not positive")));
        }
        if let Some(e) = self.edges.iter().find(|(a, b)| *a >= n || *b >= n) {
            return Err(Error::shape("graph", format!("edge {e:?} outside {n} nodes")));
        }
        let mut seen = self.edges.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::shape("graph", "duplicate edge"));
        }
        Ok(())
    }
}

pub fn build_graph<T: Scalar>(field: &TransitionField<T>, features: &[T]) -> Result<TsGraph<T>> {
    let n = field.len();
    if features.len() != n {
        return Err(Error::shape(
            "build_graph",
            format!("{} features for a {n}-node field", features.len()),
        ));
    }
    let mut edges = Vec::new();
    let mut edge_weights = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let w = field.m(a, b);
            if w > T::zero() {
                edges.push((a, b));
                edge_weights.push(w);
            }
        }
    }
    Ok(TsGraph {
        node_features: features.to_vec(),
        edges,
        edge_weights,
    })
}

/// Normalize, quantize, estimate transitions and build the graph.
/// `n_bins` defaults to the trace length.
pub fn transform<T: Scalar>(
    trace: &RssiTrace,
    schema: &TraceSchema,
    n_bins: Option<usize>,
) -> Result<TsGraph<T>> {
    let features: Vec<T> = normalize(trace, schema);
    let field = mtf(&features, n_bins.unwrap_or(trace.len()))?;
    build_graph(&field, &features)
}

/// [`transform`] over many traces on a pool of `workers` threads. Output
/// order follows the input.
pub fn transform_many<T: Scalar>(
    traces: &[&RssiTrace],
    schema: &TraceSchema,
    n_bins: Option<usize>,
    workers: usize,
) -> Result<Vec<TsGraph<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| traces.par_iter().map(|t| transform(t, schema, n_bins)).collect())
}

/// Rounds to 9 significant decimal digits, the precision of the graph
/// file format.
pub fn round_sig9(w: f64) -> f64 {
    format!("{w:.8e}").parse().expect("formatted float parses")
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    n_nodes: usize,
    features: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

/// Writes one JSON record per graph; edge weights carry 9 significant
/// digits.
pub fn write_graphs<W: Write, T: Scalar>(mut w: W, graphs: &[(String, TsGraph<T>)]) -> Result<()> {
    for (id, g) in graphs {
        let rec = GraphRecord {
            id: id.clone(),
            n_nodes: g.n_nodes(),
            features: g.node_features.iter().map(|f| f.as_f64()).collect(),
            edges: g
                .edges
                .iter()
                .zip(&g.edge_weights)
                .map(|(&(a, b), w)| (a, b, round_sig9(w.as_f64())))
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_graphs<R: BufRead, T: Scalar>(r: R) -> Result<Vec<(String, TsGraph<T>)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.features.len() != rec.n_nodes {
            return Err(parse_err(format!(
                "n_nodes {} but {} features",
                rec.n_nodes,
                rec.features.len()
            )));
        }
        let g = TsGraph {
            node_features: rec.features.into_iter().map(T::of).collect(),
            edges: rec.edges.iter().map(|&(a, b, _)| (a, b)).collect(),
            edge_weights: rec.edges.iter().map(|&(_, _, w)| T::of(w)).collect(),
        };
        g.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push((rec.id, g));
    }
    Ok(out)
}
