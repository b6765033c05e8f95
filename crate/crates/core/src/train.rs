//! Class-weighted binary cross-entropy training over repeated stratified
//! shuffle splits.
//!
//! Splits are stratified by trace kind (the four anomaly kinds plus
//! clean). Each split trains a fresh model one graph per step; class
//! weights come from the split's training points. Splits may run in
//! parallel, but training within a split is strictly sequential so
//! results do not depend on the worker count.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gat::{GatModel, ModelConfig, PreparedGraph};
use crate::inject::{AnomalyKind, LabeledTrace};
use crate::metrics::{self, ClassConfusion, EvalReport, SplitMetrics};
use crate::mtf::{self, TsGraph};
use crate::tensor::Tape;
use crate::trace::TraceSchema;
use crate::{seed, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl OptimizerKind {
    fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub threshold: f64,
    /// Quantile bins; `None` uses the trace length.
    pub n_bins: Option<usize>,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_splits: 10,
            test_fraction: 0.2,
            epochs: 30,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            threshold: 0.5,
            n_bins: None,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::Config("n_splits must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("bad learning_rate {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if self.n_bins == Some(0) {
            return Err(Error::Config("n_bins must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `key=value` lines over the current values. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        self.validate()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "n_splits" => self.n_splits = num(key, value)?,
            "test_fraction" => self.test_fraction = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "n_bins" => {
                self.n_bins = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "workers" => self.workers = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_splits={}", self.n_splits);
        let _ = writeln!(s, "test_fraction={}", self.test_fraction);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "optimizer={}", self.optimizer.name());
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "threshold={}", self.threshold);
        match self.n_bins {
            Some(q) => {
                let _ = writeln!(s, "n_bins={q}");
            }
            None => s.push_str("n_bins=auto\n"),
        }
        let _ = writeln!(s, "workers={}", self.workers);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `n_splits` independent shuffled partitions, each holding out
/// `round(n * test_fraction)` members of every stratum (at least one,
/// and never the whole stratum). Index lists are sorted.
pub fn stratified_shuffle_split(
    kinds: &[AnomalyKind],
    n_splits: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<Split>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let strata: Vec<(AnomalyKind, Vec<usize>)> = AnomalyKind::ALL
        .iter()
        .map(|&k| (k, (0..kinds.len()).filter(|&i| kinds[i] == k).collect::<Vec<_>>()))
        .filter(|(_, members)| !members.is_empty())
        .collect();
    if strata.is_empty() {
        return Err(Error::DegenerateStratum("dataset is empty".into()));
    }
    for (kind, members) in &strata {
        if members.len() < 2 {
            return Err(Error::DegenerateStratum(format!(
                "stratum {kind} has {} member, need at least 2",
                members.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(n_splits);
    for k in 0..n_splits {
        let mut rng = seed::rng(seed::derive_indexed(seed, "split", k as u64));
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (_, members) in &strata {
            let n = members.len();
            let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            test.extend_from_slice(&shuffled[..n_test]);
            train.extend_from_slice(&shuffled[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        out.push(Split { train, test });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_anomalous: f64,
    pub w_normal: f64,
}

impl ClassWeights {
    pub const UNIT: Self = Self {
        w_anomalous: 1.0,
        w_normal: 1.0,
    };
}

/// `total / (2 * count_c)` for each class over the given label vectors.
pub fn class_weights<'a>(labels: impl IntoIterator<Item = &'a [u8]>) -> Result<ClassWeights> {
    let (mut anomalous, mut total) = (0usize, 0usize);
    for l in labels {
        anomalous += l.iter().filter(|&&v| v != 0).count();
        total += l.len();
    }
    let normal = total - anomalous;
    if anomalous == 0 || normal == 0 {
        return Err(Error::DegenerateStratum(format!(
            "training points need both classes, got {anomalous} anomalous and {normal} normal"
        )));
    }
    let t = total as f64;
    Ok(ClassWeights {
        w_anomalous: t / (2.0 * anomalous as f64),
        w_normal: t / (2.0 * normal as f64),
    })
}

/// Mean class-weighted cross-entropy of probabilities against labels,
/// with log arguments clamped away from zero.
pub fn weighted_bce<T: Scalar>(probabilities: &[T], labels: &[u8], weights: ClassWeights) -> Result<T> {
    if probabilities.len() != labels.len() || labels.is_empty() {
        return Err(Error::shape(
            "weighted_bce",
            format!("{} probabilities for {} labels", probabilities.len(), labels.len()),
        ));
    }
    Ok(crate::tensor::bce_value(
        probabilities,
        labels,
        T::of(weights.w_normal),
        T::of(weights.w_anomalous),
    ))
}

/// Graphs and labels the trainer draws from. Graphs are either held in
/// memory or rebuilt from the traces whenever they are needed.
#[derive(Debug, Clone)]
pub struct Samples<T> {
    labels: Vec<Arc<[u8]>>,
    kinds: Vec<AnomalyKind>,
    source: GraphSource<T>,
}

#[derive(Debug, Clone)]
enum GraphSource<T> {
    Cached(Vec<PreparedGraph<T>>),
    Lazy {
        traces: Vec<LabeledTrace>,
        schema: TraceSchema,
        n_bins: Option<usize>,
    },
}

impl<T: Scalar> Samples<T> {
    /// Transforms every trace up front.
    pub fn cached(dataset: &[LabeledTrace], schema: &TraceSchema, n_bins: Option<usize>) -> Result<Self> {
        let graphs = dataset
            .par_iter()
            .map(|t| mtf::transform::<T>(&t.trace, schema, n_bins).and_then(|g| PreparedGraph::new(&g)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: dataset.iter().map(|t| Arc::from(t.labels.as_slice())).collect(),
            kinds: dataset.iter().map(LabeledTrace::kind).collect(),
            source: GraphSource::Cached(graphs),
        })
    }

    /// Transforms each trace again on every use.
    pub fn lazy(dataset: Vec<LabeledTrace>, schema: &TraceSchema, n_bins: Option<usize>) -> Self {
        Self {
            labels: dataset.iter().map(|t| Arc::from(t.labels.as_slice())).collect(),
            kinds: dataset.iter().map(LabeledTrace::kind).collect(),
            source: GraphSource::Lazy {
                traces: dataset,
                schema: schema.clone(),
                n_bins,
            },
        }
    }

    /// Pre-built graphs with labels and kinds in the same order.
    pub fn from_graphs(graphs: &[TsGraph<T>], dataset: &[LabeledTrace]) -> Result<Self> {
        if graphs.len() != dataset.len() {
            return Err(Error::shape(
                "samples",
                format!("{} graphs for {} traces", graphs.len(), dataset.len()),
            ));
        }
        let mut prepared = Vec::with_capacity(graphs.len());
        for (g, t) in graphs.iter().zip(dataset) {
            if g.n_nodes() != t.labels.len() {
                return Err(Error::shape(
                    "samples",
                    format!(
                        "graph of {} nodes for trace {} of length {}",
                        g.n_nodes(),
                        t.trace.link_id,
                        t.labels.len()
                    ),
                ));
            }
            prepared.push(PreparedGraph::new(g)?);
        }
        Ok(Self {
            labels: dataset.iter().map(|t| Arc::from(t.labels.as_slice())).collect(),
            kinds: dataset.iter().map(LabeledTrace::kind).collect(),
            source: GraphSource::Cached(prepared),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kinds(&self) -> &[AnomalyKind] {
        &self.kinds
    }

    pub fn labels(&self, i: usize) -> &[u8] {
        &self.labels[i]
    }

    pub fn graph(&self, i: usize) -> Result<Cow<'_, PreparedGraph<T>>> {
        match &self.source {
            GraphSource::Cached(g) => Ok(Cow::Borrowed(&g[i])),
            GraphSource::Lazy { traces, schema, n_bins } => {
                let g = mtf::transform::<T>(&traces[i].trace, schema, *n_bins)?;
                Ok(Cow::Owned(PreparedGraph::new(&g)?))
            }
        }
    }
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, sizes: &[usize]) -> Self {
        Self {
            kind,
            lr: T::of(lr),
            step: 0,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One update of every parameter from its gradient.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[Vec<T>]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (p, &g) in p.iter_mut().zip(g) {
                        *p = *p - self.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (T::of(BETA1), T::of(BETA2), T::of(EPSILON));
                let one = T::one();
                let c1 = one - b1.powi(self.step);
                let c2 = one - b2.powi(self.step);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = b1 * m[i] + (one - b1) * gi;
                        v[i] = b2 * v[i] + (one - b2) * gi * gi;
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] = p[i] - self.lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub model: GatModel<T>,
    /// Mean training loss of each epoch.
    pub loss_curve: Vec<f64>,
    pub weights: ClassWeights,
    pub steps: usize,
}

impl<T> FitOutcome<T> {
    pub fn final_train_loss(&self) -> f64 {
        *self.loss_curve.last().expect("at least one epoch")
    }
}

/// Trains a fresh model on `train` (indices into `samples`).
pub fn fit<T: Scalar>(
    samples: &Samples<T>,
    train: &[usize],
    model_config: &ModelConfig,
    model_seed: u64,
    cfg: &TrainConfig,
    split: usize,
) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let weights = class_weights(train.iter().map(|&i| samples.labels(i)))?;
    let (w_normal, w_anomalous) = (T::of(weights.w_normal), T::of(weights.w_anomalous));
    let mut model = GatModel::<T>::new(model_config.clone(), model_seed)?;
    let sizes: Vec<usize> = model.named_tensors().iter().map(|(_, t)| t.len()).collect();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &sizes);
    let mut rng = seed::rng(seed::derive_indexed(cfg.seed, "epoch-order", split as u64));
    let mut order = train.to_vec();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    for epoch in 0..cfg.epochs {
        let diverged = |msg: String| Error::Training { split, epoch, msg };
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let graph = samples.graph(i)?;
            let mut tape = Tape::new();
            let pass = model.forward_on_tape(&mut tape, &graph).map_err(|e| diverged(e.to_string()))?;
            let labels: Arc<[u8]> = samples.labels[i].clone();
            let loss = tape
                .weighted_bce(pass.probs, labels, w_normal, w_anomalous)
                .map_err(|e| diverged(e.to_string()))?;
            let value = tape.value(loss).data()[0].as_f64();
            if !value.is_finite() {
                return Err(diverged(format!("loss is {value}")));
            }
            let grads = tape.backward(loss).map_err(|e| diverged(e.to_string()))?;
            let grads: Vec<Vec<T>> = pass
                .params
                .iter()
                .zip(&sizes)
                .map(|(&v, &n)| grads.get_or_zeros(v, n))
                .collect();
            {
                let mut named = model.named_tensors_mut();
                let mut params: Vec<&mut [T]> = named.iter_mut().map(|(_, t)| t.data_mut()).collect();
                opt.step(&mut params, &grads);
            }
            total += value;
            steps += 1;
        }
        loss_curve.push(total / order.len() as f64);
    }
    Ok(FitOutcome {
        model,
        loss_curve,
        weights,
        steps,
    })
}

/// Pooled confusion tables of `model` over the given samples.
pub fn evaluate<T: Scalar>(
    model: &GatModel<T>,
    samples: &Samples<T>,
    indices: &[usize],
    threshold: f64,
) -> Result<ClassConfusion> {
    let mut total = ClassConfusion::default();
    for &i in indices {
        let graph = samples.graph(i)?;
        let pred = model.predict(&graph, T::of(threshold))?;
        total.merge(&metrics::confusion(&pred, samples.labels(i))?);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct SplitOutcome<T> {
    pub split: Split,
    pub fit: FitOutcome<T>,
    pub metrics: SplitMetrics,
}

#[derive(Debug, Clone)]
pub struct CrossValidation<T> {
    pub splits: Vec<SplitOutcome<T>>,
    pub report: EvalReport,
}

impl<T> CrossValidation<T> {
    /// CSV `split,epoch,loss` with 1-based epochs.
    pub fn loss_curves_csv(&self) -> String {
        let mut s = String::from("split,epoch,loss\n");
        for (k, o) in self.splits.iter().enumerate() {
            for (e, l) in o.fit.loss_curve.iter().enumerate() {
                let _ = writeln!(s, "{k},{},{l}", e + 1);
            }
        }
        s
    }
}

/// Seed of the model trained in split `k`.
pub fn split_model_seed(master: u64, k: usize) -> u64 {
    seed::derive_indexed(master, "model", k as u64)
}

/// One fresh model per split, evaluated on that split's test traces.
pub fn cross_validate<T: Scalar>(
    samples: &Samples<T>,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
    config_echo: serde_json::Value,
) -> Result<CrossValidation<T>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let splits = stratified_shuffle_split(samples.kinds(), cfg.n_splits, cfg.test_fraction, cfg.seed)?;
    let run = |(k, split): (usize, Split)| -> Result<SplitOutcome<T>> {
        let fit = fit(samples, &split.train, model_config, split_model_seed(cfg.seed, k), cfg, k)?;
        let confusion = evaluate(&fit.model, samples, &split.test, cfg.threshold)?;
        Ok(SplitOutcome {
            split,
            fit,
            metrics: SplitMetrics::from_confusion(k, confusion),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes = pool.install(|| {
        splits
            .into_iter()
            .enumerate()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(run)
            .collect::<Result<Vec<_>>>()
    })?;
    let parameter_count = outcomes[0].fit.model.parameter_count();
    let report = metrics::aggregate(
        outcomes.iter().map(|o| o.metrics.clone()).collect(),
        parameter_count,
        config_echo,
    )?;
    Ok(CrossValidation {
        splits: outcomes,
        report,
    })
}
