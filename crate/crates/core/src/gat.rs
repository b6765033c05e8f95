//! Three-block graph attention network producing one anomaly
//! probability per node.
//!
//! Block `k` computes `relu(gat_k(h) + skip_k(h))`, where `skip_k` is a
//! learnable linear projection to the block's output width. The first two
//! attention layers concatenate 4 heads of 32 features (width 128); the
//! third averages 6 heads of 32. A linear head and a sigmoid map the last
//! block to a probability per node.
//!
//! Attention of head `h` along edge `a -> b` is the softmax, over all
//! edges entering `b`, of `leaky_relu(src_h . z_a + dst_h . z_b) + ln w(a, b)`,
//! so transition-field weights act as a multiplicative prior on the
//! attention while keeping each node's coefficients summing to one.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mtf::TsGraph;
use crate::tensor::{Tape, Tensor, Var};
use crate::{seed, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMode {
    Concat,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatLayerConfig {
    pub in_dim: usize,
    pub out_dim_per_head: usize,
    pub n_heads: usize,
    pub head_mode: HeadMode,
    pub leaky_slope: f64,
}

impl GatLayerConfig {
    pub fn out_width(&self) -> usize {
        match self.head_mode {
            HeadMode::Concat => self.n_heads * self.out_dim_per_head,
            HeadMode::Average => self.out_dim_per_head,
        }
    }

    fn projection_width(&self) -> usize {
        self.n_heads * self.out_dim_per_head
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: Vec<GatLayerConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let layer = |in_dim, n_heads, head_mode| GatLayerConfig {
            in_dim,
            out_dim_per_head: 32,
            n_heads,
            head_mode,
            leaky_slope: 0.2,
        };
        Self {
            layers: vec![
                layer(1, 4, HeadMode::Concat),
                layer(128, 4, HeadMode::Concat),
                layer(128, 6, HeadMode::Average),
            ],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one attention layer".into()));
        }
        if self.layers[0].in_dim != 1 {
            return Err(Error::Config("first layer must take the scalar node feature".into()));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[1].in_dim != pair[0].out_width() {
                return Err(Error::Config(format!(
                    "layer {} expects width {}, layer {} produces {}",
                    k + 2,
                    pair[1].in_dim,
                    k + 1,
                    pair[0].out_width()
                )));
            }
        }
        if self.layers.iter().any(|l| l.n_heads == 0 || l.out_dim_per_head == 0) {
            return Err(Error::Config("heads and per-head width must be positive".into()));
        }
        Ok(())
    }

    fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.out_width()).unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer<T> {
    pub config: GatLayerConfig,
    /// `[in_dim, heads * per_head]`
    pub weight: Tensor<T>,
    /// `[heads, per_head]`
    pub att_src: Tensor<T>,
    /// `[heads, per_head]`
    pub att_dst: Tensor<T>,
    /// `[out_width]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `[in, out]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatModel<T> {
    pub config: ModelConfig,
    pub seed: u64,
    pub layers: Vec<GatLayer<T>>,
    pub skips: Vec<Linear<T>>,
    pub head: Linear<T>,
}

fn glorot<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-limit..limit))).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

impl<T: Scalar> GatModel<T> {
    /// Glorot-uniform weights drawn from `seed`, zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let mut layers = Vec::new();
        let mut skips = Vec::new();
        for c in &config.layers {
            let pw = c.projection_width();
            let d = c.out_dim_per_head;
            layers.push(GatLayer {
                config: *c,
                weight: glorot(&mut rng, &[c.in_dim, pw], c.in_dim, pw),
                att_src: glorot(&mut rng, &[c.n_heads, d], d, 1),
                att_dst: glorot(&mut rng, &[c.n_heads, d], d, 1),
                bias: Tensor::zeros(&[c.out_width()]),
            });
            skips.push(Linear {
                weight: glorot(&mut rng, &[c.in_dim, c.out_width()], c.in_dim, c.out_width()),
                bias: Tensor::zeros(&[c.out_width()]),
            });
        }
        let w = config.output_width();
        let head = Linear {
            weight: glorot(&mut rng, &[w, 1], w, 1),
            bias: Tensor::zeros(&[1]),
        };
        Ok(Self {
            config,
            seed,
            layers,
            skips,
            head,
        })
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let mut m = Self::new(config, 0)?;
        for (_, t) in m.named_tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
        Ok(m)
    }

    /// Parameters in their fixed declaration order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (k, (l, s)) in self.layers.iter().zip(&self.skips).enumerate() {
            let k = k + 1;
            out.push((format!("gat{k}.weight"), &l.weight));
            out.push((format!("gat{k}.att_src"), &l.att_src));
            out.push((format!("gat{k}.att_dst"), &l.att_dst));
            out.push((format!("gat{k}.bias"), &l.bias));
            out.push((format!("skip{k}.weight"), &s.weight));
            out.push((format!("skip{k}.bias"), &s.bias));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (k, (l, s)) in self.layers.iter_mut().zip(self.skips.iter_mut()).enumerate() {
            let k = k + 1;
            out.push((format!("gat{k}.weight"), &mut l.weight));
            out.push((format!("gat{k}.att_src"), &mut l.att_src));
            out.push((format!("gat{k}.att_dst"), &mut l.att_dst));
            out.push((format!("gat{k}.bias"), &mut l.bias));
            out.push((format!("skip{k}.weight"), &mut s.weight));
            out.push((format!("skip{k}.bias"), &mut s.bias));
        }
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        count_parameters(self.named_tensors().iter().map(|(_, t)| *t))
    }

    /// Records the forward pass on `tape`. Parameters enter as tracked
    /// leaves, in [`named_tensors`](Self::named_tensors) order.
    pub fn forward_on_tape(&self, tape: &mut Tape<T>, graph: &PreparedGraph<T>) -> Result<ForwardPass> {
        let mut params = Vec::new();
        let mut leaf = |tape: &mut Tape<T>, t: &Tensor<T>| {
            let v = tape.leaf(t.clone().with_grad());
            params.push(v);
            v
        };
        let mut h = tape.leaf(graph.features.clone());
        let mut attention = Vec::new();
        for (layer, skip) in self.layers.iter().zip(&self.skips) {
            let lp = GatLayerVars {
                weight: leaf(tape, &layer.weight),
                att_src: leaf(tape, &layer.att_src),
                att_dst: leaf(tape, &layer.att_dst),
                bias: leaf(tape, &layer.bias),
            };
            let (sw, sb) = (leaf(tape, &skip.weight), leaf(tape, &skip.bias));
            let (g, alpha) = gat_layer_forward(tape, h, graph, &layer.config, &lp)?;
            attention.push(alpha);
            let s = tape.matmul(h, sw)?;
            let s = tape.add_row_bias(s, sb)?;
            let sum = tape.add(g, s)?;
            h = tape.relu(sum)?;
        }
        let (hw, hb) = (leaf(tape, &self.head.weight), leaf(tape, &self.head.bias));
        let logits = tape.matmul(h, hw)?;
        let logits = tape.add_row_bias(logits, hb)?;
        let probs = tape.sigmoid(logits)?;
        Ok(ForwardPass {
            probs,
            params,
            attention,
        })
    }

    /// Anomaly probability of every node.
    pub fn forward(&self, graph: &PreparedGraph<T>) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        let pass = self.forward_on_tape(&mut tape, graph)?;
        Ok(tape.value(pass.probs).data().to_vec())
    }

    /// Per-node labels: 1 where the probability reaches `threshold`.
    pub fn predict(&self, graph: &PreparedGraph<T>, threshold: T) -> Result<Vec<u8>> {
        Ok(threshold_labels(&self.forward(graph)?, threshold))
    }
}

pub fn threshold_labels<T: Scalar>(probs: &[T], threshold: T) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}

pub fn count_parameters<'a, T: Scalar>(tensors: impl IntoIterator<Item = &'a Tensor<T>>) -> usize {
    tensors.into_iter().map(Tensor::len).sum()
}

/// Tape handles produced by [`GatModel::forward_on_tape`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `[N, 1]` probabilities.
    pub probs: Var,
    pub params: Vec<Var>,
    /// `[E', heads]` attention coefficients of each layer.
    pub attention: Vec<Var>,
}

/// Tape handles of one attention layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct GatLayerVars {
    pub weight: Var,
    pub att_src: Var,
    pub att_dst: Var,
    pub bias: Var,
}

/// One attention layer. Returns the layer output (before the block's
/// skip connection and activation) and the attention coefficients.
pub fn gat_layer_forward<T: Scalar>(
    tape: &mut Tape<T>,
    features: Var,
    graph: &PreparedGraph<T>,
    cfg: &GatLayerConfig,
    params: &GatLayerVars,
) -> Result<(Var, Var)> {
    let (n, f) = tape.value(features).dims2()?;
    if f != cfg.in_dim || n != graph.n_nodes {
        return Err(Error::shape(
            "gat_layer",
            format!("features [{n}x{f}], layer expects [{}x{}]", graph.n_nodes, cfg.in_dim),
        ));
    }
    let z = tape.matmul(features, params.weight)?;
    let s_src = tape.head_dot(z, params.att_src)?;
    let s_dst = tape.head_dot(z, params.att_dst)?;
    let e_src = tape.gather_rows(s_src, graph.src.clone())?;
    let e_dst = tape.gather_rows(s_dst, graph.dst.clone())?;
    let raw = tape.add(e_src, e_dst)?;
    let act = tape.leaky_relu(raw, T::of(cfg.leaky_slope))?;
    let prior = tape.leaf(graph.log_weight_bias(cfg.n_heads));
    let logits = tape.add(act, prior)?;
    let alpha = tape.segment_softmax(logits, graph.dst.clone(), graph.n_nodes)?;
    let mut out = tape.edge_aggregate(alpha, z, graph.src.clone(), graph.dst.clone())?;
    if cfg.head_mode == HeadMode::Average {
        out = tape.head_mean(out, cfg.n_heads)?;
    }
    let out = tape.add_row_bias(out, params.bias)?;
    Ok((out, alpha))
}

/// A graph in the form consumed by the model: edge index arrays, log
/// edge weights, and a unit self-loop on every node that lacks one.
#[derive(Debug, Clone)]
pub struct PreparedGraph<T> {
    pub n_nodes: usize,
    /// `[N, 1]`
    pub features: Tensor<T>,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    pub log_weights: Vec<T>,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(graph: &TsGraph<T>) -> Result<Self> {
        graph.validate()?;
        let n = graph.n_nodes();
        let mut src: Vec<usize> = graph.edges.iter().map(|e| e.0).collect();
        let mut dst: Vec<usize> = graph.edges.iter().map(|e| e.1).collect();
        let mut log_weights: Vec<T> = graph.edge_weights.iter().map(|w| w.ln()).collect();
        let looped: HashSet<usize> = graph.edges.iter().filter(|(a, b)| a == b).map(|e| e.0).collect();
        for i in (0..n).filter(|i| !looped.contains(i)) {
            src.push(i);
            dst.push(i);
            log_weights.push(T::zero());
        }
        Ok(Self {
            n_nodes: n,
            features: Tensor::column(graph.node_features.clone()),
            src: src.into(),
            dst: dst.into(),
            log_weights,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    fn log_weight_bias(&self, heads: usize) -> Tensor<T> {
        let data = self
            .log_weights
            .iter()
            .flat_map(|&w| std::iter::repeat(w).take(heads))
            .collect();
        Tensor::new(&[self.log_weights.len(), heads], data).expect("shape matches data")
    }
}

const CHECKPOINT_FORMAT: &str = "rssi-gat-checkpoint/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Text half of a checkpoint. The tensors themselves live next to it as
/// raw little-endian `f64` values in the listed order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub seed: u64,
    pub config: ModelConfig,
    pub parameter_count: usize,
    pub tensors: Vec<TensorEntry>,
    /// Pipeline settings the model was trained under.
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// `<stem>.json` and `<stem>.bin`.
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut p = stem.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    (with(".json"), with(".bin"))
}

impl<T: Scalar> GatModel<T> {
    pub fn save_checkpoint(&self, stem: &Path, meta: serde_json::Value) -> Result<()> {
        let (manifest_path, data_path) = checkpoint_paths(stem);
        let named = self.named_tensors();
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            seed: self.seed,
            config: self.config.clone(),
            parameter_count: self.parameter_count(),
            tensors: named
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            meta,
        };
        let mut bytes = Vec::with_capacity(manifest.parameter_count * 8);
        for (_, t) in &named {
            for v in t.data() {
                bytes.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(manifest_path, text)?;
        fs::File::create(data_path)?.write_all(&bytes)?;
        Ok(())
    }

    pub fn load_checkpoint(stem: &Path) -> Result<(Self, CheckpointManifest)> {
        let (manifest_path, data_path) = checkpoint_paths(stem);
        let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", manifest.format)));
        }
        let mut bytes = Vec::new();
        fs::File::open(&data_path)?.read_to_end(&mut bytes)?;
        let mut model = Self::new(manifest.config.clone(), manifest.seed)?;
        let mut offset = 0;
        {
            let named = model.named_tensors_mut();
            if named.len() != manifest.tensors.len() {
                return Err(Error::Checkpoint("tensor list does not match architecture".into()));
            }
            for ((name, t), entry) in named.into_iter().zip(&manifest.tensors) {
                if name != entry.name || t.shape() != entry.shape.as_slice() {
                    return Err(Error::Checkpoint(format!(
                        "expected {name} {:?}, manifest lists {} {:?}",
                        t.shape(),
                        entry.name,
                        entry.shape
                    )));
                }
                let end = offset + t.len() * 8;
                let chunk = bytes
                    .get(offset..end)
                    .ok_or_else(|| Error::Checkpoint("tensor data truncated".into()))?;
                for (v, b) in t.data_mut().iter_mut().zip(chunk.chunks_exact(8)) {
                    *v = T::of(f64::from_le_bytes(b.try_into().expect("8 bytes")));
                }
                offset = end;
            }
        }
        if offset != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after tensor data",
                bytes.len() - offset
            )));
        }
        Ok((model, manifest))
    }
}
