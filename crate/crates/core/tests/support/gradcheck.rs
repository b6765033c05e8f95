//! Central finite-difference checks against the tape's analytic gradients.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rssi_gat::gat::{GatLayerConfig, GatModel, HeadMode, ModelConfig, PreparedGraph};
use rssi_gat::mtf::TsGraph;
use rssi_gat::tensor::{Tape, Tensor, Var};
use rssi_gat::Result;

pub const STEP: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-4;

/// Five-point central difference of `f` at offset 0 with step `h`.
pub fn derivative_with(f: &mut impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Outcome of checking one point.
#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub worst: f64,
    /// False when estimates at two step sizes disagree, meaning a ReLU
    /// kink lies inside the stencil and the difference quotient says
    /// nothing about the gradient.
    pub smooth: bool,
}

impl Check {
    fn new() -> Self {
        Self { worst: 0.0, smooth: true }
    }

    fn record(&mut self, analytic: f64, f: &mut impl FnMut(f64) -> f64) {
        let coarse = derivative_with(f, STEP);
        let fine = derivative_with(f, STEP / 10.0);
        if (coarse - fine).abs() > 1e-9 + 1e-6 * coarse.abs() {
            self.smooth = false;
        }
        self.worst = self.worst.max(rel_err(analytic, coarse));
    }
}

/// Relative error with a small floor so that near-zero gradients are
/// compared absolutely.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub type Build = dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

/// Reduces the op's output to a scalar with fixed random weights, so every
/// output element contributes a distinct gradient.
fn scalar_loss(build: &Build, inputs: &[Tensor<f64>], mix: &[f64], track: bool) -> (f64, Vec<Vec<f64>>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| tape.leaf(if track { t.clone().with_grad() } else { t.clone() }))
        .collect();
    let out = build(&mut tape, &vars).expect("op evaluates");
    let shape = tape.value(out).shape().to_vec();
    let r = tape.leaf(Tensor::new(&shape, mix[..tape.value(out).len()].to_vec()).unwrap());
    let prod = tape.mul(out, r).unwrap();
    let loss = tape.sum(prod).unwrap();
    let value = tape.value(loss).data()[0];
    if !track {
        return (value, Vec::new());
    }
    let grads = tape.backward(loss).unwrap();
    let g = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get_or_zeros(v, t.len()))
        .collect();
    (value, g)
}

/// Largest relative error over every coordinate of every input.
pub fn check_op(build: &Build, inputs: &[Tensor<f64>], rng: &mut ChaCha8Rng) -> Check {
    let mix: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, analytic) = scalar_loss(build, inputs, &mix, true);
    let mut check = Check::new();
    for (i, t) in inputs.iter().enumerate() {
        for j in 0..t.len() {
            check.record(analytic[i][j], &mut |dx| {
                let mut moved = inputs.to_vec();
                moved[i].data_mut()[j] += dx;
                scalar_loss(build, &moved, &mix, false).0
            });
        }
    }
    check
}

/// Uniform values kept away from zero so ReLU kinks are never straddled.
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.gen_range(lo..hi);
            if v.abs() > 0.05 {
                break v;
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Random graph with positive weights and a self-loop on every node.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> TsGraph<f64> {
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b || rng.gen_bool(0.4) {
                edges.push((a, b));
                weights.push(rng.gen_range(0.05..1.0));
            }
        }
    }
    TsGraph {
        node_features: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        edges,
        edge_weights: weights,
    }
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Arc<[u8]> {
    let mut l: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    l[0] = 1;
    l[n - 1] = 0;
    l.into()
}

fn model_loss(model: &GatModel<f64>, g: &PreparedGraph<f64>, labels: &Arc<[u8]>) -> f64 {
    let mut tape = Tape::new();
    let pass = model.forward_on_tape(&mut tape, g).unwrap();
    let loss = tape.weighted_bce(pass.probs, labels.clone(), 0.7, 1.9).unwrap();
    tape.value(loss).data()[0]
}

/// Checks `coords` randomly chosen parameter coordinates, or all of them
/// when `coords` is `None`.
pub fn check_model(
    model: &GatModel<f64>,
    g: &PreparedGraph<f64>,
    labels: &Arc<[u8]>,
    coords: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Check {
    let mut tape = Tape::new();
    let pass = model.forward_on_tape(&mut tape, g).unwrap();
    let loss = tape.weighted_bce(pass.probs, labels.clone(), 0.7, 1.9).unwrap();
    let grads = tape.backward(loss).unwrap();
    let sizes: Vec<usize> = model.named_tensors().iter().map(|(_, t)| t.len()).collect();
    let analytic: Vec<Vec<f64>> = pass.params.iter().zip(&sizes).map(|(&v, &n)| grads.get_or_zeros(v, n)).collect();
    let picks: Vec<(usize, usize)> = match coords {
        None => sizes.iter().enumerate().flat_map(|(t, &n)| (0..n).map(move |j| (t, j))).collect(),
        Some(k) => {
            let total: usize = sizes.iter().sum();
            (0..k)
                .map(|_| {
                    let mut flat = rng.gen_range(0..total);
                    let mut t = 0;
                    while flat >= sizes[t] {
                        flat -= sizes[t];
                        t += 1;
                    }
                    (t, flat)
                })
                .collect()
        }
    };
    let mut check = Check::new();
    for (t, j) in picks {
        check.record(analytic[t][j], &mut |dx| {
            let mut moved = model.clone();
            moved.named_tensors_mut()[t].1.data_mut()[j] += dx;
            model_loss(&moved, g, labels)
        });
    }
    check
}

/// Every differentiable primitive paired with random inputs of a fresh
/// random shape.
pub fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Box<Build>, Vec<Tensor<f64>>)> {
    let m = rng.gen_range(1..5);
    let k = rng.gen_range(1..5);
    let n = rng.gen_range(1..5);
    let heads = rng.gen_range(1..4);
    let d = rng.gen_range(1..4);
    let nodes = rng.gen_range(2..7);
    let n_edges = rng.gen_range(1..12);
    let src: Arc<[usize]> = (0..n_edges).map(|_| rng.gen_range(0..nodes)).collect::<Vec<_>>().into();
    let dst: Arc<[usize]> = (0..n_edges).map(|_| rng.gen_range(0..nodes)).collect::<Vec<_>>().into();
    let rows: Arc<[usize]> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0..m)).collect::<Vec<_>>().into();
    let labels: Arc<[u8]> = (0..m * n).map(|_| u8::from(rng.gen_bool(0.5))).collect::<Vec<_>>().into();
    let slope = rng.gen_range(0.01..0.5);
    let (wn, wa) = (rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0));
    let mut t = |shape: &[usize]| random_tensor(rng, shape, -2.0, 2.0);
    let mn = t(&[m, n]);
    let mn2 = t(&[m, n]);
    let mk = t(&[m, k]);
    let kn = t(&[k, n]);
    let bias = t(&[n]);
    let logits = t(&[n_edges, heads]);
    let z = t(&[nodes, heads * d]);
    let att = t(&[heads, d]);
    let alpha = t(&[n_edges, heads]);
    let probs = random_tensor(rng, &[m, n], 0.05, 0.95);
    let (s2, d2, r2) = (src.clone(), dst.clone(), rows.clone());
    let seg = dst.clone();
    vec![
        ("matmul", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.matmul(v[0], v[1])), vec![mk, kn]),
        ("add", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.add(v[0], v[1])), vec![mn.clone(), mn2.clone()]),
        ("mul", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.mul(v[0], v[1])), vec![mn.clone(), mn2]),
        ("add_row_bias", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.add_row_bias(v[0], v[1])), vec![mn.clone(), bias]),
        ("relu", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.relu(v[0])), vec![mn.clone()]),
        ("leaky_relu", Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.leaky_relu(v[0], slope)), vec![mn.clone()]),
        ("sigmoid", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.sigmoid(v[0])), vec![mn.clone()]),
        ("sum", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.sum(v[0])), vec![mn.clone()]),
        ("gather_rows", Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.gather_rows(v[0], r2.clone())), vec![mn]),
        (
            "segment_softmax",
            Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.segment_softmax(v[0], seg.clone(), nodes)),
            vec![logits],
        ),
        ("head_dot", Box::new(|t: &mut Tape<f64>, v: &[Var]| t.head_dot(v[0], v[1])), vec![z.clone(), att]),
        (
            "edge_aggregate",
            Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.edge_aggregate(v[0], v[1], s2.clone(), d2.clone())),
            vec![alpha, z.clone()],
        ),
        ("head_mean", Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.head_mean(v[0], heads)), vec![z]),
        (
            "weighted_bce",
            Box::new(move |t: &mut Tape<f64>, v: &[Var]| t.weighted_bce(v[0], labels.clone(), wn, wa)),
            vec![probs],
        ),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct Summary {
    pub worst: f64,
    pub smooth_trials: u64,
    pub draws: u64,
}

/// Draws fresh random cases until `trials` smooth ones have been
/// checked, giving up after `3 * trials` draws.
pub fn run_trials(trials: u64, mut case: impl FnMut(u64) -> Check) -> Summary {
    let mut s = Summary {
        worst: 0.0,
        smooth_trials: 0,
        draws: 0,
    };
    while s.smooth_trials < trials && s.draws < 3 * trials {
        let c = case(s.draws);
        s.draws += 1;
        if c.smooth {
            s.smooth_trials += 1;
            s.worst = s.worst.max(c.worst);
        }
    }
    s
}

/// Largest error over every primitive and the smooth trials of each.
pub fn primitives_summary(trials: u64, master: u64) -> Vec<(&'static str, Summary)> {
    let names: Vec<&'static str> = {
        let mut rng = rssi_gat::seed::rng(master);
        primitive_cases(&mut rng).into_iter().map(|c| c.0).collect()
    };
    names
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let s = run_trials(trials, |draw| {
                let mut rng = rssi_gat::seed::rng(rssi_gat::seed::derive_indexed(master, name, draw));
                let (_, build, inputs) = primitive_cases(&mut rng).swap_remove(k);
                check_op(build.as_ref(), &inputs, &mut rng)
            });
            (name, s)
        })
        .collect()
}

/// Default-width model on random graphs of 2 to 8 nodes, 60 random
/// coordinates per trial.
pub fn default_model_summary(trials: u64, master: u64) -> Summary {
    run_trials(trials, |draw| {
        let mut rng = rssi_gat::seed::rng(rssi_gat::seed::derive_indexed(master, "model", draw));
        let n = rng.gen_range(2..=8);
        let graph = PreparedGraph::new(&random_graph(&mut rng, n)).unwrap();
        let labels = random_labels(&mut rng, n);
        let model = GatModel::<f64>::new(ModelConfig::default(), rng.gen()).unwrap();
        check_model(&model, &graph, &labels, Some(60), &mut rng)
    })
}

/// Narrow three-block model with every coordinate checked.
pub fn narrow_model_summary(trials: u64, master: u64) -> Summary {
    let layer = |in_dim, n_heads, head_mode| GatLayerConfig {
        in_dim,
        out_dim_per_head: 3,
        n_heads,
        head_mode,
        leaky_slope: 0.2,
    };
    let cfg = ModelConfig {
        layers: vec![
            layer(1, 2, HeadMode::Concat),
            layer(6, 2, HeadMode::Concat),
            layer(6, 3, HeadMode::Average),
        ],
    };
    run_trials(trials, |draw| {
        let mut rng = rssi_gat::seed::rng(rssi_gat::seed::derive_indexed(master, "narrow", draw));
        let n = rng.gen_range(2..=8);
        let graph = PreparedGraph::new(&random_graph(&mut rng, n)).unwrap();
        let labels = random_labels(&mut rng, n);
        let model = GatModel::<f64>::new(cfg.clone(), rng.gen()).unwrap();
        check_model(&model, &graph, &labels, None, &mut rng)
    })
}
