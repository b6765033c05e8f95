//! Command-line pipeline: synthesize or ingest traces, inject anomalies,
//! transform to graphs, train and evaluate with repeated stratified
//! splits, predict per-point labels, and render reports.
//!
//! Every command writes a run manifest next to its outputs recording the
//! exact arguments, the resolved configuration and SHA-256 digests of all
//! inputs and outputs. `replay` re-runs a manifest and checks that the
//! outputs come out byte-identical.

use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rssi_gat::gat::{self, GatModel, ModelConfig, PreparedGraph};
use rssi_gat::inject::{self, Composition, InjectionParams, LabeledTrace};
use rssi_gat::metrics::{self, EvalReport, SplitMetrics};
use rssi_gat::mtf::{self, TsGraph};
use rssi_gat::trace::{self, RssiTrace, SynthProfile, TraceSchema};
use rssi_gat::train::{self, Samples, Split, TrainConfig};

pub const TOOL: &str = "rssi-gat";

/// Bad flags or flag combinations; the process exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Per-measurement anomaly detection for RSSI traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed; every random stage derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, or output directory for `train` and `report`.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Worker threads for transform and cross-validation.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate clean synthetic traces.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 300)]
        length: usize,
        #[arg(long, default_value_t = SynthProfile::default().baseline_min)]
        baseline_min: i64,
        #[arg(long, default_value_t = SynthProfile::default().baseline_max)]
        baseline_max: i64,
        #[arg(long, default_value_t = SynthProfile::default().jitter)]
        jitter: i64,
        #[command(flatten)]
        common: Common,
    },
    /// Parse raw per-link logs and keep the complete links.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 300)]
        length: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Inject anomalies into clean traces. Without any count flag the
    /// full composition (700 of each kind, 5692 clean) is used; otherwise
    /// unspecified counts are 0.
    Inject {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        suddend: Option<usize>,
        #[arg(long)]
        suddenr: Option<usize>,
        #[arg(long)]
        instad: Option<usize>,
        #[arg(long)]
        slowd: Option<usize>,
        /// Count for each of the four anomaly kinds.
        #[arg(long)]
        each: Option<usize>,
        #[arg(long)]
        clean: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Convert every labeled trace into its graph.
    Transform {
        #[arg(long)]
        input: PathBuf,
        /// Quantile bins; defaults to `n_bins` from the config file, then to
        /// the trace length.
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate: one model per split, checkpoints and report.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        overrides: TrainOverrides,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on a dataset, optionally restricted to one
    /// split's test traces.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// splits.json written by `train`.
        #[arg(long, requires = "split")]
        splits: Option<PathBuf>,
        #[arg(long, requires = "splits")]
        split: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-point labels and anomalous intervals for every trace.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Trace CSV or labeled dataset (`.jsonl`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a stored report as text and CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a manifest and verify the outputs are unchanged.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Labeled dataset written by `inject`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Graphs written by `transform`.
    #[arg(long)]
    pub graphs: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// What a command did: its output lines and the manifest it wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: Vec<String>,
    pub manifest: Option<PathBuf>,
}

struct Run {
    command: &'static str,
    argv: Vec<String>,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    stdout: Vec<String>,
}

impl Run {
    fn finish(self, manifest_path: PathBuf) -> Result<Outcome> {
        let manifest = RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            argv: self.argv,
            seed: self.seed,
            config: self.config,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        };
        write_text(&manifest_path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        Ok(Outcome {
            stdout: self.stdout,
            manifest: Some(manifest_path),
        })
    }
}

fn file_manifest(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

/// Config file values overlaid with flags.
fn train_config(common: &Common, overrides: Option<&TrainOverrides>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_kv(&text).with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = overrides {
        if let Some(v) = o.splits {
            cfg.n_splits = v;
        }
        if let Some(v) = o.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = o.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = o.threshold {
            cfg.threshold = v;
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn uniform_length<'a>(lengths: impl Iterator<Item = usize>, what: &str) -> Result<usize> {
    let mut it = lengths;
    let first = it.next().with_context(|| format!("{what} is empty"))?;
    if it.any(|l| l != first) {
        bail!("{what} mixes trace lengths");
    }
    Ok(first)
}

fn read_dataset(path: &Path) -> Result<(Vec<LabeledTrace>, TraceSchema)> {
    let schema = TraceSchema::default();
    let data = inject::read_dataset(open(path)?, &schema).with_context(|| format!("reading {}", path.display()))?;
    let length = uniform_length(data.iter().map(|t| t.trace.len()), &path.display().to_string())?;
    Ok((data, TraceSchema::with_length(length)))
}

fn read_traces(path: &Path) -> Result<(Vec<RssiTrace>, TraceSchema)> {
    let schema = TraceSchema::default();
    let traces = trace::read_traces_csv(open(path)?, &schema).with_context(|| format!("reading {}", path.display()))?;
    let length = uniform_length(traces.iter().map(RssiTrace::len), &path.display().to_string())?;
    Ok((traces, TraceSchema::with_length(length)))
}

/// Dataset and graphs, checked to describe the same traces in the same
/// order.
fn load_samples(data: &DataArgs) -> Result<(Vec<LabeledTrace>, Samples<f64>, TraceSchema)> {
    let (dataset, schema) = read_dataset(&data.dataset)?;
    let graphs: Vec<(String, TsGraph<f64>)> =
        mtf::read_graphs(open(&data.graphs)?).with_context(|| format!("reading {}", data.graphs.display()))?;
    if graphs.len() != dataset.len() {
        bail!("{} graphs for {} traces", graphs.len(), dataset.len());
    }
    for (i, ((id, _), t)) in graphs.iter().zip(&dataset).enumerate() {
        if *id != t.trace.link_id {
            bail!("record {i}: graph {id} does not match trace {}", t.trace.link_id);
        }
    }
    let graphs: Vec<TsGraph<f64>> = graphs.into_iter().map(|(_, g)| g).collect();
    let samples = Samples::from_graphs(&graphs, &dataset)?;
    Ok((dataset, samples, schema))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema: TraceSchema,
    pub n_bins: Option<usize>,
    pub threshold: f64,
    pub split: usize,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub link_id: String,
    pub labels: Vec<u8>,
    /// Maximal anomalous runs as `[start, length]`.
    pub intervals: Vec<(usize, usize)>,
}

pub fn checkpoint_stem(out: &Path, split: usize) -> PathBuf {
    out.join("checkpoints").join(format!("split-{split:02}"))
}

/// Runs one command given the arguments after the program name.
pub fn run(argv: &[String]) -> Result<Outcome> {
    let cli = Cli::try_parse_from(std::iter::once(TOOL.to_string()).chain(argv.iter().cloned()))
        .map_err(|e| usage(e.to_string()))?;
    execute(cli.command, argv.to_vec())
}

pub fn execute(command: Command, argv: Vec<String>) -> Result<Outcome> {
    match command {
        Command::Synth {
            count,
            length,
            baseline_min,
            baseline_max,
            jitter,
            common,
        } => {
            if count == 0 {
                return Err(usage("--count must be at least 1"));
            }
            let cfg = train_config(&common, None)?;
            let schema = TraceSchema::with_length(length);
            schema.validate().map_err(|e| usage(e.to_string()))?;
            let profile = SynthProfile {
                baseline_min,
                baseline_max,
                jitter,
            };
            let mut rng = rssi_gat::seed::rng(rssi_gat::seed::derive_seed(cfg.seed, "synth"));
            let traces = trace::synthesize_clean(count, &schema, &mut rng, &profile)?;
            let mut w = create(&common.out)?;
            trace::write_traces_csv(&mut w, &traces)?;
            w.flush()?;
            Run {
                command: "synth",
                argv,
                seed: Some(cfg.seed),
                config: serde_json::json!({"count": count, "schema": schema, "profile": profile}),
                inputs: vec![],
                outputs: vec![common.out.clone()],
                stdout: vec![format!("{count} traces")],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Ingest { input, length, common } => {
            let schema = TraceSchema::with_length(length);
            schema.validate().map_err(|e| usage(e.to_string()))?;
            let logs = trace::ingest_raw_log(open(&input)?, &schema).with_context(|| format!("reading {}", input.display()))?;
            let traces = trace::filter_complete(&logs, &schema);
            let mut w = create(&common.out)?;
            trace::write_traces_csv(&mut w, &traces)?;
            w.flush()?;
            Run {
                command: "ingest",
                argv,
                seed: None,
                config: serde_json::json!({"schema": schema}),
                inputs: vec![input],
                outputs: vec![common.out.clone()],
                stdout: vec![format!("{} of {} links complete", traces.len(), logs.len())],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Inject {
            input,
            suddend,
            suddenr,
            instad,
            slowd,
            each,
            clean,
            common,
        } => {
            let cfg = train_config(&common, None)?;
            let any = [suddend, suddenr, instad, slowd, each, clean].iter().any(Option::is_some);
            let composition = if any {
                let pick = |v: Option<usize>| v.or(each).unwrap_or(0);
                Composition {
                    suddend: pick(suddend),
                    suddenr: pick(suddenr),
                    instad: pick(instad),
                    slowd: pick(slowd),
                    clean: clean.unwrap_or(0),
                }
            } else {
                Composition::paper()
            };
            if composition.total() == 0 {
                return Err(usage("composition requests no traces"));
            }
            let (pool, schema) = read_traces(&input)?;
            let params = InjectionParams::for_length(schema.expected_length);
            let data = inject::build_dataset(&pool, &composition, &params, &schema, cfg.seed)?;
            let mut w = create(&common.out)?;
            inject::write_dataset(&mut w, &data)?;
            w.flush()?;
            Run {
                command: "inject",
                argv,
                seed: Some(cfg.seed),
                config: serde_json::json!({"composition": composition, "params": params, "schema": schema}),
                inputs: vec![input],
                outputs: vec![common.out.clone()],
                stdout: vec![format!("{} total, {} anomalous traces", data.len(), composition.anomalous())],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Transform { input, bins, common } => {
            let cfg = train_config(&common, None)?;
            let bins = bins.or(cfg.n_bins);
            if bins == Some(0) {
                return Err(usage("--bins must be at least 1"));
            }
            let (data, schema) = read_dataset(&input)?;
            let traces: Vec<&RssiTrace> = data.iter().map(|t| &t.trace).collect();
            let graphs = mtf::transform_many::<f64>(&traces, &schema, bins, cfg.workers)?;
            let records: Vec<(String, TsGraph<f64>)> =
                data.iter().map(|t| t.trace.link_id.clone()).zip(graphs).collect();
            let mut w = create(&common.out)?;
            mtf::write_graphs(&mut w, &records)?;
            w.flush()?;
            Run {
                command: "transform",
                argv,
                seed: None,
                config: serde_json::json!({"n_bins": bins, "schema": schema}),
                inputs: vec![input],
                outputs: vec![common.out.clone()],
                stdout: vec![format!("{} graphs", records.len())],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Train {
            data,
            overrides,
            common,
        } => {
            let cfg = train_config(&common, Some(&overrides))?;
            let (_, samples, schema) = load_samples(&data)?;
            let echo = serde_json::json!({"train": cfg, "model": ModelConfig::default()});
            let cv = train::cross_validate(&samples, &ModelConfig::default(), &cfg, echo.clone())?;
            let out = &common.out;
            let mut outputs = Vec::new();
            for (k, s) in cv.splits.iter().enumerate() {
                let stem = checkpoint_stem(out, k);
                fs::create_dir_all(stem.parent().expect("stem has a parent"))?;
                let meta = CheckpointMeta {
                    schema: schema.clone(),
                    n_bins: cfg.n_bins,
                    threshold: cfg.threshold,
                    split: k,
                    train_seed: cfg.seed,
                };
                s.fit.model.save_checkpoint(&stem, serde_json::to_value(&meta)?)?;
                let (json, bin) = gat::checkpoint_paths(&stem);
                outputs.push(json);
                outputs.push(bin);
            }
            let splits: Vec<&Split> = cv.splits.iter().map(|s| &s.split).collect();
            let files = [
                ("splits.json", serde_json::to_string(&splits)? + "\n"),
                ("loss_curves.csv", cv.loss_curves_csv()),
                ("report.json", cv.report.to_json()?),
                ("report.txt", cv.report.to_text()),
                ("report.csv", cv.report.to_csv()),
            ];
            for (name, text) in files {
                let p = out.join(name);
                write_text(&p, &text)?;
                outputs.push(p);
            }
            let stdout = vec![
                format!("parameters: {}", cv.report.parameter_count),
                format!(
                    "anomalous f1 {:.4}, non-anomalous f1 {:.4} over {} splits",
                    cv.report.averages.anomalous.f1,
                    cv.report.averages.normal.f1,
                    cv.report.per_split.len()
                ),
            ];
            Run {
                command: "train",
                argv,
                seed: Some(cfg.seed),
                config: echo,
                inputs: vec![data.dataset, data.graphs],
                outputs,
                stdout,
            }
            .finish(out.join("manifest.json"))
        }
        Command::Eval {
            checkpoint,
            data,
            splits,
            split,
            threshold,
            common,
        } => {
            let (model, manifest) = GatModel::<f64>::load_checkpoint(&checkpoint)?;
            let meta: CheckpointMeta =
                serde_json::from_value(manifest.meta.clone()).context("checkpoint metadata")?;
            let threshold = threshold.unwrap_or(meta.threshold);
            let (_, samples, _) = load_samples(&data)?;
            let mut inputs = vec![data.dataset.clone(), data.graphs.clone()];
            let (indices, label) = match (&splits, split) {
                (Some(path), Some(k)) => {
                    let all: Vec<Split> = serde_json::from_str(&fs::read_to_string(path)?)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let s = all
                        .get(k)
                        .ok_or_else(|| usage(format!("split {k} not in {} splits", all.len())))?;
                    inputs.push(path.clone());
                    (s.test.clone(), k)
                }
                _ => ((0..samples.len()).collect(), meta.split),
            };
            let confusion = train::evaluate(&model, &samples, &indices, threshold)?;
            let report = metrics::aggregate(
                vec![SplitMetrics::from_confusion(label, confusion)],
                model.parameter_count(),
                serde_json::json!({"checkpoint": checkpoint.display().to_string(), "threshold": threshold}),
            )?;
            let (ckpt_json, ckpt_bin) = gat::checkpoint_paths(&checkpoint);
            inputs.extend([ckpt_json, ckpt_bin]);
            write_text(&common.out, &report.to_json()?)?;
            let m = &report.per_split[0];
            Run {
                command: "eval",
                argv,
                seed: None,
                config: report.config.clone(),
                inputs,
                outputs: vec![common.out.clone()],
                stdout: vec![format!(
                    "split {label}: anomalous f1 {:.4}, non-anomalous f1 {:.4} on {} traces",
                    m.anomalous.f1,
                    m.normal.f1,
                    indices.len()
                )],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Predict {
            checkpoint,
            input,
            threshold,
            common,
        } => {
            let (model, manifest) = GatModel::<f64>::load_checkpoint(&checkpoint)?;
            let meta: CheckpointMeta =
                serde_json::from_value(manifest.meta.clone()).context("checkpoint metadata")?;
            let threshold = threshold.unwrap_or(meta.threshold);
            let (traces, schema) = if input.extension().is_some_and(|e| e == "jsonl") {
                let (data, schema) = read_dataset(&input)?;
                (data.into_iter().map(|t| t.trace).collect(), schema)
            } else {
                read_traces(&input)?
            };
            let mut w = create(&common.out)?;
            let mut flagged = 0;
            for t in &traces {
                let g = mtf::transform::<f64>(t, &schema, meta.n_bins)?;
                let labels = model.predict(&PreparedGraph::new(&g)?, threshold)?;
                flagged += labels.iter().filter(|&&l| l == 1).count();
                let p = Prediction {
                    link_id: t.link_id.clone(),
                    intervals: metrics::intervals(&labels),
                    labels,
                };
                serde_json::to_writer(&mut w, &p)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            let (ckpt_json, ckpt_bin) = gat::checkpoint_paths(&checkpoint);
            Run {
                command: "predict",
                argv,
                seed: None,
                config: serde_json::json!({"threshold": threshold, "n_bins": meta.n_bins}),
                inputs: vec![input, ckpt_json, ckpt_bin],
                outputs: vec![common.out.clone()],
                stdout: vec![format!("{} traces, {flagged} points labeled anomalous", traces.len())],
            }
            .finish(file_manifest(&common.out))
        }
        Command::Report { input, common } => {
            let report = EvalReport::from_json(&fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?)?;
            let (txt, csv) = (common.out.join("report.txt"), common.out.join("report.csv"));
            write_text(&txt, &report.to_text())?;
            write_text(&csv, &report.to_csv())?;
            Run {
                command: "report",
                argv,
                seed: None,
                config: serde_json::Value::Null,
                inputs: vec![input],
                outputs: vec![txt, csv],
                stdout: report.to_text().lines().map(str::to_string).collect(),
            }
            .finish(common.out.join("manifest.json"))
        }
        Command::Replay { manifest } => {
            let recorded: RunManifest = serde_json::from_str(
                &fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?,
            )
            .with_context(|| format!("parsing {}", manifest.display()))?;
            if recorded.argv.first().is_some_and(|c| c == "replay") {
                return Err(usage("cannot replay a replay"));
            }
            for input in &recorded.inputs {
                let now = sha256_file(Path::new(&input.path))?;
                if now != input.sha256 {
                    bail!("input {} changed since the recorded run", input.path);
                }
            }
            run(&recorded.argv)?;
            let mut mismatched = Vec::new();
            for output in &recorded.outputs {
                if sha256_file(Path::new(&output.path))? != output.sha256 {
                    mismatched.push(output.path.clone());
                }
            }
            if !mismatched.is_empty() {
                bail!("outputs differ from the recorded run: {}", mismatched.join(", "));
            }
            Ok(Outcome {
                stdout: vec![format!("{} outputs reproduced", recorded.outputs.len())],
                manifest: None,
            })
        }
    }
}
