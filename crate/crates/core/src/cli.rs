//! The `cqs` command line.
//!
//! Arguments are first resolved into a [`RunConfig`] with every default
//! filled in. That config is written to `<outdir>/config.json` and can be
//! replayed with `cqs --config <file>`.
//!
//! Exit status: 0 on success, 1 on a pipeline error (printed as one
//! `error[<category>]: <message>` line on stderr), 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::field::{load_raw, minmax_normalize_values, sample_blocks, Dims, SyntheticSpec};
use crate::pipeline::{
    self, ablation_moe, build_labels, evaluate, log_uniform_grid, preset_grid, split, timing_sweep, train_backbone,
    train_heads, write_ablation_csv, BlockSpec, Dataset, EvalReport, Granularity, LabelTable, SplitSpec, TimingReport,
    TrainConfig,
};
use crate::surrogate::{load_model, save_model, BackboneConfig, HeadKind, Metric, SurrogateModel};

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

pub const SEED_ENV: &str = "DCQ_SEED";
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(
    name = "cqs",
    version,
    about = "Predict lossy-compression quality with a learned surrogate"
)]
struct Cli {
    /// Replay a resolved config.json instead of parsing a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all randomness [default: $DCQ_SEED, else 2024].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    outdir: PathBuf,
    /// Worker threads for labeling and inference [default: available cores].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Desk preset: 100/60 training epochs and 32 blocks per timestep.
    #[arg(long, global = true)]
    desk: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded synthetic volumes and a manifest.
    GenSynthetic(GenArgs),
    /// Compress sampled blocks and record ground-truth quality labels.
    Label(LabelArgs),
    /// Phase 1: train the shared backbone.
    TrainBackbone(TrainBackboneArgs),
    /// Phase 2: train prediction heads on a frozen backbone.
    TrainHead(TrainHeadArgs),
    /// Predict one metric for a raw volume.
    Predict(PredictArgs),
    /// Evaluate a model on held-out labels.
    Eval(EvalArgs),
    /// Compare plain MLP and MoE heads.
    AblateMoe(AblateArgs),
    /// Time ground truth against surrogate inference over an eb grid.
    TimeSweep(TimeSweepArgs),
    /// Print a model summary as JSON.
    InspectModel(InspectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value = "64,64,64", value_parser = parse_dims)]
    dims: Dims,
    #[arg(long, default_value_t = 4)]
    timesteps: u32,
    #[arg(long, default_value_t = 6)]
    modes: u32,
    #[arg(long, default_value_t = 3.0)]
    max_frequency: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0.02)]
    drift: f64,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Named range: nyx, hurricane, miranda or rtm.
    #[arg(long, default_value = "nyx")]
    eb_preset: String,
    /// Custom range `lo,hi`; overrides the preset.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range)]
    eb_range: Option<(f64, f64)>,
    /// Points in a preset or custom range.
    #[arg(long, default_value_t = pipeline::DEFAULT_EB_POINTS)]
    eb_points: usize,
    /// Explicit comma-separated bounds; overrides preset and range.
    #[arg(long, value_delimiter = ',')]
    eb_grid: Option<Vec<f64>>,
}

impl GridArgs {
    fn resolve(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.eb_grid {
            pipeline::validate_grid(g)?;
            return Ok(g.clone());
        }
        match self.eb_range {
            Some((lo, hi)) => log_uniform_grid(lo, hi, self.eb_points),
            None => preset_grid(&self.eb_preset, self.eb_points),
        }
    }
}

#[derive(Debug, Args)]
struct LabelArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "pred-eb,xform-eb")]
    codecs: Vec<CodecId>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "16,16,16", value_parser = parse_dims)]
    block_dims: Dims,
    /// Blocks per (field, timestep) [default: 64, or 32 with --desk].
    #[arg(long)]
    blocks: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// [default: 250 for the backbone and 150 for heads; 100/60 with --desk]
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// [default: 8 blocks for the backbone, 128 rows for heads]
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainBackboneArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "odd_even")]
    split: SplitSpec,
    #[arg(long, default_value_t = 16)]
    stem_channels: usize,
    #[arg(long, default_value_t = 64)]
    feature_dim: usize,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct TrainHeadArgs {
    /// Model holding the frozen backbone.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "odd_even")]
    split: SplitSpec,
    /// Codecs to train heads for [default: all in the labels].
    #[arg(long, value_delimiter = ',')]
    codec: Vec<CodecId>,
    /// Metrics to train heads for [default: all with defined targets].
    #[arg(long, value_delimiter = ',')]
    metric: Vec<Metric>,
    #[arg(long, default_value = "moe")]
    kind: HeadKind,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    codec: CodecId,
    #[arg(long)]
    metric: Metric,
    #[arg(long)]
    eb: f64,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_dims)]
    dims: Dims,
    /// Blocks averaged into the prediction.
    #[arg(long, default_value_t = 32)]
    blocks: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "odd_even")]
    split: SplitSpec,
    #[arg(long, default_value = "block")]
    granularity: Granularity,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "odd_even")]
    split: SplitSpec,
    /// Reuse this model's backbone instead of training one per seed.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Head seeds [default: --seed].
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Backbone epochs when no --model is given [default: 250, or 100 with --desk].
    #[arg(long)]
    backbone_epochs: Option<usize>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Debug, Args)]
struct TimeSweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_dims)]
    dims: Dims,
    #[arg(long, default_value = "pred-eb")]
    codec: CodecId,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 32)]
    blocks: usize,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn parse_dims(s: &str) -> Result<Dims> {
    Dims::parse(s)
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let bad = || format!("expected `lo,hi`, got {s:?}");
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

/// A fully resolved invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub outdir: PathBuf,
    pub workers: usize,
    pub desk: bool,
    pub command: CommandConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum CommandConfig {
    GenSynthetic {
        spec: SyntheticSpec,
        timesteps: u32,
    },
    Label {
        manifest: PathBuf,
        codecs: Vec<CodecId>,
        eb_grid: Vec<f64>,
        block_spec: BlockSpec,
    },
    TrainBackbone {
        labels: PathBuf,
        split: SplitSpec,
        backbone: BackboneConfig,
        train: TrainConfig,
    },
    TrainHead {
        model: PathBuf,
        labels: PathBuf,
        split: SplitSpec,
        codecs: Vec<CodecId>,
        metrics: Vec<Metric>,
        kind: HeadKind,
        train: TrainConfig,
    },
    Predict {
        model: PathBuf,
        codec: CodecId,
        metric: Metric,
        eb_rel: f64,
        input: PathBuf,
        dims: Dims,
        blocks: usize,
    },
    Eval {
        model: PathBuf,
        labels: PathBuf,
        split: SplitSpec,
        granularity: Granularity,
    },
    AblateMoe {
        labels: PathBuf,
        split: SplitSpec,
        model: Option<PathBuf>,
        seeds: Vec<u64>,
        backbone_train: TrainConfig,
        head_train: TrainConfig,
    },
    TimeSweep {
        model: PathBuf,
        input: PathBuf,
        dims: Dims,
        codec: CodecId,
        eb_grid: Vec<f64>,
        repetitions: usize,
        blocks: usize,
    },
    InspectModel {
        model: PathBuf,
    },
}

fn train_config(args: &TrainArgs, base: TrainConfig) -> TrainConfig {
    TrainConfig {
        epochs: args.epochs.unwrap_or(base.epochs),
        lr0: args.lr,
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        seed: base.seed,
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return Ok(serde_json::from_str(&text)?);
    }
    let seed = resolve_seed(cli.seed)?;
    let desk = cli.desk;
    let command = match cli
        .command
        .ok_or_else(|| Error::Argument("no subcommand given".into()))?
    {
        Command::GenSynthetic(a) => CommandConfig::GenSynthetic {
            spec: SyntheticSpec {
                dims: a.dims,
                seed,
                n_modes: a.modes,
                max_frequency: a.max_frequency,
                noise_amplitude: a.noise,
                drift: a.drift,
            },
            timesteps: a.timesteps,
        },
        Command::Label(a) => CommandConfig::Label {
            manifest: a.manifest,
            codecs: a.codecs,
            eb_grid: a.grid.resolve()?,
            block_spec: BlockSpec {
                dims: a.block_dims,
                count: a.blocks.unwrap_or(if desk { 32 } else { 64 }),
            },
        },
        Command::TrainBackbone(a) => CommandConfig::TrainBackbone {
            labels: a.labels,
            split: a.split,
            backbone: BackboneConfig {
                stem_channels: a.stem_channels,
                feature_dim: a.feature_dim,
                ..BackboneConfig::default()
            },
            train: train_config(&a.train, TrainConfig::backbone(seed, desk)),
        },
        Command::TrainHead(a) => CommandConfig::TrainHead {
            model: a.model,
            labels: a.labels,
            split: a.split,
            codecs: a.codec,
            metrics: a.metric,
            kind: a.kind,
            train: train_config(&a.train, TrainConfig::head(seed, desk)),
        },
        Command::Predict(a) => CommandConfig::Predict {
            model: a.model,
            codec: a.codec,
            metric: a.metric,
            eb_rel: a.eb,
            input: a.input,
            dims: a.dims,
            blocks: a.blocks,
        },
        Command::Eval(a) => CommandConfig::Eval {
            model: a.model,
            labels: a.labels,
            split: a.split,
            granularity: a.granularity,
        },
        Command::AblateMoe(a) => CommandConfig::AblateMoe {
            labels: a.labels,
            split: a.split,
            model: a.model,
            seeds: if a.seeds.is_empty() { vec![seed] } else { a.seeds },
            backbone_train: {
                let base = TrainConfig::backbone(seed, desk);
                TrainConfig {
                    epochs: a.backbone_epochs.unwrap_or(base.epochs),
                    ..base
                }
            },
            head_train: train_config(&a.train, TrainConfig::head(seed, desk)),
        },
        Command::TimeSweep(a) => CommandConfig::TimeSweep {
            model: a.model,
            input: a.input,
            dims: a.dims,
            codec: a.codec,
            eb_grid: a.grid.resolve()?,
            repetitions: a.repetitions,
            blocks: a.blocks,
        },
        Command::InspectModel(a) => CommandConfig::InspectModel { model: a.model },
    };
    Ok(RunConfig {
        seed,
        outdir: cli.outdir,
        workers: cli
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        desk,
        command,
    })
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if cli.command.is_none() && cli.config.is_none() {
        eprintln!("error: no subcommand given\n\nFor more information, try '--help'.");
        return 2;
    }
    match resolve(cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            1
        }
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn split_labels(path: &Path, spec: SplitSpec) -> Result<(LabelTable, LabelTable)> {
    split(&LabelTable::read(path)?, spec)
}

/// Runs a resolved config, writing outputs under its `outdir`.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.outdir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| execute_command(cfg))
}

fn execute_command(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.outdir;
    match &cfg.command {
        CommandConfig::GenSynthetic { spec, timesteps } => {
            let manifest = pipeline::generate_dataset(spec, *timesteps, out)?;
            say!("{}", manifest.display());
        }
        CommandConfig::Label {
            manifest,
            codecs,
            eb_grid,
            block_spec,
        } => {
            let table = build_labels(manifest, codecs, eb_grid, *block_spec, cfg.seed)?;
            let path = out.join("labels.csv");
            table.write(&path)?;
            say!("{} ({} rows)", path.display(), table.rows.len());
        }
        CommandConfig::TrainBackbone {
            labels,
            split,
            backbone,
            train,
        } => {
            let (train_labels, _) = split_labels(labels, *split)?;
            let data = Dataset::from_labels(&train_labels)?;
            let run = train_backbone(
                &data,
                BackboneConfig {
                    block_dims: train_labels.provenance.block_spec.dims,
                    ..backbone.clone()
                },
                *train,
            )?;
            let mut model = SurrogateModel::new(run.backbone, cfg.seed);
            model.training = serde_json::json!({
                "labels": train_labels.provenance.manifest_hash,
                "split": split,
                "backbone": run.log,
                "supervised_pairs": run.pairs,
            });
            let path = out.join("backbone.dcqm");
            save_model(&model, &path)?;
            say!("{}", path.display());
        }
        CommandConfig::TrainHead {
            model,
            labels,
            split,
            codecs,
            metrics,
            kind,
            train,
        } => {
            let mut m = load_model(model)?;
            let (train_labels, _) = split_labels(labels, *split)?;
            let data = Dataset::from_labels(&train_labels)?;
            let pairs: Vec<_> = data
                .pairs()
                .into_iter()
                .filter(|(c, mt)| {
                    (codecs.is_empty() || codecs.contains(c)) && (metrics.is_empty() || metrics.contains(mt))
                })
                .collect();
            if pairs.is_empty() {
                return Err(Error::Data(
                    "no labeled (codec, metric) pair matches the selection".into(),
                ));
            }
            let logs = train_heads(&mut m, &data, &pairs, *kind, *train)?;
            if let serde_json::Value::Object(map) = &mut m.training {
                let heads = map.entry("heads").or_insert_with(|| serde_json::json!({}));
                for (k, v) in logs {
                    heads[k] = serde_json::to_value(v)?;
                }
            }
            let path = out.join("model.dcqm");
            save_model(&m, &path)?;
            say!("{}", path.display());
        }
        CommandConfig::Predict {
            model,
            codec,
            metric,
            eb_rel,
            input,
            dims,
            blocks,
        } => {
            let m = load_model(model)?;
            let head = m.head(*codec, *metric)?;
            let field = load_raw(input, *dims)?;
            let sampled = sample_blocks(&field, m.backbone.config().block_dims, *blocks, cfg.seed)?;
            let normalized: Vec<Vec<f32>> = sampled.iter().map(|b| minmax_normalize_values(&b.values).0).collect();
            let features = m
                .backbone
                .extract_features(&normalized.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
            let pred = head.predict(*metric, &features, &[*eb_rel])?;
            let mean = pred.iter().map(|r| r[0]).sum::<f64>() / pred.len() as f64;
            let json = serde_json::json!({
                "codec": codec,
                "metric": metric,
                "eb_rel": eb_rel,
                "prediction": mean,
                "blocks": blocks,
            });
            let text = serde_json::to_string(&json)?;
            write_file(&out.join("prediction.json"), format!("{text}\n"))?;
            say!("{text}");
        }
        CommandConfig::Eval {
            model,
            labels,
            split,
            granularity,
        } => {
            let m = load_model(model)?;
            let (_, test) = split_labels(labels, *split)?;
            let report = evaluate(&m, &test, *granularity, cfg.seed)?;
            write_file(&out.join("eval_report.json"), report.to_json()?)?;
            let files = emit_plotdata(&report, &out.join("plotdata"))?;
            for r in &report.rows {
                say!("{} {} {} MAPE {:.3}%", r.codec, r.metric, r.field, r.mape);
            }
            say!("{} curve files in {}", files.len(), out.join("plotdata").display());
        }
        CommandConfig::AblateMoe {
            labels,
            split,
            model,
            seeds,
            backbone_train,
            head_train,
        } => {
            let (train_labels, test_labels) = split_labels(labels, *split)?;
            let train = Dataset::from_labels(&train_labels)?;
            let test = Dataset::from_labels(&test_labels)?;
            let backbone = model.as_deref().map(load_model).transpose()?.map(|m| m.backbone);
            let bcfg = BackboneConfig {
                block_dims: train_labels.provenance.block_spec.dims,
                ..BackboneConfig::default()
            };
            let rows = ablation_moe(
                backbone.as_ref(),
                &train,
                &test,
                &bcfg,
                *backbone_train,
                *head_train,
                seeds,
            )?;
            let path = out.join("ablation_moe.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_ablation_csv(&rows, file)?;
            say!("{}", path.display());
        }
        CommandConfig::TimeSweep {
            model,
            input,
            dims,
            codec,
            eb_grid,
            repetitions,
            blocks,
        } => {
            let field = load_raw(input, *dims)?;
            let report = timing_sweep(&field, *codec, eb_grid, model, *blocks, *repetitions, cfg.seed)?;
            write_file(&out.join("timing.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            let path = emit_timing(&report, out)?;
            say!(
                "{}: per-eb ground truth {:.4}s, surrogate {:.6}s",
                path.display(),
                report.gt_incremental(),
                report.surrogate_incremental()
            );
        }
        CommandConfig::InspectModel { model } => {
            let m = load_model(model)?;
            let text = serde_json::to_string_pretty(&inspect(&m))?;
            write_file(&out.join("inspect.json"), format!("{text}\n"))?;
            say!("{text}");
        }
    }
    Ok(())
}

/// JSON summary of a model: configs, head list, parameter counts and the
/// backbone hash.
pub fn inspect(m: &SurrogateModel) -> serde_json::Value {
    let heads: Vec<_> = m
        .heads
        .iter()
        .map(|((codec, metric), h)| {
            serde_json::json!({
                "codec": codec,
                "metric": metric,
                "config": h.config(),
                "parameters": h.params().num_values(),
            })
        })
        .collect();
    serde_json::json!({
        "format_version": crate::surrogate::FORMAT_VERSION,
        "seed": m.seed,
        "backbone": {
            "config": m.backbone.config(),
            "parameters": m.backbone.params().num_values(),
            "hash": m.backbone.params().hash(),
            "frozen": m.backbone.is_frozen(),
        },
        "heads": heads,
        "training": m.training,
    })
}

pub const CURVE_HEADER: [&str; 4] = ["eb_rel", "ground_truth", "prediction", "pe"];

/// Writes one `curve_<codec>_<metric>_<field>.csv` per report curve with
/// columns `eb_rel, ground_truth, prediction, pe` (pe in percent, signed).
pub fn emit_plotdata(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for c in &report.curves {
        let path = dir.join(format!("curve_{}_{}_{}.csv", c.codec, c.metric, c.field));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(CURVE_HEADER)?;
        for p in &c.points {
            w.write_record(&[
                p.eb_rel.to_string(),
                p.ground_truth.to_string(),
                p.prediction.to_string(),
                p.pe.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `timing_<codec>.csv` (cumulative curves) into `dir`.
pub fn emit_timing(report: &TimingReport, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("timing_{}.csv", report.codec));
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    report.write_csv(file)?;
    Ok(path)
}
