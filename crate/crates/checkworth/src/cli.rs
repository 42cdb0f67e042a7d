//! The `checkworth` command line.
//!
//! Every tunable flag can also be set in the file given by `--config`
//! (see [`crate::config`]); flags win over the file, the file over
//! defaults. All randomness derives from `--seed`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use checkworth_core::analysis::{explain, overlap_experiment, Explanation, OverlapConfig};
use checkworth_core::corpus::{dataset_stats, label_histogram, Dataset, DatasetKind};
use checkworth_core::embedding::{train_skipgram, SkipGramConfig};
use checkworth_core::encoder::encode;
use checkworth_core::eval::{Averaging, EvalReport};
use checkworth_core::network::{AttentionKind, Grid, TrainConfig};
use checkworth_core::pipeline::{Pipeline, PipelineConfig, WeakSetup};
use checkworth_core::rng::derive_seed;
use checkworth_core::weaksup::{SweepConfig, ThresholdMode};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::ConfigFile;
use crate::experiment::{
    build_resources, merged_with_unique_ids, run_folds, run_sweep, thread_pool, EmbeddingSource,
    ResourceOptions,
};
use crate::jsonl::load_jsonl;
use crate::manifest::{manifest_path, RunManifest};
use crate::render::{render, Format};
use crate::report::{
    folds_csv, histogram_csv, overlap_csv, stats_csv, summary_table, sweep_csv, to_pretty_json,
};
use crate::word2vec::{write_sidecar, write_text};

#[derive(Debug, Parser)]
#[command(
    name = "checkworth",
    version,
    about = "Rank sentences by check-worthiness"
)]
pub struct Cli {
    /// Key-value config file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for folds; 1 runs everything on the main thread.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train skip-gram word embeddings.
    Embed(EmbedArgs),
    /// Train one model on all gold data and save a checkpoint.
    Train(TrainArgs),
    /// Score and rank sentences with a checkpoint.
    Rank(RankArgs),
    /// Run the leave-one-speech-out evaluation protocol.
    Eval(EvalArgs),
    /// Evaluate with growing fractions of the weak data.
    Sweep(SweepArgs),
    /// Dependency-tag overlap between and within label groups.
    Overlap(OverlapArgs),
    /// Highlight the attention weights of a checkpoint.
    Explain(ExplainArgs),
    /// Dataset statistics and label histograms.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// JSONL corpus files.
    #[arg(long, required = true, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Output in word2vec text format.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a lossless binary copy to `<out>.vec`.
    #[arg(long)]
    pub sidecar: bool,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Gold-labelled JSONL.
    #[arg(long)]
    pub gold: PathBuf,
    /// Weakly labelled JSONL; enables pretraining followed by fine-tuning.
    #[arg(long)]
    pub weak: Option<PathBuf>,
    /// Weak-label transformation: binarize or truncate-scale.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Extra unlabelled JSONL for `--embeddings train`.
    #[arg(long, num_args = 1..)]
    pub embedding_corpus: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// train, random, none, or a vector file.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSource>,
    /// Width of trained or random embeddings.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Drop the dependency-tag channel.
    #[arg(long)]
    pub no_dep: bool,
    /// Keep embedding rows fixed during network training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Dense layer width; a quarter of `--hidden` by default.
    #[arg(long)]
    pub dense: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// affine, or mlp:N for a tanh scorer with N hidden units.
    #[arg(long)]
    pub attention: Option<Attention>,
    #[arg(long)]
    pub pretrain_learning_rate: Option<f64>,
    #[arg(long)]
    pub pretrain_batch: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Select hidden and batch size per fold on validation MAP.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, value_name = "LIST")]
    pub grid_hidden: Option<List<usize>>,
    #[arg(long, value_name = "LIST")]
    pub grid_batch: Option<List<usize>>,
    /// Pool all test sentences of a repetition instead of averaging per speech.
    #[arg(long)]
    pub pooled: bool,
    /// A previous `report.json` to test against.
    #[arg(long, value_name = "REPORT")]
    pub compare: Option<PathBuf>,
    /// Row label in the summary table.
    #[arg(long)]
    pub name: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_name = "LIST")]
    pub fractions: Option<List<f64>>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub pooled: bool,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSONL to score; labels are optional.
    #[arg(long)]
    pub input: PathBuf,
    /// Restart the ranking within each speech.
    #[arg(long)]
    pub per_speech: bool,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// gold or weak.
    #[arg(long)]
    pub kind: Option<Kind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub positive_threshold: Option<f64>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// html, ansi or json.
    #[arg(long)]
    pub format: Option<Format>,
    /// Only these sentence ids.
    #[arg(long, value_name = "LIST")]
    pub ids: Option<List<String>>,
    /// Only the highest-scoring N sentences.
    #[arg(long)]
    pub top: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub gold: Vec<PathBuf>,
    #[arg(long)]
    pub weak: Vec<PathBuf>,
    #[arg(long)]
    pub unlabelled: Vec<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Per-speaker label histogram CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Weak-label transformation as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode(pub ThresholdMode);

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binarize" => Ok(Mode(ThresholdMode::Binarize)),
            "truncate-scale" | "truncate_scale" => Ok(Mode(ThresholdMode::TruncateScale)),
            _ => Err(format!(
                "unknown mode `{s}` (expected binarize or truncate-scale)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attention(pub AttentionKind);

impl FromStr for Attention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "affine" {
            return Ok(Attention(AttentionKind::Affine));
        }
        s.strip_prefix("mlp:")
            .and_then(|n| n.parse().ok())
            .map(|size| Attention(AttentionKind::TanhMlp { size }))
            .ok_or_else(|| format!("unknown attention `{s}` (expected affine or mlp:N)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kind(pub DatasetKind);

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gold" => Ok(Kind(DatasetKind::Gold)),
            "weak" => Ok(Kind(DatasetKind::Weak)),
            _ => Err(format!(
                "unknown dataset kind `{s}` (expected gold or weak)"
            )),
        }
    }
}

/// Comma-separated values.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

/// Global settings after merging flags with the config file.
struct Settings {
    file: ConfigFile,
    seed: u64,
    jobs: usize,
}

impl Settings {
    fn new(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => {
                ConfigFile::load(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => ConfigFile::default(),
        };
        let seed = file.resolve(cli.seed, "seed", 0)?;
        let jobs = file.resolve(cli.jobs, "jobs", 1)?;
        Ok(Self { file, seed, jobs })
    }

    fn warn_unused(&self) {
        for key in self.file.unused() {
            warn!("config key `{key}` is not used by this command");
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Settings::new(&cli)?;
    match &cli.command {
        Command::Embed(a) => cmd_embed(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Rank(a) => cmd_rank(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Overlap(a) => cmd_overlap(&ctx, a),
        Command::Explain(a) => cmd_explain(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
    }
}

fn load(path: &Path, kind: DatasetKind) -> Result<Dataset> {
    let loaded = load_jsonl(path, kind).with_context(|| format!("loading {}", path.display()))?;
    for w in &loaded.warnings {
        warn!("{}: {w}", path.display());
    }
    info!("{}: {} sentences", path.display(), loaded.dataset.len());
    Ok(loaded.dataset)
}

fn skipgram_defaults(ctx: &Settings) -> Result<SkipGramConfig> {
    let d = SkipGramConfig::default();
    let f = &ctx.file;
    Ok(SkipGramConfig {
        window: f.resolve(None, "window", d.window)?,
        negatives_per_word: f.resolve(None, "negatives", d.negatives_per_word)?,
        epochs: f.resolve(None, "embedding-epochs", d.epochs)?,
        learning_rate: f.resolve(None, "embedding-learning-rate", d.learning_rate)?,
        subsample_threshold: f.resolve(None, "subsample", d.subsample_threshold)?,
        ..d
    })
}

fn cmd_embed(ctx: &Settings, a: &EmbedArgs) -> Result<()> {
    let f = &ctx.file;
    let d = SkipGramConfig::default();
    let config = SkipGramConfig {
        dim: f.resolve(a.dim, "dim", d.dim)?,
        window: f.resolve(a.window, "window", d.window)?,
        negatives_per_word: f.resolve(a.negatives, "negatives", d.negatives_per_word)?,
        epochs: f.resolve(a.epochs, "epochs", d.epochs)?,
        learning_rate: f.resolve(a.learning_rate, "learning-rate", d.learning_rate)?,
        subsample_threshold: f.resolve(a.subsample, "subsample", d.subsample_threshold)?,
        seed: derive_seed(ctx.seed, "skipgram", &[]),
        ..d
    };
    let min_count = f.resolve(a.min_count, "min-count", 1)?;
    ctx.warn_unused();

    let mut manifest = RunManifest::start("embed", ctx.seed);
    let mut datasets = Vec::new();
    for p in &a.corpus {
        datasets.push(load(p, DatasetKind::Unlabelled)?);
        manifest.input("corpus", p)?;
    }
    let refs: Vec<&Dataset> = datasets.iter().collect();
    let corpus = merged_with_unique_ids(&refs)?;
    let vocab = checkworth_core::corpus::build_vocabulary(&[&corpus], min_count)?;
    info!(
        "training {}-dimensional vectors for {} words",
        config.dim,
        vocab.len()
    );
    let outcome = train_skipgram(&corpus, &vocab, &config)?;
    for (e, l) in outcome.epoch_losses.iter().enumerate() {
        info!("epoch {}: loss {l:.4}", e + 1);
    }
    manifest.config = json!({ "skipgram": config, "min_count": min_count });

    let mut text = Vec::new();
    write_text(&mut text, &vocab, &outcome.table)?;
    manifest.output(&a.out, &text)?;
    if a.sidecar {
        let mut bin = Vec::new();
        write_sidecar(&mut bin, &vocab, &outcome.table)?;
        let mut p = a.out.clone().into_os_string();
        p.push(".vec");
        manifest.output(PathBuf::from(p), &bin)?;
    }
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

/// Datasets, resources and pipeline configuration for train, eval and sweep.
struct Setup {
    gold: Dataset,
    weak: Option<Dataset>,
    extra: Vec<Dataset>,
    resource_options: ResourceOptions,
    config: PipelineConfig,
}

fn setup(
    ctx: &Settings,
    data: &DataArgs,
    m: &ModelArgs,
    grid: Option<Grid>,
    pooled: bool,
    manifest: &mut RunManifest,
) -> Result<Setup> {
    let f = &ctx.file;
    let dt = TrainConfig::default();
    let train = TrainConfig {
        hidden_size: f.resolve(m.hidden, "hidden", dt.hidden_size)?,
        dense_size: match m.dense {
            Some(d) => Some(d),
            None => f.get("dense")?,
        },
        batch_size: f.resolve(m.batch, "batch", dt.batch_size)?,
        learning_rate: f.resolve(m.learning_rate, "learning-rate", dt.learning_rate)?,
        max_epochs: f.resolve(m.epochs, "epochs", dt.max_epochs)?,
        patience: f.resolve(m.patience, "patience", dt.patience)?,
        attention: f
            .resolve(m.attention, "attention", Attention(dt.attention))?
            .0,
        grid: grid.unwrap_or_default(),
        ..dt
    };
    let weak_mode = f
        .resolve(data.mode, "mode", Mode(ThresholdMode::default()))?
        .0;
    let weak = match &data.weak {
        Some(p) => {
            manifest.input("weak", p)?;
            Some(load(p, DatasetKind::Weak)?)
        }
        None => None,
    };
    let pretrain = TrainConfig {
        learning_rate: f.resolve(
            m.pretrain_learning_rate,
            "pretrain-learning-rate",
            train.learning_rate,
        )?,
        batch_size: f.resolve(m.pretrain_batch, "pretrain-batch", train.batch_size)?,
        max_epochs: f.resolve(m.pretrain_epochs, "pretrain-epochs", train.max_epochs)?,
        patience: f.resolve(m.pretrain_patience, "pretrain-patience", train.patience)?,
        ..train.clone()
    };
    let source = f.resolve(m.embeddings.clone(), "embeddings", EmbeddingSource::Train)?;
    let use_dep = !f.switch(m.no_dep, "no-dep")?;
    let trainable = !f.switch(m.freeze_embeddings, "freeze-embeddings")?;
    let encoder = source.encoder(use_dep, trainable);
    encoder.validate()?;
    let dp = PipelineConfig::default();
    let config = PipelineConfig {
        encoder,
        train,
        weak: weak.as_ref().map(|_| WeakSetup {
            mode: weak_mode,
            pretrain,
        }),
        grid_search: false,
        averaging: if f.switch(pooled, "pooled")? {
            Averaging::Pooled
        } else {
            Averaging::PerQuery
        },
        validation_fraction: f.resolve(
            m.validation_fraction,
            "validation-fraction",
            dp.validation_fraction,
        )?,
        repetitions: f.resolve(m.repetitions, "repetitions", dp.repetitions)?,
        seed: ctx.seed,
    };
    let resource_options = ResourceOptions {
        dim: f.resolve(
            m.embedding_dim,
            "embedding-dim",
            SkipGramConfig::default().dim,
        )?,
        min_count: f.resolve(m.min_count, "min-count", 1)?,
        seed: ctx.seed,
        skipgram: skipgram_defaults(ctx)?,
        source,
    };
    if let EmbeddingSource::File(p) = &resource_options.source {
        manifest.input("embeddings", p)?;
    }
    manifest.input("gold", &data.gold)?;
    let gold = load(&data.gold, DatasetKind::Gold)?;
    let mut extra = Vec::new();
    for p in &data.embedding_corpus {
        manifest.input("embedding-corpus", p)?;
        extra.push(load(p, DatasetKind::Unlabelled)?);
    }
    Ok(Setup {
        gold,
        weak,
        extra,
        resource_options,
        config,
    })
}

impl Setup {
    fn pipeline(self, manifest: &mut RunManifest) -> Result<Pipeline> {
        let mut all: Vec<&Dataset> = vec![&self.gold];
        all.extend(self.weak.as_ref());
        all.extend(self.extra.iter());
        let (resources, notes) = build_resources(&all, &self.resource_options)?;
        for n in notes {
            info!("{n}");
        }
        manifest.config = json!({
            "pipeline": self.config,
            "embeddings": self.resource_options.source.to_string(),
            "embedding_dim": self.resource_options.dim,
            "min_count": self.resource_options.min_count,
            "skipgram": self.resource_options.skipgram,
        });
        Ok(Pipeline::new(
            self.gold,
            self.weak.as_ref(),
            resources,
            self.config,
        )?)
    }
}

fn cmd_train(ctx: &Settings, a: &TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("train", ctx.seed);
    let setup = setup(ctx, &a.data, &a.model, None, false, &mut manifest)?;
    ctx.warn_unused();
    let pipeline = setup.pipeline(&mut manifest)?;
    let outcome = pipeline.train_full(&pipeline.all_weak())?;
    info!(
        "best validation MAP {:.4} at epoch {}",
        outcome.log.best_valid_map, outcome.log.best_epoch
    );
    let ckpt = Checkpoint::new(
        &outcome.model,
        pipeline.resources(),
        pipeline.config().encoder,
    );
    manifest.output(&a.out, ckpt.to_json().as_bytes())?;
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_eval(ctx: &Settings, a: &EvalArgs) -> Result<()> {
    let f = &ctx.file;
    let mut manifest = RunManifest::start("eval", ctx.seed);
    let dg = Grid::default();
    let grid = Grid {
        hidden_sizes: f
            .resolve(a.grid_hidden.clone(), "grid-hidden", List(dg.hidden_sizes))?
            .0,
        batch_sizes: f
            .resolve(a.grid_batch.clone(), "grid-batch", List(dg.batch_sizes))?
            .0,
    };
    let mut setup = setup(ctx, &a.data, &a.model, Some(grid), a.pooled, &mut manifest)?;
    setup.config.grid_search = f.switch(a.grid, "grid")?;
    let name = f.resolve(a.name.clone(), "name", "run".to_string())?;
    let baseline = match &a.compare {
        Some(p) => {
            manifest.input("baseline", p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let report: EvalReport = serde_json::from_str(&text)
                .with_context(|| format!("parsing report {}", p.display()))?;
            Some((p.display().to_string(), report))
        }
        None => None,
    };
    ctx.warn_unused();
    let pipeline = setup.pipeline(&mut manifest)?;
    let pool = thread_pool(ctx.jobs)?;
    let mut report = run_folds(&pipeline, &pipeline.all_weak(), pool.as_ref())?;
    if let Some((label, base)) = &baseline {
        report.significance = Some(report.compare(base, label)?);
    }
    let summary = summary_table(&[(&name, &report)]);
    print!("{summary}");

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    manifest.output(
        a.out.join("report.json"),
        to_pretty_json(&report).as_bytes(),
    )?;
    manifest.output(a.out.join("summary.txt"), summary.as_bytes())?;
    manifest.output(a.out.join("folds.csv"), folds_csv(&report).as_bytes())?;
    manifest.finish(a.out.join("manifest.json"))?;
    Ok(())
}

fn cmd_sweep(ctx: &Settings, a: &SweepArgs) -> Result<()> {
    if a.data.weak.is_none() {
        bail!("sweep needs --weak");
    }
    let f = &ctx.file;
    let mut manifest = RunManifest::start("sweep", ctx.seed);
    let d = SweepConfig::default();
    let sweep = SweepConfig {
        fractions: f
            .resolve(a.fractions.clone(), "fractions", List(d.fractions))?
            .0,
        resamples: f.resolve(a.resamples, "resamples", d.resamples)?,
        seed: ctx.seed,
    };
    sweep.validate()?;
    let setup = setup(ctx, &a.data, &a.model, None, a.pooled, &mut manifest)?;
    ctx.warn_unused();
    let pipeline = setup.pipeline(&mut manifest)?;
    manifest.config["sweep"] = json!(sweep);
    let pool = thread_pool(ctx.jobs)?;
    let table = run_sweep(&pipeline, &sweep, pool.as_ref())?;
    for (fraction, m) in table.means() {
        info!("fraction {fraction}: MAP {:.4}", m.map);
    }
    manifest.output(&a.out, sweep_csv(&table).as_bytes())?;
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_rank(ctx: &Settings, a: &RankArgs) -> Result<()> {
    ctx.warn_unused();
    let mut manifest = RunManifest::start("rank", ctx.seed);
    manifest.input("model", &a.model)?;
    manifest.input("input", &a.input)?;
    let ckpt =
        Checkpoint::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let data = load(&a.input, DatasetKind::Unlabelled)?;
    let model = ckpt.model();
    let mut scored = Vec::with_capacity(data.len());
    for s in data.sentences() {
        let enc = encode(
            s,
            &ckpt.vocabulary,
            ckpt.embeddings.as_ref(),
            &ckpt.tags,
            &ckpt.encoder,
        )?;
        scored.push((s, model.predict(&enc)?.score));
    }
    let order = |x: &(&checkworth_core::corpus::Sentence, f64),
                 y: &(&checkworth_core::corpus::Sentence, f64)| {
        y.1.total_cmp(&x.1).then_with(|| x.0.id.cmp(&y.0.id))
    };
    if a.per_speech {
        scored.sort_by(|x, y| x.0.speech_id.cmp(&y.0.speech_id).then_with(|| order(x, y)));
    } else {
        scored.sort_by(order);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "id", "speech_id", "score", "label"])?;
    let mut rank = 0;
    let mut speech: Option<&str> = None;
    for (s, score) in &scored {
        if a.per_speech && speech != Some(s.speech_id.as_str()) {
            speech = Some(&s.speech_id);
            rank = 0;
        }
        rank += 1;
        w.write_record([
            rank.to_string(),
            s.id.clone(),
            s.speech_id.clone(),
            score.to_string(),
            s.label.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    manifest.config = json!({ "per_speech": a.per_speech });
    manifest.output(&a.out, &w.into_inner()?)?;
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_overlap(ctx: &Settings, a: &OverlapArgs) -> Result<()> {
    let f = &ctx.file;
    let d = OverlapConfig::default();
    let config = OverlapConfig {
        n: f.resolve(a.n, "n", d.n)?,
        trials: f.resolve(a.trials, "trials", d.trials)?,
        positive_threshold: f.resolve(
            a.positive_threshold,
            "positive-threshold",
            d.positive_threshold,
        )?,
        seed: ctx.seed,
    };
    let kind = f.resolve(a.kind, "kind", Kind(DatasetKind::Gold))?.0;
    ctx.warn_unused();
    let mut manifest = RunManifest::start("overlap", ctx.seed);
    manifest.input("data", &a.data)?;
    let data = load(&a.data, kind)?;
    let results = overlap_experiment(&data, &config)?;
    for r in &results {
        info!(
            "{}: mean {:.3}, std {:.3}",
            r.group.name(),
            r.mean_overlap,
            r.std_overlap
        );
    }
    manifest.config = json!({ "overlap": config, "kind": kind });
    manifest.output(&a.out, overlap_csv(&results).as_bytes())?;
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_explain(ctx: &Settings, a: &ExplainArgs) -> Result<()> {
    let format = ctx.file.resolve(a.format, "format", Format::Html)?;
    ctx.warn_unused();
    let ckpt =
        Checkpoint::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let data = load(&a.input, DatasetKind::Unlabelled)?;
    let model = ckpt.model();
    let mut out: Vec<Explanation> = Vec::new();
    for s in data.sentences() {
        if let Some(List(ids)) = &a.ids {
            if !ids.contains(&s.id) {
                continue;
            }
        }
        out.push(explain(
            s,
            &model,
            &ckpt.vocabulary,
            &ckpt.tags,
            &ckpt.encoder,
        )?);
    }
    if let Some(List(ids)) = &a.ids {
        if let Some(missing) = ids.iter().find(|id| !out.iter().any(|e| &e.id == *id)) {
            bail!("no sentence with id `{missing}` in {}", a.input.display());
        }
    }
    if let Some(n) = a.top {
        out.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.id.cmp(&y.id)));
        out.truncate(n);
    }
    let text = render(&out, format);
    match &a.out {
        Some(p) => {
            let mut manifest = RunManifest::start("explain", ctx.seed);
            manifest.input("model", &a.model)?;
            manifest.input("input", &a.input)?;
            manifest.output(p, text.as_bytes())?;
            manifest.finish(manifest_path(p))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn cmd_stats(ctx: &Settings, a: &StatsArgs) -> Result<()> {
    let bins = ctx.file.resolve(a.bins, "bins", 10)?;
    ctx.warn_unused();
    let mut manifest = RunManifest::start("stats", ctx.seed);
    let mut rows = Vec::new();
    let mut histograms = Vec::new();
    let inputs = a
        .gold
        .iter()
        .map(|p| (p, DatasetKind::Gold))
        .chain(a.weak.iter().map(|p| (p, DatasetKind::Weak)))
        .chain(a.unlabelled.iter().map(|p| (p, DatasetKind::Unlabelled)));
    for (p, kind) in inputs {
        manifest.input(&format!("{kind:?}").to_lowercase(), p)?;
        let d = load(p, kind)?;
        rows.push((stem(p), dataset_stats(&d)?));
        histograms.push((stem(p), label_histogram(&d, bins)));
    }
    if rows.is_empty() {
        bail!("stats needs at least one of --gold, --weak or --unlabelled");
    }
    manifest.config = json!({ "bins": bins });
    manifest.output(&a.out, stats_csv(&rows).as_bytes())?;
    if let Some(h) = &a.histogram {
        manifest.output(h, histogram_csv(&histograms).as_bytes())?;
    }
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(
            "mlp:4".parse::<Attention>().unwrap().0,
            AttentionKind::TanhMlp { size: 4 }
        );
        assert!("mlp:x".parse::<Attention>().is_err());
        assert_eq!(
            "truncate-scale".parse::<Mode>().unwrap().0,
            ThresholdMode::TruncateScale
        );
        assert_eq!(
            "0,0.5,1".parse::<List<f64>>().unwrap().0,
            vec![0.0, 0.5, 1.0]
        );
        assert!("1,x".parse::<List<usize>>().is_err());
        assert_eq!("weak".parse::<Kind>().unwrap().0, DatasetKind::Weak);
    }

    #[test]
    fn missing_corpus_is_a_usage_error() {
        let err = Cli::try_parse_from(["checkworth", "embed", "--out", "x.txt"]).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::MissingRequiredArgument);
    }

    #[test]
    fn global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "checkworth",
            "eval",
            "--gold",
            "g.jsonl",
            "--out",
            "o",
            "--seed",
            "3",
            "--jobs",
            "2",
            "--pooled",
        ])
        .unwrap();
        assert_eq!((cli.seed, cli.jobs), (Some(3), Some(2)));
        let Command::Eval(e) = cli.command else {
            panic!()
        };
        assert!(e.pooled);
    }
}
