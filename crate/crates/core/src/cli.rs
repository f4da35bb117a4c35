//! Command-line front end. Every stage reads the corpus directory plus the
//! files earlier stages left in the run directory, so any stage can be
//! re-run on its own.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaigns::{
    build_phone_documents, detect_campaigns, filter_campaigns_with_spammers, read_campaigns_jsonl, silhouette_check,
    write_campaigns_jsonl, Campaign,
};
use crate::corpus::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::eval::{ablation_suite, setting1_loo, setting2_holdout, write_ablation_csv};
use crate::features::{assemble, hits_scores, read_features_csv, write_features_csv, FeatureMode};
use crate::feedback::{self, predict_all, write_feedback_log, write_predictions_csv};
use crate::hin::build_tree;
use crate::hmps::{read_scores_csv, score_all, write_scores_csv};
use crate::occ::KernelChoice;
use crate::pipeline::{Learning, Pipeline, RunConfig};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "campaigner", version, about = "Detect phone-number spam campaigns and the accounts behind them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Cluster phone numbers into campaigns (campaigns.jsonl).
    Campaigns(StageArgs),
    /// Build campaign trees and score users (trees.jsonl, scores.csv).
    Hmps(StageArgs),
    /// Assemble feature vectors (features.csv).
    Features(StageArgs),
    /// Run the campaign classifiers (predictions.csv, feedback_log.jsonl, models/).
    Train(StageArgs),
    /// Evaluate under one protocol (metrics.json, ablation.csv).
    Eval(EvalArgs),
    /// Run every stage in order.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; top-level keys are run settings, `[synth]` holds
    /// generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// Corpus directory holding tweets.jsonl, users.jsonl and optionally
    /// edges.csv.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub top_unigrams: Option<usize>,
    #[arg(long)]
    pub min_common: Option<usize>,
    /// Campaigns merge when Jaccard similarity is strictly greater.
    #[arg(long)]
    pub jaccard_threshold: Option<f64>,
    /// hmps or hmps+osn2.
    #[arg(long)]
    pub mode: Option<FeatureMode>,
    #[arg(long)]
    pub max_levels: Option<usize>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long, value_enum)]
    pub learning: Option<LearningArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LearningArg {
    Feedback,
    NoFeedback,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_campaigns: Option<usize>,
    #[arg(long)]
    pub users_per_campaign: Option<usize>,
    #[arg(long)]
    pub overlap_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Protocol {
    /// Leave-one-out over suspended accounts.
    Setting1,
    /// Repeated stratified holdout over annotated accounts.
    Setting2,
    /// Feedback against SMOTE oversampling at several ratios.
    Ablation,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub protocol: Protocol,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunFlags,
    /// Stop after training.
    #[arg(long)]
    pub no_eval: bool,
}

/// Contents of `--config` and of the `config.toml` written to each run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub run: RunConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

pub fn run(command: Command) -> Result<()> {
    let threads = match &command {
        Command::Synth(a) => a.common.threads,
        Command::Campaigns(a) | Command::Hmps(a) | Command::Features(a) | Command::Train(a) => a.common.threads,
        Command::Eval(a) => a.common.threads,
        Command::Pipeline(a) => a.common.threads,
    };
    match threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(command)),
        None => dispatch(command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Campaigns(a) => {
            let (cfg, corpus) = prepare(&a.common, &a.run)?;
            campaigns_stage(&a.common.out, &cfg, &corpus)
        }
        Command::Hmps(a) => {
            let (cfg, corpus) = prepare(&a.common, &a.run)?;
            hmps_stage(&a.common.out, &cfg, &corpus)
        }
        Command::Features(a) => {
            let (cfg, corpus) = prepare(&a.common, &a.run)?;
            features_stage(&a.common.out, &cfg, &corpus)
        }
        Command::Train(a) => {
            let (cfg, corpus) = prepare(&a.common, &a.run)?;
            train_stage(&a.common.out, &cfg, &corpus)
        }
        Command::Eval(a) => {
            let (mut cfg, corpus) = prepare(&a.common, &a.run)?;
            if let Some(r) = a.repeats {
                cfg.run.eval.repeats = r;
                write_config(&a.common.out, &cfg)?;
            }
            eval_stage(&a.common.out, &cfg, &corpus, &[a.protocol])
        }
        Command::Pipeline(a) => {
            let (cfg, corpus) = prepare(&a.common, &a.run)?;
            let out = &a.common.out;
            campaigns_stage(out, &cfg, &corpus)?;
            hmps_stage(out, &cfg, &corpus)?;
            features_stage(out, &cfg, &corpus)?;
            train_stage(out, &cfg, &corpus)?;
            if a.no_eval {
                return Ok(());
            }
            eval_stage(out, &cfg, &corpus, &[Protocol::Setting1, Protocol::Setting2])
        }
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = ConfigFile::load(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.synth.seed = s;
        cfg.run.seed = s;
    }
    if let Some(n) = a.n_campaigns {
        cfg.synth.n_campaigns = n;
    }
    if let Some(n) = a.users_per_campaign {
        cfg.synth.users_per_campaign = n;
    }
    if let Some(f) = a.overlap_fraction {
        cfg.synth.overlap_fraction = f;
    }
    let out = &a.common.out;
    let corpus = generate(&cfg.synth)?;
    corpus.write(out)?;
    write_config(out, &cfg)?;
    record(
        out,
        "synth",
        &["tweets.jsonl", "users.jsonl", "edges.csv", "truth.json"],
        serde_json::json!({ "overlap_fraction": corpus.truth.overlap_fraction() }),
    )
}

/// Resolves the configuration (defaults, then `--config`, then flags),
/// writes it to the run directory and loads the corpus.
fn prepare(common: &Common, flags: &RunFlags) -> Result<(ConfigFile, Corpus)> {
    let mut cfg = ConfigFile::load(common.config.as_deref())?;
    let run = &mut cfg.run;
    if let Some(s) = common.seed {
        run.seed = s;
    }
    if let Some(k) = flags.top_unigrams {
        run.clustering.top_k = k;
    }
    if let Some(m) = flags.min_common {
        run.clustering.min_common = m;
    }
    if let Some(t) = flags.jaccard_threshold {
        run.clustering.jaccard_threshold = t;
    }
    if let Some(m) = flags.mode {
        run.mode = m;
    }
    if let Some(l) = flags.max_levels {
        run.max_levels = Some(l);
    }
    if let Some(k) = flags.kernel {
        run.train.kernel = match k {
            KernelArg::Linear => KernelChoice::Linear,
            KernelArg::Rbf => KernelChoice::Rbf,
        };
    }
    if let Some(l) = flags.learning {
        run.learning = match l {
            LearningArg::Feedback => Learning::Feedback,
            LearningArg::NoFeedback => Learning::NoFeedback,
        };
    }
    run.validate()?;
    let corpus = read_corpus(&flags.input)?;
    write_config(&common.out, &cfg)?;
    Ok((cfg, corpus))
}

/// Loads `tweets.jsonl`, `users.jsonl` and, when present, `edges.csv`.
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let edges = dir.join("edges.csv");
    let corpus = load_corpus(
        &dir.join("tweets.jsonl"),
        &dir.join("users.jsonl"),
        edges.exists().then_some(edges.as_path()),
    )?;
    for w in corpus.warnings() {
        log::warn!("{w}");
    }
    Ok(corpus)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    Ok(BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(dir.join(name), e))
}

fn write_config(out: &Path, cfg: &ConfigFile) -> Result<()> {
    let text = cfg.to_toml()?;
    let mut w = create(out, "config.toml")?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(out.join("config.toml"), e))
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    stages: BTreeMap<String, StageEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageEntry {
    outputs: BTreeMap<String, u64>,
    details: serde_json::Value,
}

/// Adds a stage's outputs (name and byte size) to `manifest.json`.
fn record(out: &Path, stage: &str, files: &[&str], details: serde_json::Value) -> Result<()> {
    let path = out.join("manifest.json");
    let mut manifest: Manifest = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Manifest::default(),
    };
    manifest.tool = env!("CARGO_PKG_NAME").into();
    manifest.version = env!("CARGO_PKG_VERSION").into();
    let mut outputs = BTreeMap::new();
    for f in files {
        let p = out.join(f);
        let len = fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
        outputs.insert(f.to_string(), len);
    }
    manifest.stages.insert(stage.into(), StageEntry { outputs, details });
    write_json(out, "manifest.json", &manifest)
}

fn campaigns_stage(out: &Path, cfg: &ConfigFile, corpus: &Corpus) -> Result<()> {
    let campaigns = detect_campaigns(corpus, &cfg.run.clustering)?;
    write_campaigns_jsonl(&campaigns, create(out, "campaigns.jsonl")?)?;
    let docs = build_phone_documents(corpus, &cfg.run.clustering);
    let silhouette = match silhouette_check(&docs, &campaigns) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("{e}");
            None
        }
    };
    log::info!("{} campaigns", campaigns.len());
    record(
        out,
        "campaigns",
        &["campaigns.jsonl"],
        serde_json::json!({ "campaigns": campaigns.len(), "silhouette": silhouette }),
    )
}

/// Campaigns from the run directory that contain a suspended user.
fn labelled_campaigns(out: &Path, corpus: &Corpus) -> Result<Vec<Campaign>> {
    let all = read_campaigns_jsonl(open(out, "campaigns.jsonl")?, corpus)?;
    Ok(filter_campaigns_with_spammers(all))
}

fn hmps_stage(out: &Path, _cfg: &ConfigFile, corpus: &Corpus) -> Result<()> {
    let campaigns = labelled_campaigns(out, corpus)?;
    let trees = campaigns
        .par_iter()
        .map(|c| build_tree(corpus, c))
        .collect::<Result<Vec<_>>>()?;
    let mut w = create(out, "trees.jsonl")?;
    for t in &trees {
        serde_json::to_writer(&mut w, &t.to_json())?;
        writeln!(w).map_err(|e| Error::io(out.join("trees.jsonl"), e))?;
    }
    w.flush().map_err(|e| Error::io(out.join("trees.jsonl"), e))?;
    let scores: Vec<_> = trees.par_iter().flat_map_iter(score_all).collect();
    write_scores_csv(&scores, create(out, "scores.csv")?)?;
    record(
        out,
        "hmps",
        &["trees.jsonl", "scores.csv"],
        serde_json::json!({ "trees": trees.len(), "scores": scores.len() }),
    )
}

fn features_stage(out: &Path, cfg: &ConfigFile, corpus: &Corpus) -> Result<()> {
    let scores = read_scores_csv(open(out, "scores.csv")?)?;
    let hits = hits_scores(corpus.follower_edges(), cfg.run.hits_iterations, cfg.run.hits_tolerance);
    let vectors = assemble(&scores, corpus, cfg.run.mode, &hits, &cfg.run.clustering.tokenizer);
    write_features_csv(&vectors, cfg.run.mode, create(out, "features.csv")?)?;
    record(
        out,
        "features",
        &["features.csv"],
        serde_json::json!({ "vectors": vectors.len(), "mode": cfg.run.mode }),
    )
}

fn train_stage(out: &Path, cfg: &ConfigFile, corpus: &Corpus) -> Result<()> {
    let campaigns = labelled_campaigns(out, corpus)?;
    let (mode, vectors) = read_features_csv(open(out, "features.csv")?)?;
    if mode != cfg.run.mode {
        log::warn!("features.csv was built in mode {mode:?}, config says {:?}", cfg.run.mode);
    }
    let mut state = feedback::init(&campaigns, &vectors, &cfg.run.train_config(), cfg.run.smote)?;
    match cfg.run.learning {
        Learning::Feedback => {
            let cap = cfg.run.max_levels.unwrap_or(corpus.user_count().max(1));
            feedback::run_until_convergence(&mut state, cap)?;
        }
        Learning::NoFeedback => feedback::run_without_feedback(&mut state)?,
    }
    let predictions = predict_all(&state)?;
    write_predictions_csv(&predictions, create(out, "predictions.csv")?)?;
    let mut log_w = create(out, "feedback_log.jsonl")?;
    write_feedback_log(&state.log, &mut log_w)?;
    log_w.flush().map_err(|e| Error::io(out.join("feedback_log.jsonl"), e))?;

    let models_dir = out.join("models");
    if models_dir.exists() {
        fs::remove_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    }
    let mut files = vec!["predictions.csv".to_string(), "feedback_log.jsonl".to_string()];
    for slot in &state.slots {
        let Some(model) = &slot.model else { continue };
        let name = format!("models/campaign_{:04}.json", slot.campaign_id);
        write_json(
            out,
            &name,
            &serde_json::json!({
                "campaign_id": slot.campaign_id,
                "training_size": slot.training.len(),
                "threshold": slot.threshold,
                "config": slot.config,
                "model": model,
            }),
        )?;
        files.push(name);
    }
    let deferred = state.slots.iter().filter(|s| s.is_deferred()).count();
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    record(
        out,
        "train",
        &names,
        serde_json::json!({
            "levels": state.level,
            "transfers": state.log.len(),
            "campaigns": state.slots.len(),
            "deferred": deferred,
        }),
    )
}

fn eval_stage(out: &Path, cfg: &ConfigFile, corpus: &Corpus, protocols: &[Protocol]) -> Result<()> {
    let campaigns = read_campaigns_jsonl(open(out, "campaigns.jsonl")?, corpus)?;
    let pipeline = Pipeline::from_campaigns(corpus, cfg.run.clone(), campaigns)?;
    let path = out.join("metrics.json");
    let mut metrics: BTreeMap<String, serde_json::Value> = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => BTreeMap::new(),
    };
    let mut files = vec!["metrics.json"];
    for p in protocols {
        match p {
            Protocol::Setting1 => {
                metrics.insert("setting1".into(), serde_json::to_value(setting1_loo(&pipeline)?)?);
            }
            Protocol::Setting2 => {
                let report = setting2_holdout(&pipeline, cfg.run.learning, cfg.run.smote, cfg.run.eval.repeats)?;
                metrics.insert("setting2".into(), serde_json::to_value(report)?);
            }
            Protocol::Ablation => {
                let rows = ablation_suite(&pipeline)?;
                write_ablation_csv(&rows, create(out, "ablation.csv")?)?;
                metrics.insert("ablation".into(), serde_json::to_value(&rows)?);
                files.push("ablation.csv");
            }
        }
    }
    write_json(out, "metrics.json", &metrics)?;
    record(out, "eval", &files, serde_json::json!({ "protocols": metrics.keys().collect::<Vec<_>>() }))
}
