//! Operator CLI. Each verb drives one pipeline stage over a data directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use perceptmap_core::dataset::{
    build_examples, read_dataset, read_stats, split, write_dataset, write_stats, NormalizationStats, Partition, SplitSpec,
};
use perceptmap_core::fixture::{write_fixture, FixtureSpec};
use perceptmap_core::ingest::{
    assign_descriptor_counts, fetch_images, filter_images, ingest_features, plan_crawl, CommandCounter, CrawlPlan,
    DescriptorCounter, FetchOptions, Geofence, MetadataCounts, StreetViewClient, DEFAULT_MIN_DESCRIPTORS,
};
use perceptmap_core::nn::{evaluate, swap_consistency_rate, train, write_curves, Checkpoint, OutputDropoutSite, TrainConfig};
use perceptmap_core::scoring::{emit_map, score_zone, write_map, write_scores_csv, SourceFilter};
use perceptmap_core::store::{write_votes, Corpus, DataPaths, VoteSource};
use perceptmap_core::survey::{housekeep, DuplicateRule, PolicyConfig};
use perceptmap_core::synth::{plan_pairs, predict_pairs, record_synthetic, ModelScorer, PredictionConfig, SyntheticPair};

use crate::api::{self, ApiConfig};

#[derive(Debug, Parser)]
#[command(name = "perceptmap", version, about = "Street-image safety perception pipeline")]
pub struct Cli {
    /// Data directory holding images.jsonl, votes.jsonl and the feature files.
    #[arg(long, global = true, env = "PERCEPTMAP_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Sample a geofence on a grid and download one image per point and heading.
    Crawl(CrawlArgs),
    /// Drop images with too few local descriptors.
    Filter(FilterArgs),
    /// Attach externally computed 512-d feature vectors.
    IngestFeatures(IngestArgs),
    /// Clean the human vote log and write normalized, split pair examples.
    BuildDataset(BuildArgs),
    /// Train the pair classifier.
    Train(TrainArgs),
    /// Confusion matrix and accuracy of a model on one dataset partition.
    Evaluate(EvaluateArgs),
    /// Plan synthetic image pairs for a zone.
    SynthGenerate(SynthGenerateArgs),
    /// Label planned pairs with a model and record them as synthetic votes.
    SynthPredict(SynthPredictArgs),
    /// Per-image safety scores of a zone as CSV.
    Score(ScoreArgs),
    /// GeoJSON perception map of a zone.
    EmitMap(ScoreArgs),
    /// Run the survey HTTP API.
    Serve(ServeArgs),
    /// Write a generated corpus with a known answer.
    Fixture(FixtureArgs),
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Crawl(_) => "crawl",
            Verb::Filter(_) => "filter",
            Verb::IngestFeatures(_) => "ingest-features",
            Verb::BuildDataset(_) => "build-dataset",
            Verb::Train(_) => "train",
            Verb::Evaluate(_) => "evaluate",
            Verb::SynthGenerate(_) => "synth-generate",
            Verb::SynthPredict(_) => "synth-predict",
            Verb::Score(_) => "score",
            Verb::EmitMap(_) => "emit-map",
            Verb::Serve(_) => "serve",
            Verb::Fixture(_) => "fixture",
        }
    }
}

#[derive(Debug, Args)]
pub struct CrawlArgs {
    /// GeoJSON Feature with a Polygon geometry and a zone_name property.
    #[arg(long)]
    pub fence: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    pub step_m: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,90,180,270")]
    pub headings: Vec<f64>,
    #[arg(long)]
    pub max: Option<usize>,
    /// Image directory; defaults to <data-dir>/images/<zone>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the sample points as JSON lines without fetching anything.
    #[arg(long)]
    pub plan_only: bool,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, default_value_t = DEFAULT_MIN_DESCRIPTORS)]
    pub min_descriptors: u32,
    /// Command printing an image's descriptor count; `{uri}` is replaced by
    /// the image path. Without it, counts must already be in images.jsonl.
    #[arg(long)]
    pub counter_cmd: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub bin: PathBuf,
    #[arg(long)]
    pub idx: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DuplicateArg {
    KeepEarliest,
    DropAll,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Zone whose images define the normalization statistics; all images when absent.
    #[arg(long)]
    pub zone: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.65)]
    pub train: f64,
    #[arg(long, default_value_t = 0.07)]
    pub val: f64,
    #[arg(long, default_value_t = 0.28)]
    pub test: f64,
    #[arg(long, value_enum, default_value = "keep-earliest")]
    pub duplicates: DuplicateArg,
    #[arg(long, default_value_t = 25.0)]
    pub min_distance_m: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SiteArg {
    Logits,
    HiddenOutput,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Defaults to <data-dir>/dataset.bin.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Defaults to labels.jsonl next to the dataset.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Defaults to stats.json next to the dataset.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_enum)]
    pub output_dropout_site: Option<SiteArg>,
    /// Defaults to <data-dir>/model.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to curves.csv next to the model.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PartitionArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to labels.jsonl next to the dataset.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub partition: PartitionArg,
}

#[derive(Debug, Args)]
pub struct SynthGenerateArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthPredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,
    /// Zone to label; every planned zone when absent.
    #[arg(long)]
    pub zone: Option<String>,
    /// Overrides the statistics path recorded in the model.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Timestamp given to every synthetic vote; defaults to now.
    #[arg(long)]
    pub timestamp: Option<DateTime<Utc>>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long, default_value = "all")]
    pub source: SourceFilter,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PERCEPTMAP_BIND", default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Survey UI build directory, served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Seed for pair selection; defaults to the clock.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub zone: Option<String>,
    #[arg(long, default_value_t = 600)]
    pub ttl_s: i64,
    #[arg(long, default_value_t = 25.0)]
    pub min_distance_m: f64,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Output directory; defaults to the data directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "fixture")]
    pub zone: String,
    #[arg(long, default_value_t = 2000)]
    pub images: usize,
    #[arg(long, default_value_t = 6000)]
    pub votes: usize,
    /// Name of a second zone with features but no votes.
    #[arg(long)]
    pub unlabeled_zone: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub unlabeled_images: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    let paths = DataPaths::in_dir(dir);
    Corpus::load(&paths).with_context(|| format!("loading corpus from {}", dir.display()))
}

fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    corpus.save(&DataPaths::in_dir(dir)).with_context(|| format!("saving corpus to {}", dir.display()))
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

pub fn run(cli: Cli) -> Result<()> {
    let dir = cli.data_dir;
    match cli.verb {
        Verb::Crawl(a) => crawl(&dir, a),
        Verb::Filter(a) => filter(&dir, a),
        Verb::IngestFeatures(a) => {
            let mut corpus = load_corpus(&dir)?;
            let report = ingest_features(&a.bin, &a.idx, &mut corpus)?;
            save_corpus(&corpus, &dir)?;
            emit(json!({"ingested": report.ingested, "missing": report.missing.len(), "ignored": report.ignored.len()}));
            Ok(())
        }
        Verb::BuildDataset(a) => build_dataset(&dir, a),
        Verb::Train(a) => train_model(&dir, a),
        Verb::Evaluate(a) => evaluate_model(a),
        Verb::SynthGenerate(a) => synth_generate(&dir, a),
        Verb::SynthPredict(a) => synth_predict(&dir, a),
        Verb::Score(a) => {
            let corpus = load_corpus(&dir)?;
            let scored = score_zone(&corpus, &a.zone, a.source);
            let out = a.out.unwrap_or_else(|| dir.join(output_name("scores", &a.zone, a.source, "csv")));
            write_scores_csv(&out, &scored)?;
            emit(json!({"zone": a.zone, "scored": scored.len(), "out": out}));
            Ok(())
        }
        Verb::EmitMap(a) => {
            let corpus = load_corpus(&dir)?;
            let scored = score_zone(&corpus, &a.zone, a.source);
            let map = emit_map(&a.zone, &scored)?;
            let out = a.out.unwrap_or_else(|| dir.join(output_name("map", &a.zone, a.source, "geojson")));
            write_map(&out, &map)?;
            emit(json!({"zone": a.zone, "features": map.features.len(), "out": out}));
            Ok(())
        }
        Verb::Serve(a) => serve(dir, a),
        Verb::Fixture(a) => {
            let out = a.out.unwrap_or(dir);
            let spec = FixtureSpec {
                zone: a.zone,
                images: a.images,
                votes: a.votes,
                unlabeled: a.unlabeled_zone.map(|z| (z, a.unlabeled_images)),
                separation: a.separation,
                seed: a.seed,
                ..FixtureSpec::default()
            };
            let fx = write_fixture(&spec, &out)?;
            emit(json!({"images": fx.corpus.images().len(), "votes": fx.corpus.votes().len(), "out": out}));
            Ok(())
        }
    }
}

fn output_name(stem: &str, zone: &str, source: SourceFilter, ext: &str) -> String {
    match source {
        SourceFilter::All => format!("{stem}_{zone}.{ext}"),
        SourceFilter::Human => format!("{stem}_{zone}_human.{ext}"),
        SourceFilter::Synthetic => format!("{stem}_{zone}_synthetic.{ext}"),
    }
}

fn crawl(dir: &Path, a: CrawlArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.fence).with_context(|| format!("reading {}", a.fence.display()))?;
    let fence = Geofence::from_geojson(&text)?;
    let plan = CrawlPlan { grid_step_m: a.step_m, headings: a.headings, max_images: a.max.unwrap_or(usize::MAX) };
    let points = plan_crawl(&fence, &plan)?;
    if a.plan_only {
        for p in &points {
            emit(json!({"lat": p.lat, "lon": p.lon, "heading": p.heading}));
        }
        return Ok(());
    }
    let client = StreetViewClient::from_env()?;
    let out = a.out.unwrap_or_else(|| dir.join("images").join(fence.zone_name()));
    let report = fetch_images(&points, &client, &FetchOptions::new(out, fence.zone_name()))?;
    let mut corpus = if DataPaths::in_dir(dir).images.exists() { load_corpus(dir)? } else { Corpus::new() };
    for img in &report.images {
        corpus.put_image(img.clone())?;
    }
    std::fs::create_dir_all(dir)?;
    save_corpus(&corpus, dir)?;
    emit(json!({
        "zone": fence.zone_name(),
        "planned": points.len(),
        "fetched": report.images.len(),
        "failures": report.failures.len(),
        "cache_hits": report.cache_hits,
    }));
    Ok(())
}

fn filter(dir: &Path, a: FilterArgs) -> Result<()> {
    let mut corpus = load_corpus(dir)?;
    let mut images: Vec<_> = corpus.images().cloned().collect();
    let counter: Box<dyn DescriptorCounter> = match &a.counter_cmd {
        Some(cmd) => Box::new(CommandCounter::from_pattern(cmd)?),
        None => Box::new(MetadataCounts::from_images(&images)),
    };
    assign_descriptor_counts(&mut images, counter.as_ref())?;
    for img in &images {
        corpus.set_descriptor_count(&img.image_id, img.descriptor_count.expect("assigned above"))?;
    }
    let (kept, excluded) = filter_images(images, a.min_descriptors)?;
    let gone: std::collections::BTreeSet<&str> = excluded.iter().map(|i| i.image_id.as_str()).collect();
    let (dropped, votes): (Vec<_>, Vec<_>) =
        corpus.votes().iter().cloned().partition(|v| gone.contains(v.left_id.as_str()) || gone.contains(v.right_id.as_str()));
    corpus.replace_votes(votes)?;
    for img in &excluded {
        corpus.remove_image(&img.image_id)?;
    }
    save_corpus(&corpus, dir)?;
    let lines = |items: Vec<String>| items.into_iter().map(|l| l + "\n").collect::<String>();
    std::fs::write(dir.join("filtered_images.jsonl"), lines(excluded.iter().map(|i| json!(i).to_string()).collect()))?;
    std::fs::write(dir.join("filtered_votes.jsonl"), lines(dropped.iter().map(|v| json!(v).to_string()).collect()))?;
    emit(json!({"kept": kept.len(), "excluded": excluded.len(), "votes_dropped": dropped.len()}));
    Ok(())
}

fn build_dataset(dir: &Path, a: BuildArgs) -> Result<()> {
    let corpus = load_corpus(dir)?;
    let policy = PolicyConfig {
        min_pair_distance_m: a.min_distance_m,
        duplicate_rule: match a.duplicates {
            DuplicateArg::KeepEarliest => DuplicateRule::KeepEarliest,
            DuplicateArg::DropAll => DuplicateRule::DropAll,
        },
        ..PolicyConfig::default()
    };
    let human: Vec<_> = corpus.votes().iter().filter(|v| v.source == VoteSource::Human).cloned().collect();
    let (clean, report) = housekeep(&human, &corpus, &policy);
    let vectors: Vec<&[f32]> = corpus
        .features()
        .values()
        .filter(|f| a.zone.as_ref().is_none_or(|z| corpus.image(f.image_id()).is_some_and(|i| &i.zone == z)))
        .map(|f| f.values())
        .collect();
    if vectors.is_empty() {
        bail!("no feature vectors to compute normalization statistics from");
    }
    let stats = NormalizationStats::compute(vectors)?;
    let examples = build_examples(&clean, corpus.features(), &stats)?;
    let parts = split(examples, &SplitSpec { train: a.train, val: a.val, test: a.test, seed: a.seed })?;
    write_stats(&dir.join("stats.json"), &stats)?;
    write_dataset(&dir.join("dataset.bin"), &dir.join("labels.jsonl"), &parts)?;
    let (train, val, test) = parts.sizes();
    emit(json!({
        "votes_in": human.len(),
        "votes_kept": clean.len(),
        "housekeeping": report,
        "constant_components": stats.constant_components().len(),
        "train": train,
        "val": val,
        "test": test,
    }));
    Ok(())
}

fn train_model(dir: &Path, a: TrainArgs) -> Result<()> {
    let dataset = a.dataset.unwrap_or_else(|| dir.join("dataset.bin"));
    let labels = a.labels.unwrap_or_else(|| sibling(&dataset, "labels.jsonl"));
    let stats = a.stats.unwrap_or_else(|| sibling(&dataset, "stats.json"));
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden_size = v;
    }
    if let Some(site) = a.output_dropout_site {
        cfg.dropout.output_site = match site {
            SiteArg::Logits => OutputDropoutSite::Logits,
            SiteArg::HiddenOutput => OutputDropoutSite::HiddenOutput,
        };
    }
    let parts = read_dataset(&dataset, &labels)?;
    let outcome = train(&parts.train, &parts.val, &cfg)?;
    let out = a.out.unwrap_or_else(|| dir.join("model.json"));
    let curves = a.curves.unwrap_or_else(|| sibling(&out, "curves.csv"));
    let ckpt = Checkpoint::new(&outcome.params, cfg, stats.to_string_lossy(), outcome.history.clone());
    ckpt.save(&out)?;
    write_curves(&curves, &outcome.history)?;
    let best = outcome.history.iter().find(|r| r.epoch == outcome.best_epoch);
    emit(json!({
        "best_epoch": outcome.best_epoch,
        "epochs": outcome.history.len() - 1,
        "stopped_early": outcome.stopped_early,
        "val_loss": best.map(|r| r.val_loss),
        "model": out,
        "curves": curves,
    }));
    Ok(())
}

fn evaluate_model(a: EvaluateArgs) -> Result<()> {
    let labels = a.labels.unwrap_or_else(|| sibling(&a.dataset, "labels.jsonl"));
    let params = Checkpoint::load(&a.model)?.params()?;
    let parts = read_dataset(&a.dataset, &labels)?;
    let partition = match a.partition {
        PartitionArg::Train => Partition::Train,
        PartitionArg::Val => Partition::Val,
        PartitionArg::Test => Partition::Test,
    };
    let examples = parts.get(partition);
    let (matrix, accuracy) = evaluate(&params, examples)?;
    println!("partition {partition} ({} examples)", examples.len());
    println!("{matrix}");
    println!("accuracy {accuracy:.4}");
    if let Some(rate) = swap_consistency_rate(&params, examples)? {
        println!("swap consistency {rate:.4}");
    }
    Ok(())
}

fn synth_dir(dir: &Path, zone: &str) -> PathBuf {
    dir.join("synthetic").join(zone)
}

fn synth_generate(dir: &Path, a: SynthGenerateArgs) -> Result<()> {
    let corpus = load_corpus(dir)?;
    let images: Vec<_> = corpus.images_in_zone(&a.zone).cloned().collect();
    let (plan, pairs) = plan_pairs(&a.zone, &images, a.seed)?;
    let out = synth_dir(dir, &a.zone);
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("plan.json"), serde_json::to_string_pretty(&plan)? + "\n")?;
    let lines: String = pairs.iter().map(|p| serde_json::to_string(p).expect("pairs serialize") + "\n").collect();
    std::fs::write(out.join("pairs.jsonl"), lines)?;
    emit(json!({"zone": a.zone, "images": images.len(), "pairs": pairs.len(), "out": out}));
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<SyntheticPair>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn synth_predict(dir: &Path, a: SynthPredictArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.model)?;
    let params = ckpt.params()?;
    let stats_path = a.stats.unwrap_or_else(|| PathBuf::from(&ckpt.norm_stats_ref));
    let stats = read_stats(&stats_path).with_context(|| format!("reading stats {}", stats_path.display()))?;
    let zones = match a.zone {
        Some(z) => vec![z],
        None => {
            let root = dir.join("synthetic");
            let mut zones = Vec::new();
            if root.is_dir() {
                for entry in std::fs::read_dir(&root)? {
                    let entry = entry?;
                    if entry.path().join("pairs.jsonl").is_file() {
                        zones.push(entry.file_name().to_string_lossy().into_owned());
                    }
                }
            }
            zones.sort();
            zones
        }
    };
    if zones.is_empty() {
        bail!("no planned synthetic pairs under {}; run synth-generate first", dir.join("synthetic").display());
    }
    let mut corpus = load_corpus(dir)?;
    let config = PredictionConfig { margin: a.margin };
    let timestamp = a.timestamp.unwrap_or_else(Utc::now);
    let threads = a.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut summary = Vec::new();
    for zone in &zones {
        let pairs = read_pairs(&synth_dir(dir, zone).join("pairs.jsonl"))?;
        let votes = {
            let scorer = ModelScorer::new(&params, &stats, corpus.features());
            predict_pairs(zone, &pairs, &scorer, &config, timestamp, threads)?
        };
        // a rerun replaces the zone's earlier synthetic votes
        let session = format!("syn-{zone}");
        let kept: Vec<_> = corpus
            .votes()
            .iter()
            .filter(|v| !(v.source == VoteSource::Synthetic && v.session_id == session))
            .cloned()
            .collect();
        corpus.replace_votes(kept)?;
        let mut codes = [0usize; 3];
        for v in &votes {
            codes[u8::from(v.code) as usize] += 1;
        }
        summary.push(json!({"zone": zone, "votes": votes.len(), "by_code": {"0": codes[0], "1": codes[1], "2": codes[2]}}));
        record_synthetic(&mut corpus, votes)?;
    }
    let paths = DataPaths::in_dir(dir);
    write_votes(&paths.votes, corpus.votes())?;
    let synthetic: Vec<_> = corpus.votes().iter().filter(|v| v.source == VoteSource::Synthetic).cloned().collect();
    write_votes(&dir.join("synthetic_votes.jsonl"), &synthetic)?;
    emit(json!({"zones": summary, "synthetic_total": synthetic.len()}));
    Ok(())
}

fn serve(dir: PathBuf, a: ServeArgs) -> Result<()> {
    let seed = a.seed.unwrap_or_else(|| Utc::now().timestamp_nanos_opt().unwrap_or_default() as u64);
    let cfg = ApiConfig {
        data_dir: dir,
        policy: PolicyConfig { session_ttl_s: a.ttl_s, min_pair_distance_m: a.min_distance_m, ..PolicyConfig::default() },
        seed,
        zone: a.zone,
        static_dir: a.static_dir,
    };
    tokio::runtime::Runtime::new()?.block_on(api::serve(cfg, &a.bind))
}
