//! `geovlm` command-line driver.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
//! data), 2 I/O error (missing files, unreachable endpoint).

mod config;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use geovlm_core::cvlang::{
    embed_texts, render_description, stability_report, AnswerSheet, Description, EmbedEndpoint,
    QuestionBank,
};
use geovlm_core::evaluator::{compare_rankings, write_report, EvalConfig};
use geovlm_core::geostore::{generate_synthetic, ingest, GeoStore, IngestSources, SideSources, StoreManifest, SynthConfig};
use geovlm_core::jsonl;
use geovlm_core::reranker::{init_params, rerank, RerankerConfig, RerankerParams};
use geovlm_core::retriever::{read_rankings, retrieve_all, write_rankings, Accumulation, Ranking};
use geovlm_core::trainer::{
    build_training_samples, gradcheck, read_samples, train, write_samples, SamplePolicy,
    TrainConfig, GRADCHECK_TOLERANCE,
};

pub use config::{parse_list, RunConfig, CONFIG_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] geovlm_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(_) => 1,
        }
    }
}

fn core<E: Into<geovlm_core::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

#[derive(Parser, Debug)]
#[command(name = "geovlm", version, about = "Cross-view geo-localization retrieval and reranking")]
struct Cli {
    /// key=value configuration file (defaults to $GEOVLM_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate embedding, caption, coordinate and ground-truth files into a store.
    Ingest(IngestArgs),
    /// Generate a synthetic store with confusable neighbours.
    Synth(SynthArgs),
    /// Rank references for every query by image cosine similarity.
    Retrieve(RetrieveArgs),
    /// Render answer sheets into descriptions.
    Caption(CaptionArgs),
    /// Embed descriptions with the text embedding endpoint (or the offline mock).
    Embed(EmbedArgs),
    /// Turn retrieval rankings into training samples.
    BuildSamples(BuildSamplesArgs),
    /// Train the reranker.
    Train(TrainArgs),
    /// Rerank retrieval rankings with a trained checkpoint.
    Rerank(RerankArgs),
    /// Score one set of rankings.
    Eval(EvalArgs),
    /// Compare baseline and reranked rankings.
    Compare(CompareArgs),
    /// Compare two description corpora for the same images.
    Stability(StabilityArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Manifest (key=value) giving dims and record counts.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ref_embeddings: PathBuf,
    #[arg(long)]
    ref_text_embeddings: Option<PathBuf>,
    #[arg(long)]
    ref_captions: Option<PathBuf>,
    #[arg(long)]
    ref_coords: Option<PathBuf>,
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    #[arg(long)]
    query_text_embeddings: Option<PathBuf>,
    #[arg(long)]
    query_captions: Option<PathBuf>,
    #[arg(long)]
    query_coords: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Output store directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_locations: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    image_dim: Option<usize>,
    #[arg(long)]
    text_dim: Option<usize>,
    #[arg(long)]
    image_noise: Option<f64>,
    #[arg(long)]
    location_spread: Option<f64>,
    #[arg(long)]
    text_separation: Option<f64>,
    #[arg(long)]
    label_semi_positives: Option<bool>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// Accumulator width for cosine similarity: f32 or f64.
    #[arg(long)]
    accumulation: Option<String>,
    /// Output rankings (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CaptionArgs {
    /// Answer sheets, one JSON object per line.
    #[arg(long)]
    sheets: PathBuf,
    /// Output descriptions (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    /// Descriptions (JSONL with image_id and description).
    #[arg(long)]
    descriptions: PathBuf,
    /// Output text embeddings (JSONL with id and embedding).
    #[arg(long)]
    out: PathBuf,
    /// Endpoint URL; `mock:` selects the offline mock.
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    text_dim: Option<usize>,
}

#[derive(Args, Debug)]
struct BuildSamplesArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Remove labelled semi-positives from candidate lists.
    #[arg(long)]
    drop_semi_positives: Option<bool>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    /// Output directory for the checkpoint and training report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    aligner_layers: Option<usize>,
    #[arg(long)]
    aligner_hidden: Option<usize>,
    #[arg(long)]
    ln_epsilon: Option<f64>,
    #[arg(long)]
    shared_projections: Option<bool>,
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    loss_on: Option<String>,
    #[arg(long)]
    val_split: Option<f64>,
}

#[derive(Args, Debug)]
struct RerankArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// Recall depths, e.g. 1,5,10.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Distance thresholds in km, e.g. 0.0,0.5.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    earth_radius_km: Option<f64>,
    /// Restrict evaluation to the query ids listed in this file (one per line).
    #[arg(long)]
    queries: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    rankings: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    reranked: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    /// First description corpus (JSONL).
    #[arg(long)]
    a: PathBuf,
    /// Second description corpus (JSONL).
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    text_dim: Option<usize>,
    /// Write the report here as JSON as well as printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Retrieve(a) => cmd_retrieve(a, &cfg),
        Command::Caption(a) => cmd_caption(a),
        Command::Embed(a) => cmd_embed(a, &cfg),
        Command::BuildSamples(a) => cmd_build_samples(a, &cfg),
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Rerank(a) => cmd_rerank(a),
        Command::Eval(a) => cmd_eval(a.store, a.rankings, None, a.out, a.metrics, &cfg),
        Command::Compare(a) => cmd_eval(a.store, a.baseline, Some(a.reranked), a.out, a.metrics, &cfg),
        Command::Stability(a) => cmd_stability(a, &cfg),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn parse_choice<T: std::str::FromStr<Err = String>>(value: String, what: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|e| CliError::Validation(format!("--{what}: {e}")))
}

fn load_store(dir: &Path) -> Result<GeoStore, CliError> {
    Ok(GeoStore::load(dir).map_err(core)?.store)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_ingest(a: IngestArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.manifest.display())))?;
    let manifest = StoreManifest::parse(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.manifest.display())))?;
    let queries = a.query_embeddings.map(|embeddings| SideSources {
        embeddings,
        text_embeddings: a.query_text_embeddings,
        captions: a.query_captions,
        coords: a.query_coords,
    });
    let sources = IngestSources {
        references: SideSources {
            embeddings: a.ref_embeddings,
            text_embeddings: a.ref_text_embeddings,
            captions: a.ref_captions,
            coords: a.ref_coords,
        },
        queries,
        ground_truth: a.ground_truth,
    };
    let handle = ingest(&sources, &manifest, &a.out).map_err(core)?;
    println!("store {} digest {}", a.out.display(), handle.digest());
    Ok(())
}

fn cmd_synth(a: SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        n_locations: cfg.pick(a.n_locations, "n_locations", d.n_locations),
        group_size: cfg.pick(a.group_size, "group_size", d.group_size),
        image_dim: cfg.pick(a.image_dim, "image_dim", d.image_dim),
        text_dim: cfg.pick(a.text_dim, "text_dim", d.text_dim),
        image_noise: cfg.pick(a.image_noise, "image_noise", d.image_noise),
        location_spread: cfg.pick(a.location_spread, "location_spread", d.location_spread),
        text_separation: cfg.pick(a.text_separation, "text_separation", d.text_separation),
        label_semi_positives: cfg.pick(a.label_semi_positives, "label_semi_positives", d.label_semi_positives),
        captions: true,
    };
    let store = generate_synthetic(&config, a.seed).map_err(core)?;
    let handle = store.persist(&a.out).map_err(core)?;
    println!(
        "synthetic store {}: {} references, {} queries, digest {}",
        a.out.display(),
        store.references().len(),
        store.queries().len(),
        handle.digest()
    );
    Ok(())
}

fn cmd_retrieve(a: RetrieveArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let k = cfg.pick(a.k, "k", geovlm_core::retriever::DEFAULT_K);
    let acc = match cfg.pick(a.accumulation, "accumulation", "f64".to_string()).as_str() {
        "f64" => Accumulation::F64,
        "f32" => Accumulation::F32,
        other => return Err(CliError::Validation(format!("--accumulation: expected f32 or f64, got {other:?}"))),
    };
    let store = load_store(&a.store)?;
    let rankings = retrieve_all(&store, k, acc).map_err(core)?;
    write_rankings(&a.out, &rankings).map_err(core)?;
    println!("wrote {} rankings (k={k}) to {}", rankings.len(), a.out.display());
    Ok(())
}

fn cmd_caption(a: CaptionArgs) -> Result<(), CliError> {
    let bank = QuestionBank::builtin();
    let sheets: Vec<(usize, AnswerSheet)> = jsonl::read(&a.sheets).map_err(core)?;
    let mut out = Vec::with_capacity(sheets.len());
    for (line, sheet) in sheets {
        let description = render_description(&sheet, bank)
            .map_err(|e| CliError::Validation(format!("{}:{line}: {e}", a.sheets.display())))?;
        out.push(Description {
            image_id: sheet.image_id,
            description,
        });
    }
    jsonl::write(&a.out, &out).map_err(core)?;
    println!("wrote {} descriptions to {}", out.len(), a.out.display());
    Ok(())
}

fn endpoint(url: Option<String>, model: Option<String>, dim: Option<usize>, cfg: &RunConfig) -> EmbedEndpoint {
    let d = EmbedEndpoint::default();
    EmbedEndpoint::from_env(
        &cfg.pick(url, "embed_url", d.url.clone()),
        &cfg.pick(model, "embed_model", d.model.clone()),
        cfg.pick(dim, "embed_text_dim", d.text_dim),
    )
}

#[derive(serde::Serialize)]
struct EmbeddingRow<'a> {
    id: &'a str,
    embedding: &'a [f32],
}

fn read_descriptions(path: &Path) -> Result<Vec<Description>, CliError> {
    Ok(jsonl::read::<Description>(path)
        .map_err(core)?
        .into_iter()
        .map(|(_, d)| d)
        .collect())
}

fn cmd_embed(a: EmbedArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let descriptions = read_descriptions(&a.descriptions)?;
    let ep = endpoint(a.url, a.model, a.text_dim, cfg);
    let texts: Vec<String> = descriptions.iter().map(|d| d.description.clone()).collect();
    let embeddings = embed_texts(&texts, &ep).map_err(core)?;
    let rows: Vec<EmbeddingRow> = descriptions
        .iter()
        .zip(&embeddings)
        .map(|(d, e)| EmbeddingRow {
            id: &d.image_id,
            embedding: e.values(),
        })
        .collect();
    jsonl::write(&a.out, &rows).map_err(core)?;
    println!("wrote {} embeddings (dim {}) to {}", rows.len(), ep.text_dim, a.out.display());
    Ok(())
}

fn cmd_build_samples(a: BuildSamplesArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let store = load_store(&a.store)?;
    let rankings = read_rankings(&a.rankings).map_err(core)?;
    let policy = if cfg.pick(a.drop_semi_positives, "drop_semi_positives", false) {
        SamplePolicy::DropSemiPositives
    } else {
        SamplePolicy::KeepSemiPositives
    };
    let set = build_training_samples(&store, &rankings, policy).map_err(core)?;
    write_samples(&a.out, &set.samples).map_err(core)?;
    println!("wrote {} samples to {}; skipped {}", set.samples.len(), a.out.display(), set.skipped);
    Ok(())
}

fn reranker_config(a: &TrainArgs, store: &GeoStore, cfg: &RunConfig) -> RerankerConfig {
    let d = RerankerConfig::default();
    RerankerConfig {
        image_dim: store.image_dim(),
        text_dim: store.text_dim(),
        latent_dim: cfg.pick(a.latent_dim, "latent_dim", d.latent_dim),
        aligner_layers: cfg.pick(a.aligner_layers, "aligner_layers", d.aligner_layers),
        aligner_hidden: cfg.pick(a.aligner_hidden, "aligner_hidden", d.aligner_hidden),
        ln_epsilon: cfg.pick(a.ln_epsilon, "ln_epsilon", d.ln_epsilon),
        shared_projections: cfg.pick(a.shared_projections, "shared_projections", d.shared_projections),
        init_seed: cfg.pick(a.init_seed, "init_seed", d.init_seed),
    }
}

fn train_config(a: &TrainArgs, cfg: &RunConfig) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let optimizer = parse_choice(cfg.pick(a.optimizer.clone(), "optimizer", d.optimizer.to_string()), "optimizer")?;
    let loss_on = parse_choice(cfg.pick(a.loss_on.clone(), "loss_on", "scores".to_string()), "loss-on")?;
    Ok(TrainConfig {
        margin: cfg.pick(a.margin, "margin", d.margin),
        optimizer,
        lr: cfg.pick(a.lr, "lr", d.lr),
        adam_beta1: cfg.pick(None, "adam_beta1", d.adam_beta1),
        adam_beta2: cfg.pick(None, "adam_beta2", d.adam_beta2),
        adam_eps: cfg.pick(None, "adam_eps", d.adam_eps),
        batch_size: cfg.pick(a.batch_size, "batch_size", d.batch_size),
        epochs: cfg.pick(a.epochs, "epochs", d.epochs),
        shuffle_seed: cfg.pick(a.shuffle_seed, "shuffle_seed", d.shuffle_seed),
        grad_clip: cfg.pick_opt(a.grad_clip, "grad_clip"),
        loss_on,
        val_split: cfg.pick(a.val_split, "val_split", d.val_split),
        checkpoint_dir: Some(a.out.join("checkpoints")),
    })
}

pub const CHECKPOINT_FILE: &str = "reranker.gvck";
pub const TRAIN_REPORT_JSON: &str = "train_report.json";
pub const TRAIN_EPOCHS_JSONL: &str = "train_epochs.jsonl";
pub const TRAIN_REPORT_CSV: &str = "train_report.csv";
pub const HELD_OUT_IDS: &str = "held_out_queries.txt";

fn cmd_train(a: TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let store = load_store(&a.store)?;
    let samples = read_samples(&a.samples).map_err(core)?;
    let rc = reranker_config(&a, &store, cfg);
    let tc = train_config(&a, cfg)?;
    let init = init_params(&rc).map_err(core)?;
    let (params, report) = train(&samples, &store, init, &tc).map_err(core)?;
    params.save(&a.out.join(CHECKPOINT_FILE)).map_err(core)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&a.out.join(TRAIN_REPORT_JSON), &(json + "\n"))?;
    write_text(&a.out.join(TRAIN_EPOCHS_JSONL), &report.epochs_jsonl())?;
    write_text(&a.out.join(TRAIN_REPORT_CSV), &report.to_csv())?;
    let held: String = report.val_query_ids.iter().map(|q| format!("{q}\n")).collect();
    write_text(&a.out.join(HELD_OUT_IDS), &held)?;
    for e in &report.epochs {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "epoch {:>3}  loss {:.6}  val R@1 {}  val R@5 {}",
            e.epoch,
            e.mean_loss,
            fmt(e.val_r1),
            fmt(e.val_r5)
        );
    }
    println!("checkpoint {} digest {}", a.out.join(CHECKPOINT_FILE).display(), params.digest());
    Ok(())
}

fn cmd_rerank(a: RerankArgs) -> Result<(), CliError> {
    let store = load_store(&a.store)?;
    let rankings = read_rankings(&a.rankings).map_err(core)?;
    let params = RerankerParams::load(&a.checkpoint).map_err(core)?.cast::<f64>();
    let mut out = Vec::with_capacity(rankings.len());
    for r in &rankings {
        let query = store
            .query(&r.query_id)
            .ok_or_else(|| CliError::Validation(format!("ranking for unknown query id {:?}", r.query_id)))?;
        out.push(rerank(query, r, &store, &params).map_err(core)?);
    }
    write_rankings(&a.out, &out).map_err(core)?;
    println!("wrote {} reranked rankings to {}", out.len(), a.out.display());
    Ok(())
}

fn restrict(rankings: Vec<Ranking>, keep: Option<&BTreeSet<String>>) -> Vec<Ranking> {
    match keep {
        Some(ids) => rankings.into_iter().filter(|r| ids.contains(&r.query_id)).collect(),
        None => rankings,
    }
}

fn cmd_eval(
    store: PathBuf,
    baseline: PathBuf,
    reranked: Option<PathBuf>,
    out: PathBuf,
    m: MetricArgs,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let d = EvalConfig::default();
    let config = EvalConfig {
        ks: cfg.pick_list(m.ks.as_deref(), "ks", &d.ks),
        thresholds_km: cfg.pick_list(m.thresholds.as_deref(), "thresholds_km", &d.thresholds_km),
        earth_radius_km: cfg.pick(m.earth_radius_km, "earth_radius_km", d.earth_radius_km),
    };
    let keep = match &m.queries {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect::<BTreeSet<_>>(),
        ),
        None => None,
    };
    let store = load_store(&store)?;
    let base = restrict(read_rankings(&baseline).map_err(core)?, keep.as_ref());
    let rer = match reranked {
        Some(p) => Some(restrict(read_rankings(&p).map_err(core)?, keep.as_ref())),
        None => None,
    };
    let coords: HashMap<_, _> = store
        .references()
        .iter()
        .filter_map(|r| r.coord.map(|c| (r.id.clone(), c)))
        .collect();
    // Threshold recall needs every reference located; otherwise skip it.
    let coords = if coords.len() == store.references().len() {
        coords
    } else {
        HashMap::new()
    };
    let report =
        compare_rankings(&base, rer.as_deref(), &store.ground_truth(), &coords, &config).map_err(core)?;
    write_report(&out, &report).map_err(core)?;
    print!("{}", geovlm_core::evaluator::render_csv(&report));
    Ok(())
}

fn cmd_stability(a: StabilityArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let corpus_a = read_descriptions(&a.a)?;
    let corpus_b = read_descriptions(&a.b)?;
    let ep = endpoint(a.url, a.model, a.text_dim, cfg);
    let texts = |c: &[Description]| c.iter().map(|d| d.description.clone()).collect::<Vec<_>>();
    let emb_a = embed_texts(&texts(&corpus_a), &ep).map_err(core)?;
    let emb_b = embed_texts(&texts(&corpus_b), &ep).map_err(core)?;
    let report = stability_report(&corpus_a, &corpus_b, &emb_a, &emb_b).map_err(core)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(out) = &a.out {
        write_text(out, &json)?;
    }
    print!("{json}");
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let report = gradcheck(a.seed).map_err(core)?;
    for (name, err) in &report.per_tensor {
        println!("{name:<24} {err:.3e}");
    }
    println!("max relative error {:.3e} (tolerance {GRADCHECK_TOLERANCE:e})", report.max_relative_error);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "gradient check failed: {:.3e} > {GRADCHECK_TOLERANCE:e}",
            report.max_relative_error
        )))
    }
}
