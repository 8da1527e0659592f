//! `aspera` command-line pipeline: ingest, embeddings, aspect encoders,
//! joint training, prediction and evaluation.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use aspera::abae::{top_aspect_words, train_abae, TowerParams};
use aspera::checkpoint::{self, write_atomic, Meta};
use aspera::corpus::{
    encode_for_training, encode_review, ingest_json_lines, split_corpus, EncodedReview, Review, Tokenizer, Vocabulary,
};
use aspera::embeddings::{load_text_embeddings, train_sgns, EmbeddingTable};
use aspera::eval::{
    baseline_mse, build_coherence_stats, coherence_curve, coherence_table, curve_csv, evaluate_mse, EvalReport,
};
use aspera::model::{self, AsperaModel};
use aspera::{diagnostics, Error};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use config::{EmbeddingSource, RunConfig};

#[derive(Parser)]
#[command(name = "aspera", version, about = "Aspect-based rating prediction from review text")]
struct Cli {
    /// `key = value` config file; command-line options override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every artifact a command writes.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

/// Files a model checkpoint refers to. Default to the paths recorded in
/// the checkpoint.
#[derive(Args)]
struct ModelFiles {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Read Amazon-style JSON lines and write the train/validation/test split.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Build the vocabulary and train (or load) word vectors.
    TrainEmbeddings {
        #[arg(long)]
        train: PathBuf,
    },
    /// Train a single aspect encoder on review reconstruction.
    TrainAbae {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Train the user and item towers jointly on ratings.
    TrainAspera {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Write a predicted rating for every review in a file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        files: ModelFiles,
    },
    /// Test MSE, mean baselines and aspect coherence.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Training split for baselines and coherence counts.
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        files: ModelFiles,
    },
    /// Print the nearest words to each aspect of a model or tower.
    InspectAspects {
        /// A joint model or a single tower checkpoint.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        files: ModelFiles,
    },
    /// PMI and NPMI of each tower's aspects for every configured n.
    Coherence {
        #[arg(long)]
        model: PathBuf,
        /// Reference corpus; defaults to the model's training split.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        files: ModelFiles,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

enum Failure {
    Config(String),
    Pipeline(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| format!("--set: {e}"))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASPERA_LOG", "info")).init();
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, cfg: &RunConfig) -> CmdResult {
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Pipeline(format!("{}: {e}", cli.out.display())))?;
    let out = Out(&cli.out);
    if !matches!(cli.command, Command::Gradcheck { .. }) {
        out.write("run.cfg", cfg.to_text())?;
    }
    match &cli.command {
        Command::Ingest { input } => ingest(cfg, &out, input),
        Command::TrainEmbeddings { train } => train_embeddings(cfg, &out, train),
        Command::TrainAbae {
            train,
            embeddings,
            vocab,
        } => run_abae(cfg, &out, train, embeddings, vocab),
        Command::TrainAspera {
            train,
            validation,
            embeddings,
            vocab,
        } => run_aspera(cfg, &out, train, validation.as_deref(), embeddings, vocab),
        Command::Predict { model, input, files } => predict(&out, model, input, files),
        Command::Evaluate {
            model,
            test,
            train,
            files,
        } => evaluate(cfg, &out, model, test, train.as_deref(), files),
        Command::InspectAspects { model, files } => inspect(cfg, &out, model, files),
        Command::Coherence {
            model,
            reference,
            files,
        } => coherence(cfg, &out, model, reference.as_deref(), files),
        Command::Gradcheck { seeds } => gradcheck(*seeds),
    }
}

struct Out<'a>(&'a Path);

impl Out<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, text: impl AsRef<[u8]>) -> Result<(), Error> {
        let path = self.path(name);
        write_atomic(&path, text.as_ref())?;
        info!("wrote {}", path.display());
        Ok(())
    }
}

/// Split files are already tokenized, so they are re-read verbatim.
fn read_split(path: &Path) -> Result<Vec<Review>, Error> {
    Ok(ingest_json_lines(path, &Tokenizer::without_stopwords())?.reviews)
}

fn load_table(embeddings: &Path, vocab: &Path, seed: u64) -> Result<EmbeddingTable, Error> {
    let vocab = Arc::new(Vocabulary::load(vocab)?);
    let (table, coverage) = load_text_embeddings(embeddings, vocab, seed)?;
    if coverage.missing > 0 {
        warn!(
            "{}: {} vocabulary words have no vector",
            embeddings.display(),
            coverage.missing
        );
    }
    Ok(table)
}

fn encode_all(reviews: &[Review], vocab: &Vocabulary, seq_len: usize) -> Result<Vec<EncodedReview>, Error> {
    reviews.iter().map(|r| encode_review(r, vocab, seq_len)).collect()
}

fn encode_training(reviews: &[Review], vocab: &Vocabulary, seq_len: usize) -> Result<Vec<EncodedReview>, Error> {
    let (enc, dropped) = encode_for_training(reviews, vocab, seq_len)?;
    if dropped > 0 {
        warn!("dropped {dropped} reviews with no in-vocabulary token");
    }
    Ok(enc)
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn meta(cfg: &RunConfig, extra: &[(&str, String)]) -> Meta {
    let mut m = cfg.to_meta();
    m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    m
}

fn meta_path(meta: &Meta, key: &str, given: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    given
        .clone()
        .or_else(|| meta.get(key).map(PathBuf::from))
        .ok_or_else(|| Failure::Pipeline(format!("checkpoint records no {key}; pass it explicitly")))
}

fn meta_value<T: std::str::FromStr>(meta: &Meta, key: &str) -> Result<T, Failure> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Failure::Pipeline(format!("checkpoint has no valid {key}")))
}

/// A joint model with the embeddings and vocabulary it was trained with.
fn open_model(path: &Path, files: &ModelFiles) -> Result<(AsperaModel, Meta), Failure> {
    let (user, item, meta) = checkpoint::load_model(path)?;
    let emb = meta_path(&meta, "embeddings_file", &files.embeddings)?;
    let vocab = meta_path(&meta, "vocab_file", &files.vocab)?;
    let seed = meta_value(&meta, "seed")?;
    let model = AsperaModel {
        user,
        item,
        embeddings: load_table(&emb, &vocab, seed)?,
    };
    model.validate()?;
    Ok((model, meta))
}

fn aspect_report(tower: &TowerParams, table: &EmbeddingTable, n: usize) -> Result<String, Error> {
    let mut out = String::new();
    for (k, words) in top_aspect_words(tower, table, n)?.iter().enumerate() {
        let words: Vec<&str> = words.iter().map(|w| w.word.as_str()).collect();
        out.push_str(&format!("aspect {k}: {}\n", words.join(" ")));
    }
    Ok(out)
}

fn word_lists(tower: &TowerParams, table: &EmbeddingTable, n: usize) -> Result<Vec<Vec<String>>, Error> {
    Ok(top_aspect_words(tower, table, n)?
        .into_iter()
        .map(|ws| ws.into_iter().map(|w| w.word).collect())
        .collect())
}

fn ingest(cfg: &RunConfig, out: &Out, input: &Path) -> CmdResult {
    let report = ingest_json_lines(input, &Tokenizer::default())?;
    let total = report.reviews.len();
    let split = split_corpus(report.reviews, cfg.seed)?;
    for (name, part) in [
        ("train.jsonl", &split.train),
        ("validation.jsonl", &split.validation),
        ("test.jsonl", &split.test),
    ] {
        let text: String = part.iter().map(|r| r.to_json_line() + "\n").collect();
        out.write(name, text)?;
    }
    let vocab = Vocabulary::build(&split.train, cfg.min_count)?;
    vocab.save(&out.path("vocab.tsv"))?;
    let summary = serde_json::json!({
        "input": path_string(input),
        "reviews": total,
        "malformed": report.malformed,
        "empty": report.empty,
        "train": split.train.len(),
        "validation": split.validation.len(),
        "test": split.test.len(),
        "vocabulary": vocab.real_len(),
        "seed": cfg.seed,
    });
    out.write(
        "ingest.json",
        serde_json::to_string_pretty(&summary).expect("json") + "\n",
    )?;
    Ok(())
}

fn train_embeddings(cfg: &RunConfig, out: &Out, train: &Path) -> CmdResult {
    let reviews = read_split(train)?;
    let vocab = Arc::new(Vocabulary::build(&reviews, cfg.min_count)?);
    vocab.save(&out.path("vocab.tsv"))?;
    let table = match cfg.embeddings {
        EmbeddingSource::Train => {
            let sentences: Vec<&[String]> = reviews.iter().map(|r| r.tokens.as_slice()).collect();
            train_sgns(&sentences, vocab, &cfg.sgns())?
        }
        EmbeddingSource::Load => {
            let path = Path::new(&cfg.embeddings_path);
            let (table, coverage) = load_text_embeddings(path, vocab, cfg.seed)?;
            info!(
                "{}: {} words found, {} missing",
                path.display(),
                coverage.found,
                coverage.missing
            );
            table
        }
    };
    table.save(&out.path("embeddings.txt"))?;
    Ok(())
}

fn run_abae(cfg: &RunConfig, out: &Out, train: &Path, embeddings: &Path, vocab: &Path) -> CmdResult {
    let table = load_table(embeddings, vocab, cfg.seed)?;
    let reviews = encode_training(&read_split(train)?, table.vocab(), cfg.seq_len)?;
    let run = train_abae(&reviews, &table, &cfg.abae())?;
    let mut extra = vec![
        ("train_file", path_string(train)),
        ("embeddings_file", path_string(embeddings)),
        ("vocab_file", path_string(vocab)),
    ];
    if cfg.train_embeddings {
        run.embeddings.save(&out.path("abae_embeddings.txt"))?;
        extra[1].1 = path_string(&out.path("abae_embeddings.txt"));
    }
    checkpoint::save_tower(&out.path("abae.tower"), &run.tower, &meta(cfg, &extra))?;
    let log: String = run
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(e, l)| serde_json::json!({"epoch": e + 1, "loss": l}).to_string() + "\n")
        .collect();
    out.write("abae_metrics.jsonl", log)?;
    out.write(
        "abae_aspects.txt",
        aspect_report(&run.tower, &run.embeddings, cfg.top_words)?,
    )?;
    Ok(())
}

fn run_aspera(
    cfg: &RunConfig,
    out: &Out,
    train: &Path,
    validation: Option<&Path>,
    embeddings: &Path,
    vocab: &Path,
) -> CmdResult {
    let table = load_table(embeddings, vocab, cfg.seed)?;
    let train_set = encode_training(&read_split(train)?, table.vocab(), cfg.seq_len)?;
    let val_set = match validation {
        Some(p) => encode_all(&read_split(p)?, table.vocab(), cfg.seq_len)?,
        None => Vec::new(),
    };
    let outcome = model::train(table, &train_set, &val_set, &cfg.aspera())?;
    let m = &outcome.model;

    let mut emb_file = path_string(embeddings);
    if cfg.train_embeddings {
        m.embeddings.save(&out.path("trained_embeddings.txt"))?;
        emb_file = path_string(&out.path("trained_embeddings.txt"));
    }
    let extra = [
        ("train_file", path_string(train)),
        ("embeddings_file", emb_file),
        ("vocab_file", path_string(vocab)),
    ];
    checkpoint::save_model(&out.path("model.ckpt"), &m.user, &m.item, &meta(cfg, &extra))?;
    let log: String = outcome
        .log
        .iter()
        .map(|e| serde_json::to_string(e).expect("metrics serialize") + "\n")
        .collect();
    out.write("metrics.jsonl", log)?;
    out.write(
        "aspects_user.txt",
        aspect_report(&m.user, &m.embeddings, cfg.top_words)?,
    )?;
    out.write(
        "aspects_item.txt",
        aspect_report(&m.item, &m.embeddings, cfg.top_words)?,
    )?;
    match outcome.diverged {
        Some(epoch) => Err(Error::Diverged { epoch }.into()),
        None => Ok(()),
    }
}

fn predict(out: &Out, model_path: &Path, input: &Path, files: &ModelFiles) -> CmdResult {
    let (model, meta) = open_model(model_path, files)?;
    let seq_len = meta_value(&meta, "seq_len")?;
    let reviews = encode_all(&read_split(input)?, model.embeddings.vocab(), seq_len)?;
    let mut tsv = String::from("review_id\tuser_id\titem_id\trating\tpredicted\n");
    for r in &reviews {
        let p = model.predict(r)?;
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.review_id, r.user_id, r.item_id, r.rating, p
        ));
    }
    out.write("predictions.tsv", tsv)?;
    Ok(())
}

fn evaluate(
    cfg: &RunConfig,
    out: &Out,
    model_path: &Path,
    test: &Path,
    train: Option<&Path>,
    files: &ModelFiles,
) -> CmdResult {
    let (model, meta) = open_model(model_path, files)?;
    let seq_len = meta_value(&meta, "seq_len")?;
    let train_path = meta_path(&meta, "train_file", &train.map(Path::to_path_buf))?;
    let vocab = model.embeddings.vocab().clone();
    let train_reviews = read_split(&train_path)?;
    let test_set = encode_all(&read_split(test)?, &vocab, seq_len)?;
    let train_set = encode_all(&train_reviews, &vocab, seq_len)?;

    let docs: Vec<&[String]> = train_reviews.iter().map(|r| r.tokens.as_slice()).collect();
    let stats = build_coherence_stats(&docs)?;
    let n_max = cfg.coherence_n.iter().copied().max().unwrap_or(2);
    let mut coherence = BTreeMap::new();
    for (name, tower) in [("item", &model.item), ("user", &model.user)] {
        let lists = word_lists(tower, &model.embeddings, n_max)?;
        coherence.insert(name.to_string(), coherence_table(&stats, &lists, &cfg.coherence_n)?);
    }
    let mut config = meta.clone();
    config.insert("coherence_n".into(), cfg.to_meta()["coherence_n"].clone());
    let report = EvalReport {
        test_mse: evaluate_mse(&model, &test_set)?,
        baselines: baseline_mse(&train_set, &test_set)?,
        coherence,
        config,
    };
    info!(
        "test MSE {:.4} (global mean {:.4}, user mean {:.4}, item mean {:.4})",
        report.test_mse.clamped, report.baselines.global_mean, report.baselines.user_mean, report.baselines.item_mean
    );
    out.write("eval_report.json", report.to_json() + "\n")?;
    Ok(())
}

type NamedTowers = Vec<(&'static str, TowerParams)>;

/// Reads either checkpoint kind, returning `(name, tower)` pairs.
fn open_towers(path: &Path, files: &ModelFiles) -> Result<(NamedTowers, EmbeddingTable), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Pipeline(format!("{}: {e}", path.display())))?;
    let (towers, meta) = if text.starts_with(checkpoint::TOWER_MAGIC) {
        let (t, meta) = checkpoint::tower_from_str(&text, path)?;
        (vec![("abae", t)], meta)
    } else {
        let (u, i, meta) = checkpoint::model_from_str(&text, path)?;
        (vec![("user", u), ("item", i)], meta)
    };
    let emb = meta_path(&meta, "embeddings_file", &files.embeddings)?;
    let vocab = meta_path(&meta, "vocab_file", &files.vocab)?;
    let table = load_table(&emb, &vocab, meta_value(&meta, "seed")?)?;
    for (_, t) in &towers {
        if t.dim() != table.dim() {
            return Err(Failure::Pipeline(format!(
                "tower width {} does not match embedding width {}",
                t.dim(),
                table.dim()
            )));
        }
    }
    Ok((towers, table))
}

fn inspect(cfg: &RunConfig, out: &Out, model_path: &Path, files: &ModelFiles) -> CmdResult {
    let (towers, table) = open_towers(model_path, files)?;
    for (name, tower) in &towers {
        let report = aspect_report(tower, &table, cfg.top_words)?;
        println!("# {name}");
        print!("{report}");
        out.write(&format!("aspects_{name}.txt"), report)?;
    }
    Ok(())
}

fn coherence(cfg: &RunConfig, out: &Out, model_path: &Path, reference: Option<&Path>, files: &ModelFiles) -> CmdResult {
    let (towers, table) = open_towers(model_path, files)?;
    let reference = match reference {
        Some(p) => p.to_path_buf(),
        None => {
            let (_, meta) = checkpoint::load_model(model_path)
                .map(|(_, _, m)| ((), m))
                .or_else(|_| checkpoint::load_tower(model_path).map(|(_, m)| ((), m)))?;
            meta_path(&meta, "train_file", &None)?
        }
    };
    let docs: Vec<Vec<String>> = read_split(&reference)?.into_iter().map(|r| r.tokens).collect();
    let stats = build_coherence_stats(&docs)?;
    let n_max = cfg.coherence_n.iter().copied().max().unwrap_or(2);
    for (name, tower) in &towers {
        let lists = word_lists(tower, &table, n_max)?;
        let csv = curve_csv(&coherence_curve(&stats, &lists, &cfg.coherence_n)?);
        println!("# {name}");
        print!("{csv}");
        out.write(&format!("coherence_{name}.csv"), csv)?;
    }
    Ok(())
}

fn gradcheck(seeds: u64) -> CmdResult {
    if seeds == 0 {
        return Err(Failure::Config("--seeds must be at least 1".into()));
    }
    let mut groups = diagnostics::check_abae(seeds)?;
    groups.extend(diagnostics::check_aspera(seeds)?);
    let mut failed = 0;
    for g in &groups {
        println!(
            "{:<26} max_rel_error={:.3e} checked={} kinks={} failures={}",
            g.name, g.max_rel_error, g.checked, g.kinks, g.failures
        );
        failed += g.failures;
    }
    if failed > 0 {
        return Err(Failure::Pipeline(format!(
            "{failed} coordinates exceed relative error {:e}",
            diagnostics::TOLERANCE
        )));
    }
    println!("all gradients agree within {:e}", diagnostics::TOLERANCE);
    Ok(())
}
