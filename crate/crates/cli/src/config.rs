//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use aspera::abae::{AbaeTrainConfig, ContextMode};
use aspera::embeddings::SgnsConfig;
use aspera::model::AsperaTrainConfig;
use log::warn;

/// Where word vectors come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingSource {
    Train,
    Load,
}

impl FromStr for EmbeddingSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "load" => Ok(Self::Load),
            other => Err(format!("expected train or load, got {other}")),
        }
    }
}

impl Display for EmbeddingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Load => "load",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub min_count: u64,
    pub seq_len: usize,
    pub embeddings: EmbeddingSource,
    /// Pretrained text vectors, used when `embeddings = load`.
    pub embeddings_path: String,
    pub dim: usize,
    pub window: usize,
    pub sgns_negatives: usize,
    pub sgns_epochs: usize,
    pub sgns_learning_rate: f64,
    pub subsample: f64,
    pub aspects: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub alpha_mse: f64,
    pub alpha_mm: f64,
    pub ortho: f64,
    pub kmeans_iters: usize,
    pub context: ContextMode,
    pub train_embeddings: bool,
    pub regenerate_pairs: bool,
    pub abae_negatives: usize,
    pub abae_batch_size: usize,
    pub top_words: usize,
    pub coherence_n: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sgns = SgnsConfig::default();
        let model = AsperaTrainConfig::sgns_preset();
        let abae = AbaeTrainConfig::default();
        Self {
            seed: 1,
            min_count: 1,
            seq_len: model.seq_len,
            embeddings: EmbeddingSource::Train,
            embeddings_path: String::new(),
            dim: sgns.dim,
            window: sgns.window,
            sgns_negatives: sgns.negatives,
            sgns_epochs: sgns.epochs,
            sgns_learning_rate: sgns.learning_rate,
            subsample: sgns.subsample,
            aspects: model.aspects,
            epochs: model.epochs,
            batch_size: model.batch_size,
            learning_rate: model.learning_rate,
            margin: model.margin,
            alpha_mse: model.alpha_mse,
            alpha_mm: model.alpha_mm,
            ortho: model.ortho,
            kmeans_iters: model.kmeans_iters,
            context: model.context,
            train_embeddings: model.train_embeddings,
            regenerate_pairs: model.regenerate_pairs,
            abae_negatives: abae.negatives,
            abae_batch_size: abae.batch_size,
            top_words: 10,
            coherence_n: vec![5, 10, 15, 20],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

impl RunConfig {
    /// Sets one key. Unknown keys are reported and skipped.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "seq_len" => self.seq_len = parse(key, value)?,
            "embeddings" => self.embeddings = parse(key, value)?,
            "embeddings_path" => self.embeddings_path = value.to_string(),
            "dim" => self.dim = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "sgns_negatives" => self.sgns_negatives = parse(key, value)?,
            "sgns_epochs" => self.sgns_epochs = parse(key, value)?,
            "sgns_learning_rate" => self.sgns_learning_rate = parse(key, value)?,
            "subsample" => self.subsample = parse(key, value)?,
            "aspects" => self.aspects = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "alpha_mse" => self.alpha_mse = parse(key, value)?,
            "alpha_mm" => self.alpha_mm = parse(key, value)?,
            "ortho" => self.ortho = parse(key, value)?,
            "kmeans_iters" => self.kmeans_iters = parse(key, value)?,
            "context" => self.context = value.parse().map_err(|e| format!("{e}"))?,
            "train_embeddings" => self.train_embeddings = parse(key, value)?,
            "regenerate_pairs" => self.regenerate_pairs = parse(key, value)?,
            "abae_negatives" => self.abae_negatives = parse(key, value)?,
            "abae_batch_size" => self.abae_batch_size = parse(key, value)?,
            "top_words" => self.top_words = parse(key, value)?,
            "coherence_n" => {
                self.coherence_n = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "hidden_dim" => warn!("hidden_dim={value} has no counterpart in the model and is ignored"),
            other => warn!("unknown config key {other:?} ignored"),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected key = value", n + 1))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| format!("{origin}:{}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config = Self::default();
        config.apply_text(&text, &path.display().to_string())?;
        Ok(config)
    }

    /// Every key with its resolved value.
    pub fn to_meta(&self) -> BTreeMap<String, String> {
        let n: Vec<String> = self.coherence_n.iter().map(|v| v.to_string()).collect();
        let pairs: [(&str, String); 27] = [
            ("seed", self.seed.to_string()),
            ("min_count", self.min_count.to_string()),
            ("seq_len", self.seq_len.to_string()),
            ("embeddings", self.embeddings.to_string()),
            ("embeddings_path", self.embeddings_path.clone()),
            ("dim", self.dim.to_string()),
            ("window", self.window.to_string()),
            ("sgns_negatives", self.sgns_negatives.to_string()),
            ("sgns_epochs", self.sgns_epochs.to_string()),
            ("sgns_learning_rate", self.sgns_learning_rate.to_string()),
            ("subsample", self.subsample.to_string()),
            ("aspects", self.aspects.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("margin", self.margin.to_string()),
            ("alpha_mse", self.alpha_mse.to_string()),
            ("alpha_mm", self.alpha_mm.to_string()),
            ("ortho", self.ortho.to_string()),
            ("kmeans_iters", self.kmeans_iters.to_string()),
            ("context", self.context.to_string()),
            ("train_embeddings", self.train_embeddings.to_string()),
            ("regenerate_pairs", self.regenerate_pairs.to_string()),
            ("abae_negatives", self.abae_negatives.to_string()),
            ("abae_batch_size", self.abae_batch_size.to_string()),
            ("top_words", self.top_words.to_string()),
            ("coherence_n", n.join(",")),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_meta()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn sgns(&self) -> SgnsConfig {
        SgnsConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.sgns_negatives,
            epochs: self.sgns_epochs,
            learning_rate: self.sgns_learning_rate,
            subsample: self.subsample,
            seed: self.seed,
        }
    }

    pub fn abae(&self) -> AbaeTrainConfig {
        AbaeTrainConfig {
            aspects: self.aspects,
            margin: self.margin,
            negatives: self.abae_negatives,
            ortho: self.ortho,
            epochs: self.epochs,
            batch_size: self.abae_batch_size,
            learning_rate: self.learning_rate,
            kmeans_iters: self.kmeans_iters,
            context: self.context,
            train_embeddings: self.train_embeddings,
            seed: self.seed,
        }
    }

    pub fn aspera(&self) -> AsperaTrainConfig {
        AsperaTrainConfig {
            aspects: self.aspects,
            seq_len: self.seq_len,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            margin: self.margin,
            alpha_mse: self.alpha_mse,
            alpha_mm: self.alpha_mm,
            ortho: self.ortho,
            kmeans_iters: self.kmeans_iters,
            context: self.context,
            train_embeddings: self.train_embeddings,
            regenerate_pairs: self.regenerate_pairs,
            seed: self.seed,
        }
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<(), String> {
        if self.min_count == 0 {
            return Err("min_count must be at least 1".into());
        }
        if self.top_words == 0 {
            return Err("top_words must be positive".into());
        }
        if self.coherence_n.iter().any(|&n| n < 2) {
            return Err("coherence_n values must be at least 2".into());
        }
        if self.embeddings == EmbeddingSource::Load && self.embeddings_path.is_empty() {
            return Err("embeddings = load needs embeddings_path".into());
        }
        self.aspera().validate().map_err(|e| e.to_string())?;
        self.abae().validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
