use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EmbeddingTable;
use crate::corpus::{Vocabulary, UNK};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Maximum distance between centre and context word.
    pub window: usize,
    /// Noise words per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: 1e-4,
            seed: 1,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid("SGNS dimension must be at least 2"));
        }
        if self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::invalid("SGNS window, negatives and epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("SGNS learning rate must be positive"));
        }
        if self.subsample < 0.0 {
            return Err(Error::invalid("SGNS subsample threshold must be non-negative"));
        }
        Ok(())
    }
}

/// A centre word, one observed context word and fixed noise words.
#[derive(Clone, Debug)]
pub struct ProbePair {
    pub center: usize,
    pub context: usize,
    pub noise: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Skip-gram with negative sampling, trained one epoch at a time.
pub struct SgnsTrainer {
    config: SgnsConfig,
    vocab: Arc<Vocabulary>,
    sentences: Vec<Vec<usize>>,
    /// Centre vectors, `|V| × d` row-major.
    input: Vec<f64>,
    /// Context vectors.
    output: Vec<f64>,
    noise_cdf: Vec<f64>,
    keep_prob: Vec<f64>,
    rng: ChaCha8Rng,
    processed: u64,
    total: u64,
    epochs_done: usize,
}

impl SgnsTrainer {
    pub fn new<S: AsRef<[String]>>(sentences: &[S], vocab: Arc<Vocabulary>, config: SgnsConfig) -> Result<Self> {
        config.validate()?;
        if vocab.real_len() < 2 {
            return Err(Error::invalid("SGNS needs at least 2 vocabulary words"));
        }
        let sentences: Vec<Vec<usize>> = sentences
            .iter()
            .map(|s| s.as_ref().iter().filter_map(|w| vocab.get(w)).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return Err(Error::invalid("SGNS corpus has no in-vocabulary tokens"));
        }

        let v = vocab.len();
        let d = config.dim;
        let mut counts = vec![0u64; v];
        for s in &sentences {
            for &w in s {
                counts[w] += 1;
            }
        }
        let corpus_words: u64 = counts.iter().sum();

        let mut noise_cdf = Vec::with_capacity(v);
        let mut acc = 0.0;
        for &c in &counts {
            acc += (c as f64).powf(0.75);
            noise_cdf.push(acc);
        }
        let keep_prob = counts
            .iter()
            .map(|&c| {
                if config.subsample <= 0.0 || c == 0 {
                    return 1.0;
                }
                let scaled = config.subsample * corpus_words as f64;
                ((c as f64 / scaled).sqrt() + 1.0) * scaled / c as f64
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 0.5 / d as f64;
        let mut input = vec![0.0; v * d];
        for (i, _) in vocab.iter() {
            for x in &mut input[i * d..(i + 1) * d] {
                *x = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self {
            total: corpus_words * config.epochs as u64,
            output: vec![0.0; v * d],
            config,
            vocab,
            sentences,
            input,
            noise_cdf,
            keep_prob,
            rng,
            processed: 0,
            epochs_done: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    fn sample_noise(&mut self) -> usize {
        let total = *self.noise_cdf.last().expect("non-empty vocabulary");
        let target = self.rng.gen::<f64>() * total;
        self.noise_cdf
            .partition_point(|&c| c <= target)
            .min(self.noise_cdf.len() - 1)
    }

    fn learning_rate(&self) -> f64 {
        let progress = self.processed as f64 / self.total.max(1) as f64;
        self.config.learning_rate * (1.0 - progress).max(1e-4)
    }

    fn update(&mut self, center: usize, context: usize, lr: f64, grad_in: &mut [f64]) {
        let d = self.config.dim;
        grad_in.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..=self.config.negatives {
            let (target, label) = if k == 0 {
                (context, 1.0)
            } else {
                let t = self.sample_noise();
                if t == context {
                    continue;
                }
                (t, 0.0)
            };
            let wi = &self.input[center * d..(center + 1) * d];
            let wo = &mut self.output[target * d..(target + 1) * d];
            let score: f64 = wi.iter().zip(wo.iter()).map(|(a, b)| a * b).sum();
            let g = (label - sigmoid(score)) * lr;
            for ((gi, o), i) in grad_in.iter_mut().zip(wo.iter_mut()).zip(wi) {
                *gi += g * *o;
                *o += g * i;
            }
        }
        for (w, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(grad_in.iter()) {
            *w += g;
        }
    }

    /// One pass over the corpus.
    pub fn train_epoch(&mut self) {
        let mut grad_in = vec![0.0; self.config.dim];
        let sentences = std::mem::take(&mut self.sentences);
        for sentence in &sentences {
            let kept: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&w| {
                    let p = self.keep_prob[w];
                    p >= 1.0 || self.rng.gen::<f64>() < p
                })
                .collect();
            for (pos, &center) in kept.iter().enumerate() {
                let lr = self.learning_rate();
                let reach = self.config.window - self.rng.gen_range(0..self.config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos != pos {
                        self.update(center, kept[ctx_pos], lr, &mut grad_in);
                    }
                }
            }
            self.processed += sentence.len() as u64;
        }
        self.sentences = sentences;
        self.epochs_done += 1;
    }

    /// Mean of `log σ(e_c·o_ctx) + Σ log σ(−e_c·o_noise)` over the probes.
    pub fn objective(&self, probes: &[ProbePair]) -> f64 {
        let d = self.config.dim;
        let dot = |a: usize, b: usize| -> f64 {
            self.input[a * d..(a + 1) * d]
                .iter()
                .zip(&self.output[b * d..(b + 1) * d])
                .map(|(x, y)| x * y)
                .sum()
        };
        let total: f64 = probes
            .iter()
            .map(|p| {
                log_sigmoid(dot(p.center, p.context))
                    + p.noise.iter().map(|&n| log_sigmoid(-dot(p.center, n))).sum::<f64>()
            })
            .sum();
        total / probes.len().max(1) as f64
    }

    /// Centre vectors as an embedding table; the unknown row is the mean of
    /// the word rows.
    pub fn into_table(self) -> Result<EmbeddingTable> {
        let d = self.config.dim;
        let mut matrix = Tensor::from_vec(self.vocab.len(), d, self.input)?;
        let mut mean = vec![0.0; d];
        let n = self.vocab.real_len() as f64;
        for (i, _) in self.vocab.iter() {
            for (m, v) in mean.iter_mut().zip(matrix.row(i)) {
                *m += v / n;
            }
        }
        matrix.row_mut(UNK).copy_from_slice(&mean);
        EmbeddingTable::new(self.vocab, matrix)
    }
}

/// Trains skip-gram embeddings for `vocab` on tokenized sentences.
pub fn train_sgns<S: AsRef<[String]>>(
    sentences: &[S],
    vocab: Arc<Vocabulary>,
    config: &SgnsConfig,
) -> Result<EmbeddingTable> {
    let mut trainer = SgnsTrainer::new(sentences, vocab, config.clone())?;
    for _ in 0..config.epochs {
        trainer.train_epoch();
    }
    trainer.into_table()
}
