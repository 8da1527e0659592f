//! One attention-based aspect encoder ("tower").
//!
//! For a review with word vectors `e_1..e_n`:
//!
//! ```text
//! y = mean(e_i)                 (or the plain sum, see ContextMode)
//! a = softmax(e_iᵀ A y)
//! z = Σ a_i e_i                 text embedding
//! p = softmax(W z + b)          aspect weights
//! r = Tᵀ p                      reconstruction
//! ```
//!
//! Training pushes `r` towards `z` and away from the text embeddings of
//! other reviews with a hinge on cosine similarities, plus a penalty that
//! keeps the rows of `T` close to orthonormal.

use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedReview;
use crate::diffcore::{Tape, Tensor, Var};
use crate::embeddings::{kmeans, nearest_words, EmbeddingTable, Neighbor};
use crate::error::{Error, Result};
use crate::optim::Adam;

/// How the attention key `y` is pooled from the word vectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ContextMode {
    #[default]
    Mean,
    Sum,
}

impl FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            other => Err(Error::invalid(format!("context must be sum or mean, got {other}"))),
        }
    }
}

impl std::fmt::Display for ContextMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Sum => "sum",
        })
    }
}

/// Parameters of one tower.
#[derive(Clone, Debug, PartialEq)]
pub struct TowerParams {
    /// `d × d`
    pub attention: Tensor,
    /// `k × d`
    pub projection: Tensor,
    /// `k × 1`
    pub bias: Tensor,
    /// `k × d`, one aspect embedding per row.
    pub aspects: Tensor,
    pub context: ContextMode,
    pub train_embeddings: bool,
}

impl TowerParams {
    /// Identity attention, zero projection and bias, the given aspect rows.
    pub fn with_aspects(aspects: Tensor) -> Self {
        let (k, d) = aspects.shape();
        Self {
            attention: Tensor::identity(d),
            projection: Tensor::zeros(k, d),
            bias: Tensor::zeros(k, 1),
            aspects,
            context: ContextMode::Mean,
            train_embeddings: false,
        }
    }

    /// Aspect rows from k-means over the table's word vectors, each scaled
    /// to unit length.
    pub fn init_from_embeddings(table: &EmbeddingTable, k: usize, max_iters: usize, seed: u64) -> Result<Self> {
        let clusters = kmeans(&table.word_rows(), k, max_iters, seed)?;
        let mut aspects = clusters.centroids;
        for r in 0..k {
            let row = aspects.row_mut(r);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(Self::with_aspects(aspects))
    }

    pub fn dim(&self) -> usize {
        self.attention.rows()
    }

    pub fn num_aspects(&self) -> usize {
        self.aspects.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.dim(), self.num_aspects());
        let ok = self.attention.shape() == (d, d)
            && self.projection.shape() == (k, d)
            && self.bias.shape() == (k, 1)
            && self.aspects.shape() == (k, d);
        if !ok {
            return Err(Error::invalid(format!(
                "inconsistent tower shapes: A {:?}, W {:?}, b {:?}, T {:?}",
                self.attention.shape(),
                self.projection.shape(),
                self.bias.shape(),
                self.aspects.shape()
            )));
        }
        if !self.tensors().iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("tower parameters contain non-finite values"));
        }
        Ok(())
    }

    /// `[A, W, b, T]`
    pub fn tensors(&self) -> [&Tensor; 4] {
        [&self.attention, &self.projection, &self.bias, &self.aspects]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [
            &mut self.attention,
            &mut self.projection,
            &mut self.bias,
            &mut self.aspects,
        ]
    }

    /// Records the four tensors as parameter leaves.
    pub fn bind(&self, tape: &mut Tape) -> TowerVars {
        TowerVars {
            attention: tape.param(self.attention.clone()),
            projection: tape.param(self.projection.clone()),
            bias: tape.param(self.bias.clone()),
            aspects: tape.param(self.aspects.clone()),
            context: self.context,
        }
    }
}

/// A tower's parameters as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct TowerVars {
    pub attention: Var,
    pub projection: Var,
    pub bias: Var,
    pub aspects: Var,
    pub context: ContextMode,
}

impl TowerVars {
    pub fn from_vars(vars: &[Var], context: ContextMode) -> Self {
        Self {
            attention: vars[0],
            projection: vars[1],
            bias: vars[2],
            aspects: vars[3],
            context,
        }
    }

    pub fn vars(&self) -> [Var; 4] {
        [self.attention, self.projection, self.bias, self.aspects]
    }
}

/// Intermediate quantities of one encoding, as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct EncodingVars {
    pub attention: Var,
    pub context: Var,
    pub text: Var,
    pub aspect_probs: Var,
    pub reconstruction: Var,
}

/// Plain values of an encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    /// Attention weight per unmasked token.
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
}

impl Encoding {
    fn read(tape: &Tape, vars: &EncodingVars) -> Self {
        let get = |v: Var| tape.value(v).as_slice().to_vec();
        Self {
            a: get(vars.attention),
            y: get(vars.context),
            z: get(vars.text),
            p: get(vars.aspect_probs),
            r: get(vars.reconstruction),
        }
    }
}

/// Where word vectors come from during encoding.
#[derive(Clone, Copy, Debug)]
pub enum WordVectors<'a> {
    /// Rows are copied onto the tape as constants.
    Frozen(&'a Tensor),
    /// The whole table is a parameter leaf; gradients scatter into it.
    Trainable(Var),
}

impl WordVectors<'_> {
    pub fn gather(&self, tape: &mut Tape, tokens: &[usize]) -> Result<Var> {
        match *self {
            WordVectors::Trainable(var) => Ok(tape.gather_rows(var, tokens)?),
            WordVectors::Frozen(table) => {
                let mut data = Vec::with_capacity(tokens.len() * table.cols());
                for &t in tokens {
                    if t >= table.rows() {
                        return Err(Error::invalid(format!("token index {t} outside the embedding table")));
                    }
                    data.extend_from_slice(table.row(t));
                }
                Ok(tape.constant(Tensor::from_vec(tokens.len(), table.cols(), data)?))
            }
        }
    }
}

/// Runs the encoder over the unmasked token indices of one review.
pub fn encode_on_tape(
    tape: &mut Tape,
    embeddings: WordVectors<'_>,
    tokens: &[usize],
    tower: &TowerVars,
) -> Result<EncodingVars> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot encode a review with no unmasked tokens"));
    }
    let words = embeddings.gather(tape, tokens)?;
    let context = match tower.context {
        ContextMode::Mean => tape.mean_rows(words)?,
        ContextMode::Sum => tape.sum_rows(words)?,
    };
    let key = tape.matmul(tower.attention, context)?;
    let scores = tape.matmul(words, key)?;
    let attention = tape.softmax(scores)?;
    let words_t = tape.transpose(words)?;
    let text = tape.matmul(words_t, attention)?;
    let projected = tape.matmul(tower.projection, text)?;
    let logits = tape.add(projected, tower.bias)?;
    let aspect_probs = tape.softmax(logits)?;
    let aspects_t = tape.transpose(tower.aspects)?;
    let reconstruction = tape.matmul(aspects_t, aspect_probs)?;
    Ok(EncodingVars {
        attention,
        context,
        text,
        aspect_probs,
        reconstruction,
    })
}

pub fn encode(review: &EncodedReview, table: &EmbeddingTable, params: &TowerParams) -> Result<Encoding> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let enc = encode_on_tape(&mut tape, WordVectors::Frozen(table.matrix()), review.tokens(), &vars)?;
    Ok(Encoding::read(&tape, &enc))
}

/// `max(0, margin − r̂·ẑ + r̂·n̂_i)` averaged over the negatives, all vectors
/// L2-normalized.
pub fn reconstruction_loss_on_tape(
    tape: &mut Tape,
    text: Var,
    reconstruction: Var,
    negatives: &[Var],
    margin: f64,
) -> Result<Var> {
    if negatives.is_empty() {
        return Err(Error::invalid("reconstruction loss needs at least one negative"));
    }
    let r = tape.l2_normalize(reconstruction)?;
    let z = tape.l2_normalize(text)?;
    let positive = tape.dot(r, z)?;
    let mut terms = Vec::with_capacity(negatives.len());
    for &neg in negatives {
        let n = tape.l2_normalize(neg)?;
        let s = tape.dot(r, n)?;
        let gap = tape.sub(s, positive)?;
        let shifted = tape.add_scalar(gap, margin)?;
        terms.push(tape.hinge(shifted)?);
    }
    Ok(tape.mean_all(&terms)?)
}

pub fn reconstruction_loss(encoding: &Encoding, negatives: &[Vec<f64>], margin: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::vector(encoding.z.clone()));
    let r = tape.constant(Tensor::vector(encoding.r.clone()));
    let negs: Vec<Var> = negatives
        .iter()
        .map(|n| tape.constant(Tensor::vector(n.clone())))
        .collect();
    let loss = reconstruction_loss_on_tape(&mut tape, z, r, &negs, margin)?;
    Ok(tape.scalar(loss))
}

/// `‖T̂ T̂ᵀ − I‖²_F` where `T̂` has unit-length rows.
pub fn ortho_penalty_on_tape(tape: &mut Tape, aspects: Var) -> Result<Var> {
    let k = tape.shape(aspects).0;
    let unit = tape.l2_normalize_rows(aspects)?;
    let unit_t = tape.transpose(unit)?;
    let gram = tape.matmul(unit, unit_t)?;
    let eye = tape.constant(Tensor::identity(k));
    let diff = tape.sub(gram, eye)?;
    Ok(tape.sq_frobenius(diff)?)
}

pub fn ortho_penalty(aspects: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let t = tape.constant(aspects.clone());
    let p = ortho_penalty_on_tape(&mut tape, t)?;
    Ok(tape.scalar(p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbaeTrainConfig {
    pub aspects: usize,
    pub margin: f64,
    /// Negative reviews per batch.
    pub negatives: usize,
    pub ortho: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kmeans_iters: usize,
    pub context: ContextMode,
    pub train_embeddings: bool,
    pub seed: u64,
}

impl Default for AbaeTrainConfig {
    fn default() -> Self {
        Self {
            aspects: 10,
            margin: 1.0,
            negatives: 20,
            ortho: 0.1,
            epochs: 18,
            batch_size: 50,
            learning_rate: 1e-3,
            kmeans_iters: 100,
            context: ContextMode::Mean,
            train_embeddings: false,
            seed: 1,
        }
    }
}

impl AbaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aspects < 2 {
            return Err(Error::invalid("ABAE needs at least 2 aspects"));
        }
        if self.negatives == 0 {
            return Err(Error::invalid("ABAE needs at least 1 negative"));
        }
        if !(self.ortho >= 0.0) || !(self.margin > 0.0) {
            return Err(Error::invalid("ortho must be >= 0 and margin > 0"));
        }
        if self.batch_size == 0 || self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::invalid("batch size, epochs and learning rate must be positive"));
        }
        Ok(())
    }
}

/// Loss terms of one batch, as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct AbaeLossVars {
    pub total: Var,
    pub reconstruction: Var,
    pub ortho: Var,
}

/// Mean reconstruction loss over `batch` against shared `negatives`, plus
/// `ortho` times the orthogonality penalty.
pub fn abae_batch_loss(
    tape: &mut Tape,
    embeddings: WordVectors<'_>,
    tower: &TowerVars,
    batch: &[&[usize]],
    negatives: &[&[usize]],
    margin: f64,
    ortho: f64,
) -> Result<AbaeLossVars> {
    let neg_text: Vec<Var> = negatives
        .iter()
        .map(|toks| encode_on_tape(tape, embeddings, toks, tower).map(|e| e.text))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(batch.len());
    for toks in batch {
        let enc = encode_on_tape(tape, embeddings, toks, tower)?;
        terms.push(reconstruction_loss_on_tape(
            tape,
            enc.text,
            enc.reconstruction,
            &neg_text,
            margin,
        )?);
    }
    let reconstruction = tape.mean_all(&terms)?;
    let penalty = ortho_penalty_on_tape(tape, tower.aspects)?;
    let weighted = tape.scale(penalty, ortho)?;
    let total = tape.add(reconstruction, weighted)?;
    Ok(AbaeLossVars {
        total,
        reconstruction,
        ortho: penalty,
    })
}

/// Result of standalone ABAE training.
#[derive(Clone, Debug)]
pub struct AbaeRun {
    pub tower: TowerParams,
    /// Unchanged unless the config makes embeddings trainable.
    pub embeddings: EmbeddingTable,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Samples `m` indices uniformly (with replacement) from outside `batch`.
pub(crate) fn sample_complement(n: usize, batch: &[usize], m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut in_batch = vec![false; n];
    batch.iter().for_each(|&i| in_batch[i] = true);
    let pool: Vec<usize> = (0..n).filter(|&i| !in_batch[i]).collect();
    let pool = if pool.is_empty() { (0..n).collect() } else { pool };
    (0..m).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

pub fn train_abae(corpus: &[EncodedReview], table: &EmbeddingTable, config: &AbaeTrainConfig) -> Result<AbaeRun> {
    config.validate()?;
    let docs: Vec<&[usize]> = corpus
        .iter()
        .filter(|r| r.has_known_token())
        .map(|r| r.tokens())
        .collect();
    if docs.is_empty() {
        return Err(Error::invalid("ABAE training corpus is empty"));
    }
    let batch_size = if config.batch_size > docs.len() {
        warn!(
            "batch size {} exceeds corpus size {}; clamping",
            config.batch_size,
            docs.len()
        );
        docs.len()
    } else {
        config.batch_size
    };

    let mut tower = TowerParams::init_from_embeddings(table, config.aspects, config.kmeans_iters, config.seed)?;
    tower.context = config.context;
    tower.train_embeddings = config.train_embeddings;
    let mut embeddings = table.clone();
    let mut emb_matrix = table.matrix().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let negs = sample_complement(docs.len(), chunk, config.negatives, &mut rng);
            let batch: Vec<&[usize]> = chunk.iter().map(|&i| docs[i]).collect();
            let neg_docs: Vec<&[usize]> = negs.iter().map(|&i| docs[i]).collect();

            let mut tape = Tape::new();
            let emb_var = config.train_embeddings.then(|| tape.param(emb_matrix.clone()));
            let source = match emb_var {
                Some(v) => WordVectors::Trainable(v),
                None => WordVectors::Frozen(&emb_matrix),
            };
            let vars = tower.bind(&mut tape);
            let loss = abae_batch_loss(&mut tape, source, &vars, &batch, &neg_docs, config.margin, config.ortho)?;
            let value = tape.scalar(loss.total);
            if !value.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let grads = tape.backward(loss.total)?;
            let [a, w, b, t] = vars.vars();
            if let Some(emb) = emb_var {
                let [pa, pw, pb, pt] = tower.tensors_mut();
                adam.step(
                    &mut [pa, pw, pb, pt, &mut emb_matrix],
                    &[grads.wrt(a), grads.wrt(w), grads.wrt(b), grads.wrt(t), grads.wrt(emb)],
                );
                emb_matrix.row_mut(crate::corpus::PAD).iter_mut().for_each(|v| *v = 0.0);
            } else {
                let [pa, pw, pb, pt] = tower.tensors_mut();
                adam.step(
                    &mut [pa, pw, pb, pt],
                    &[grads.wrt(a), grads.wrt(w), grads.wrt(b), grads.wrt(t)],
                );
            }
            sum += value;
            batches += 1;
        }
        let mean = sum / batches as f64;
        log::info!("abae epoch {}: loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    if config.train_embeddings {
        embeddings.set_matrix(emb_matrix)?;
    }
    Ok(AbaeRun {
        tower,
        embeddings,
        epoch_losses,
    })
}

/// Nearest vocabulary words to each aspect row.
pub fn top_aspect_words(params: &TowerParams, table: &EmbeddingTable, n: usize) -> Result<Vec<Vec<Neighbor>>> {
    (0..params.num_aspects())
        .map(|r| nearest_words(table, params.aspects.row(r), n))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::{Review, Vocabulary};

    fn table(rows: &[Vec<f64>]) -> EmbeddingTable {
        let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i:02}")).collect();
        let review = Review {
            review_id: "0".into(),
            user_id: "u".into(),
            item_id: "i".into(),
            rating: 3.0,
            tokens: words.clone(),
        };
        let vocab = Arc::new(Vocabulary::build(&[review], 1).unwrap());
        let d = rows[0].len();
        let mut m = Tensor::zeros(vocab.len(), d);
        for (w, row) in words.iter().zip(rows) {
            m.row_mut(vocab.get(w).unwrap()).copy_from_slice(row);
        }
        EmbeddingTable::new(vocab, m).unwrap()
    }

    fn review(tokens: Vec<usize>) -> EncodedReview {
        let n = tokens.len();
        EncodedReview {
            review_id: "r".into(),
            user_id: "u".into(),
            item_id: "i".into(),
            rating: 4.0,
            token_indices: tokens,
            mask: vec![true; n],
        }
    }

    #[test]
    fn single_token_review() {
        let t = table(&[vec![0.3, -0.2, 0.9], vec![1.0, 0.0, 0.0]]);
        let params = TowerParams::with_aspects(Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap());
        let e = encode(&review(vec![2]), &t, &params).unwrap();
        assert_eq!(e.a, vec![1.0]);
        assert_eq!(e.z, t.row(2));
    }

    #[test]
    fn zero_projection_gives_uniform_aspects() {
        let t = table(&[vec![0.3, -0.2, 0.9], vec![1.0, 0.5, 0.0]]);
        let aspects = Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let e = encode(&review(vec![2, 3]), &t, &TowerParams::with_aspects(aspects)).unwrap();
        for p in &e.p {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_words_get_uniform_attention() {
        let t = table(&[vec![0.4, 0.1], vec![0.4, 0.1], vec![0.4, 0.1]]);
        let params = TowerParams::with_aspects(Tensor::identity(2));
        let e = encode(&review(vec![2, 3, 4]), &t, &params).unwrap();
        for a in &e.a {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_context_differs_from_mean() {
        let t = table(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let mut params = TowerParams::with_aspects(Tensor::identity(2));
        let mean = encode(&review(vec![2, 3]), &t, &params).unwrap();
        params.context = ContextMode::Sum;
        let sum = encode(&review(vec![2, 3]), &t, &params).unwrap();
        assert_eq!(sum.y, vec![1.0, 2.0]);
        assert_eq!(mean.y, vec![0.5, 1.0]);
        assert_ne!(mean.a, sum.a);
    }

    #[test]
    fn empty_review_rejected() {
        let t = table(&[vec![1.0, 0.0]]);
        let params = TowerParams::with_aspects(Tensor::identity(2));
        let mut r = review(vec![0]);
        r.mask = vec![false];
        assert!(encode(&r, &t, &params).is_err());
    }

    fn enc(z: Vec<f64>, r: Vec<f64>) -> Encoding {
        Encoding {
            a: vec![1.0],
            y: z.clone(),
            z,
            p: vec![1.0],
            r,
        }
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        let e = enc(vec![2.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]);
        let loss = reconstruction_loss(&e, &[vec![0.0, 3.0, 0.0], vec![0.0, 0.0, -1.0]], 1.0).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn orthogonal_everything_costs_the_margin() {
        let e = enc(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let loss = reconstruction_loss(&e, &[vec![0.0, 0.0, 1.0]], 1.0).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn reconstruction_loss_needs_negatives() {
        let e = enc(vec![1.0, 0.0], vec![0.0, 1.0]);
        assert!(reconstruction_loss(&e, &[], 1.0).is_err());
    }

    #[test]
    fn ortho_penalty_cases() {
        assert!(ortho_penalty(&Tensor::identity(3)).unwrap().abs() < 1e-15);
        let same = Tensor::from_rows(&[vec![0.6, 0.8], vec![0.6, 0.8]]).unwrap();
        assert!((ortho_penalty(&same).unwrap() - 2.0).abs() < 1e-12);
        // row scaling does not matter
        let scaled = Tensor::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(ortho_penalty(&scaled).unwrap().abs() < 1e-15);
    }

    #[test]
    fn aspect_row_equal_to_word_ranks_it_first() {
        let t = table(&[vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.3], vec![-0.5, 0.1, 1.0]]);
        let params = TowerParams::with_aspects(Tensor::from_rows(&[t.row(3).to_vec(), t.row(4).to_vec()]).unwrap());
        let words = top_aspect_words(&params, &t, 2).unwrap();
        assert_eq!(words[0][0].word, "w01");
        assert_eq!(words[1][0].word, "w02");
    }

    #[test]
    fn complement_sampling_avoids_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_complement(10, &[0, 1, 2], 50, &mut rng);
        assert!(s.iter().all(|i| *i >= 3 && *i < 10));
        let all = sample_complement(3, &[0, 1, 2], 5, &mut rng);
        assert_eq!(all.len(), 5);
    }

    #[test]
    fn config_defaults() {
        let c = AbaeTrainConfig::default();
        assert_eq!((c.ortho, c.aspects, c.epochs, c.negatives), (0.1, 10, 18, 20));
        assert!(AbaeTrainConfig {
            aspects: 1,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(AbaeTrainConfig { negatives: 0, ..c }.validate().is_err());
    }
}
