//! The dual-tower rating model.
//!
//! Every review passes through a user tower and an item tower. The rating
//! estimate is the raw dot product of the two text embeddings. Training
//! works on review pairs (same user or same item) and combines:
//!
//! * squared error between `z_uᵀ z_i` of the anchor and its rating,
//! * an alignment hinge pulling each reconstruction towards its own text
//!   embedding and away from the other tower's embeddings,
//! * a pair hinge keeping the shared entity's embeddings of both reviews
//!   together,
//! * the orthogonality penalty on both aspect matrices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abae::{
    encode_on_tape, ortho_penalty_on_tape, ContextMode, EncodingVars, TowerParams, TowerVars, WordVectors,
};
use crate::corpus::{build_pairs, EncodedReview, PairKind, ReviewPair, PAD};
use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::optim::Adam;

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AsperaTrainConfig {
    pub aspects: usize,
    /// Words per review sample.
    pub seq_len: usize,
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
    /// Rebuild review pairs with seed + epoch before every epoch.
    pub regenerate_pairs: bool,
    pub seed: u64,
}

impl Default for AsperaTrainConfig {
    fn default() -> Self {
        Self::sgns_preset()
    }
}

impl AsperaTrainConfig {
    /// Settings used with skip-gram vectors: 10 aspects, 18 epochs, 224 words.
    pub fn sgns_preset() -> Self {
        Self {
            aspects: 10,
            seq_len: 224,
            epochs: 18,
            batch_size: 32,
            learning_rate: 1e-3,
            margin: 1.0,
            alpha_mse: 1.0,
            alpha_mm: 1.0,
            ortho: 0.1,
            kmeans_iters: 100,
            context: ContextMode::Mean,
            train_embeddings: false,
            regenerate_pairs: true,
            seed: 1,
        }
    }

    /// Settings used with GloVe vectors: 11 aspects, 20 epochs, 256 words.
    pub fn glove_preset() -> Self {
        Self {
            aspects: 11,
            seq_len: 256,
            epochs: 20,
            ..Self::sgns_preset()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha_mse: self.alpha_mse,
            alpha_mm: self.alpha_mm,
            ortho: self.ortho,
            margin: self.margin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.aspects < 2 {
            return Err(Error::invalid("at least 2 aspects required"));
        }
        if self.seq_len == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("seq_len, epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.margin > 0.0) {
            return Err(Error::invalid("learning rate and margin must be positive"));
        }
        if !(self.alpha_mse >= 0.0) || !(self.alpha_mm >= 0.0) || !(self.ortho >= 0.0) {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha_mse: f64,
    pub alpha_mm: f64,
    pub ortho: f64,
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct AsperaModel {
    pub user: TowerParams,
    pub item: TowerParams,
    pub embeddings: EmbeddingTable,
}

impl AsperaModel {
    /// Both towers start from the same k-means aspect initialization.
    pub fn init(embeddings: EmbeddingTable, config: &AsperaTrainConfig) -> Result<Self> {
        config.validate()?;
        let mut tower =
            TowerParams::init_from_embeddings(&embeddings, config.aspects, config.kmeans_iters, config.seed)?;
        tower.context = config.context;
        tower.train_embeddings = config.train_embeddings;
        Ok(Self {
            user: tower.clone(),
            item: tower,
            embeddings,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.user.validate()?;
        self.item.validate()?;
        let d = self.embeddings.dim();
        if self.user.dim() != d || self.item.dim() != d {
            return Err(Error::invalid("tower dimension differs from the embeddings"));
        }
        if self.user.num_aspects() != self.item.num_aspects() {
            return Err(Error::invalid("towers disagree on the number of aspects"));
        }
        Ok(())
    }

    /// Unclamped `z_uᵀ z_i` for one review.
    pub fn predict_raw(&self, review: &EncodedReview) -> Result<f64> {
        let mut tape = Tape::new();
        let words = WordVectors::Frozen(self.embeddings.matrix());
        let user = self.user.bind(&mut tape);
        let item = self.item.bind(&mut tape);
        let zu = encode_on_tape(&mut tape, words, review.tokens(), &user)?.text;
        let zi = encode_on_tape(&mut tape, words, review.tokens(), &item)?.text;
        let dot = tape.dot(zu, zi)?;
        Ok(tape.scalar(dot))
    }

    /// Rating estimate clamped to `[1, 5]`.
    pub fn predict(&self, review: &EncodedReview) -> Result<f64> {
        self.predict_raw(review).map(clamp_rating)
    }
}

pub fn clamp_rating(raw: f64) -> f64 {
    raw.clamp(RATING_MIN, RATING_MAX)
}

/// Text (`z`) and reconstructed (`r`) embeddings of both reviews of a pair
/// under both towers. Suffix `_i` is the anchor, `_j` the companion.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEncodings {
    pub z_user_i: Vec<f64>,
    pub r_user_i: Vec<f64>,
    pub z_item_i: Vec<f64>,
    pub r_item_i: Vec<f64>,
    pub z_user_j: Vec<f64>,
    pub r_user_j: Vec<f64>,
    pub z_item_j: Vec<f64>,
    pub r_item_j: Vec<f64>,
}

struct PairVars {
    user_i: EncodingVars,
    item_i: EncodingVars,
    user_j: EncodingVars,
    item_j: EncodingVars,
}

fn encode_pair_on_tape(
    tape: &mut Tape,
    words: WordVectors<'_>,
    user: &TowerVars,
    item: &TowerVars,
    anchor: &[usize],
    companion: &[usize],
) -> Result<PairVars> {
    Ok(PairVars {
        user_i: encode_on_tape(tape, words, anchor, user)?,
        item_i: encode_on_tape(tape, words, anchor, item)?,
        user_j: encode_on_tape(tape, words, companion, user)?,
        item_j: encode_on_tape(tape, words, companion, item)?,
    })
}

pub fn encode_pair(model: &AsperaModel, anchor: &EncodedReview, companion: &EncodedReview) -> Result<PairEncodings> {
    let mut tape = Tape::new();
    let user = model.user.bind(&mut tape);
    let item = model.item.bind(&mut tape);
    let words = WordVectors::Frozen(model.embeddings.matrix());
    let v = encode_pair_on_tape(&mut tape, words, &user, &item, anchor.tokens(), companion.tokens())?;
    let get = |var: Var| tape.value(var).as_slice().to_vec();
    Ok(PairEncodings {
        z_user_i: get(v.user_i.text),
        r_user_i: get(v.user_i.reconstruction),
        z_item_i: get(v.item_i.text),
        r_item_i: get(v.item_i.reconstruction),
        z_user_j: get(v.user_j.text),
        r_user_j: get(v.user_j.reconstruction),
        z_item_j: get(v.item_j.text),
        r_item_j: get(v.item_j.reconstruction),
    })
}

/// `max(0, margin − âᵀp̂ + âᵀn̂₁ + âᵀn̂₂)` on already normalized inputs.
fn triplet_hinge(tape: &mut Tape, anchor: Var, pos: Var, neg1: Var, neg2: Var, margin: f64) -> Result<Var, DiffError> {
    let p = tape.dot(anchor, pos)?;
    let n1 = tape.dot(anchor, neg1)?;
    let n2 = tape.dot(anchor, neg2)?;
    let negs = tape.add(n1, n2)?;
    let gap = tape.sub(negs, p)?;
    let shifted = tape.add_scalar(gap, margin)?;
    tape.hinge(shifted)
}

fn triplet_value(anchor: &[f64], pos: &[f64], neg1: &[f64], neg2: &[f64], margin: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let mut unit = |v: &[f64]| -> Result<Var, DiffError> {
        let x = tape.constant(Tensor::vector(v.to_vec()));
        tape.l2_normalize(x)
    };
    let (a, p, n1, n2) = (unit(anchor)?, unit(pos)?, unit(neg1)?, unit(neg2)?);
    let h = triplet_hinge(&mut tape, a, p, n1, n2, margin)?;
    Ok(tape.scalar(h))
}

/// Hinge pulling a reconstruction towards its own text embedding and away
/// from the two text embeddings of the other tower. All vectors are
/// L2-normalized first.
pub fn maxmargin_align(
    reconstructed: &[f64],
    own: &[f64],
    other_i: &[f64],
    other_j: &[f64],
    margin: f64,
) -> Result<f64> {
    triplet_value(reconstructed, own, other_i, other_j, margin)
}

/// Hinge keeping the embeddings of one entity from two reviews (`z_i`,
/// `z_j`) together while pushing `z_i` away from the other tower's two
/// embeddings. All vectors are L2-normalized first.
pub fn maxmargin_pair(z_i: &[f64], z_j: &[f64], other_i: &[f64], other_j: &[f64], margin: f64) -> Result<f64> {
    triplet_value(z_i, z_j, other_i, other_j, margin)
}

/// Mean squared residual of the anchor's `z_uᵀ z_i` against its rating.
pub fn mse_loss(batch: &[(PairEncodings, f64)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("mse over an empty batch"));
    }
    let total: f64 = batch
        .iter()
        .map(|(enc, rating)| {
            let pred: f64 = enc.z_user_i.iter().zip(&enc.z_item_i).map(|(a, b)| a * b).sum();
            (pred - rating).powi(2)
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Token indices and target of one training pair.
#[derive(Clone, Copy, Debug)]
pub struct PairInput<'a> {
    pub anchor: &'a [usize],
    pub companion: &'a [usize],
    pub rating: f64,
    pub kind: PairKind,
}

impl<'a> PairInput<'a> {
    pub fn from_pair(pair: &ReviewPair, reviews: &'a [EncodedReview]) -> Self {
        let anchor = &reviews[pair.anchor];
        Self {
            anchor: anchor.tokens(),
            companion: reviews[pair.companion].tokens(),
            rating: anchor.rating,
            kind: pair.kind,
        }
    }
}

/// Loss terms of one batch as tape variables.
#[derive(Clone, Copy, Debug)]
pub struct AsperaLossVars {
    pub total: Var,
    pub mse: Var,
    pub mm_align: Var,
    pub mm_pair: Var,
    pub ortho_user: Var,
    pub ortho_item: Var,
}

/// Plain values of the loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossValues {
    pub total: f64,
    pub mse: f64,
    pub mm_align: f64,
    pub mm_pair: f64,
    pub ortho_user: f64,
    pub ortho_item: f64,
}

impl LossValues {
    fn read(tape: &Tape, v: &AsperaLossVars) -> Self {
        Self {
            total: tape.scalar(v.total),
            mse: tape.scalar(v.mse),
            mm_align: tape.scalar(v.mm_align),
            mm_pair: tape.scalar(v.mm_pair),
            ortho_user: tape.scalar(v.ortho_user),
            ortho_item: tape.scalar(v.ortho_item),
        }
    }
}

/// `α_mse·mse + α_mm·(align + pair) + λ·(ortho(T_user) + ortho(T_item))`.
pub fn aspera_batch_loss(
    tape: &mut Tape,
    words: WordVectors<'_>,
    user: &TowerVars,
    item: &TowerVars,
    batch: &[PairInput<'_>],
    w: &LossWeights,
) -> Result<AsperaLossVars> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let mut mse_terms = Vec::with_capacity(batch.len());
    let mut align_terms = Vec::with_capacity(batch.len());
    let mut pair_terms = Vec::with_capacity(batch.len());
    for input in batch {
        let v = encode_pair_on_tape(tape, words, user, item, input.anchor, input.companion)?;

        let pred = tape.dot(v.user_i.text, v.item_i.text)?;
        let resid = tape.add_scalar(pred, -input.rating)?;
        mse_terms.push(tape.square(resid)?);

        let zu_i = tape.l2_normalize(v.user_i.text)?;
        let ru_i = tape.l2_normalize(v.user_i.reconstruction)?;
        let zi_i = tape.l2_normalize(v.item_i.text)?;
        let ri_i = tape.l2_normalize(v.item_i.reconstruction)?;
        let zu_j = tape.l2_normalize(v.user_j.text)?;
        let ru_j = tape.l2_normalize(v.user_j.reconstruction)?;
        let zi_j = tape.l2_normalize(v.item_j.text)?;
        let ri_j = tape.l2_normalize(v.item_j.reconstruction)?;

        let combos = [
            triplet_hinge(tape, ru_i, zu_i, zi_i, zi_j, w.margin)?,
            triplet_hinge(tape, ru_j, zu_j, zi_i, zi_j, w.margin)?,
            triplet_hinge(tape, ri_i, zi_i, zu_i, zu_j, w.margin)?,
            triplet_hinge(tape, ri_j, zi_j, zu_i, zu_j, w.margin)?,
        ];
        align_terms.push(tape.mean_all(&combos)?);

        pair_terms.push(match input.kind {
            PairKind::SameUser => triplet_hinge(tape, zu_i, zu_j, zi_i, zi_j, w.margin)?,
            PairKind::SameItem => triplet_hinge(tape, zi_i, zi_j, zu_i, zu_j, w.margin)?,
        });
    }
    let mse = tape.mean_all(&mse_terms)?;
    let mm_align = tape.mean_all(&align_terms)?;
    let mm_pair = tape.mean_all(&pair_terms)?;
    let ortho_user = ortho_penalty_on_tape(tape, user.aspects)?;
    let ortho_item = ortho_penalty_on_tape(tape, item.aspects)?;

    let mm = tape.add(mm_align, mm_pair)?;
    let ortho = tape.add(ortho_user, ortho_item)?;
    let parts = [
        tape.scale(mse, w.alpha_mse)?,
        tape.scale(mm, w.alpha_mm)?,
        tape.scale(ortho, w.ortho)?,
    ];
    let total = tape.add_all(&parts)?;
    Ok(AsperaLossVars {
        total,
        mse,
        mm_align,
        mm_pair,
        ortho_user,
        ortho_item,
    })
}

/// Loss terms of a batch under the current model, without gradients.
pub fn total_loss(model: &AsperaModel, batch: &[PairInput<'_>], weights: &LossWeights) -> Result<LossValues> {
    let mut tape = Tape::new();
    let user = model.user.bind(&mut tape);
    let item = model.item.bind(&mut tape);
    let words = WordVectors::Frozen(model.embeddings.matrix());
    let vars = aspera_batch_loss(&mut tape, words, &user, &item, batch, weights)?;
    Ok(LossValues::read(&tape, &vars))
}

/// Metrics written after every epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub total: f64,
    pub mse: f64,
    pub mm_align: f64,
    pub mm_pair: f64,
    pub ortho_u: f64,
    pub ortho_i: f64,
    /// Validation MSE of clamped predictions.
    pub val_mse: Option<f64>,
    /// Validation MSE of raw dot products.
    pub val_mse_raw: Option<f64>,
}

/// Mean squared error of clamped and raw predictions.
pub fn prediction_mse(model: &AsperaModel, reviews: &[EncodedReview]) -> Result<(f64, f64)> {
    if reviews.is_empty() {
        return Err(Error::invalid("mse over an empty review set"));
    }
    let (mut clamped, mut raw) = (0.0, 0.0);
    for r in reviews {
        let p = model.predict_raw(r)?;
        raw += (p - r.rating).powi(2);
        clamped += (clamp_rating(p) - r.rating).powi(2);
    }
    let n = reviews.len() as f64;
    Ok((clamped / n, raw / n))
}

/// Adam over both towers (and the word vectors when trainable).
pub struct Trainer {
    model: AsperaModel,
    config: AsperaTrainConfig,
    adam: Adam,
}

fn is_divergence(err: &Error) -> bool {
    matches!(err, Error::Diff(DiffError::NonFinite(_)))
}

impl Trainer {
    pub fn new(model: AsperaModel, config: AsperaTrainConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        let adam = Adam::new(config.learning_rate);
        Ok(Self { model, config, adam })
    }

    pub fn model(&self) -> &AsperaModel {
        &self.model
    }

    pub fn into_model(self) -> AsperaModel {
        self.model
    }

    /// One optimizer step on a batch; returns the loss terms before the update.
    pub fn step(&mut self, batch: &[PairInput<'_>]) -> Result<LossValues> {
        let weights = self.config.weights();
        let mut emb_matrix = self
            .config
            .train_embeddings
            .then(|| self.model.embeddings.matrix().clone());
        let mut tape = Tape::new();
        let emb_var = emb_matrix.as_ref().map(|m| tape.param(m.clone()));
        let words = match emb_var {
            Some(v) => WordVectors::Trainable(v),
            None => WordVectors::Frozen(self.model.embeddings.matrix()),
        };
        let user = self.model.user.bind(&mut tape);
        let item = self.model.item.bind(&mut tape);
        let vars = aspera_batch_loss(&mut tape, words, &user, &item, batch, &weights)?;
        let values = LossValues::read(&tape, &vars);
        if !values.total.is_finite() {
            return Err(DiffError::NonFinite("total loss").into());
        }
        let grads = tape.backward(vars.total)?;

        let mut grad_refs: Vec<&Tensor> = user
            .vars()
            .iter()
            .chain(item.vars().iter())
            .map(|v| grads.wrt(*v))
            .collect();
        let [ua, uw, ub, ut] = self.model.user.tensors_mut();
        let [ia, iw, ib, it] = self.model.item.tensors_mut();
        let mut params: Vec<&mut Tensor> = vec![ua, uw, ub, ut, ia, iw, ib, it];
        if let (Some(m), Some(v)) = (emb_matrix.as_mut(), emb_var) {
            params.push(m);
            grad_refs.push(grads.wrt(v));
        }
        self.adam.step(&mut params, &grad_refs);
        if let Some(mut m) = emb_matrix {
            m.row_mut(PAD).iter_mut().for_each(|x| *x = 0.0);
            self.model.embeddings.set_matrix(m)?;
        }
        Ok(values)
    }

    /// Full training run over `train`, scoring `validation` after every
    /// epoch. Stops early on a non-finite loss and keeps the parameters of
    /// the last completed epoch.
    pub fn fit(mut self, train: &[EncodedReview], validation: &[EncodedReview]) -> Result<TrainOutcome> {
        let train: Vec<EncodedReview> = train.iter().filter(|r| r.has_known_token()).cloned().collect();
        if train.is_empty() {
            return Err(Error::invalid("no trainable reviews"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let fixed_pairs = build_pairs(&train, self.config.seed);
        let mut log = Vec::with_capacity(self.config.epochs);
        let mut diverged = None;

        for epoch in 1..=self.config.epochs {
            let mut pairs = if self.config.regenerate_pairs {
                build_pairs(&train, self.config.seed.wrapping_add(epoch as u64))
            } else {
                fixed_pairs.clone()
            };
            pairs.shuffle(&mut rng);
            let snapshot = (self.model.clone(), self.adam.clone());
            let mut sums = LossValues::default();
            let mut batches = 0usize;
            let mut failed = false;
            for chunk in pairs.chunks(self.config.batch_size) {
                let batch: Vec<PairInput<'_>> = chunk.iter().map(|p| PairInput::from_pair(p, &train)).collect();
                match self.step(&batch) {
                    Ok(v) => {
                        sums.total += v.total;
                        sums.mse += v.mse;
                        sums.mm_align += v.mm_align;
                        sums.mm_pair += v.mm_pair;
                        sums.ortho_user += v.ortho_user;
                        sums.ortho_item += v.ortho_item;
                        batches += 1;
                    }
                    Err(e) if is_divergence(&e) => {
                        failed = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if failed
                || !self
                    .model
                    .user
                    .tensors()
                    .iter()
                    .chain(self.model.item.tensors().iter())
                    .all(|t| t.is_finite())
            {
                log::error!(
                    "non-finite loss in epoch {epoch}; keeping epoch {} parameters",
                    epoch - 1
                );
                (self.model, self.adam) = snapshot;
                diverged = Some(epoch);
                break;
            }
            let n = batches as f64;
            let (val_mse, val_mse_raw) = if validation.is_empty() {
                (None, None)
            } else {
                let (c, r) = prediction_mse(&self.model, validation)?;
                (Some(c), Some(r))
            };
            let metrics = EpochMetrics {
                epoch,
                total: sums.total / n,
                mse: sums.mse / n,
                mm_align: sums.mm_align / n,
                mm_pair: sums.mm_pair / n,
                ortho_u: sums.ortho_user / n,
                ortho_i: sums.ortho_item / n,
                val_mse,
                val_mse_raw,
            };
            let val = metrics.val_mse.map_or("-".to_string(), |v| format!("{v:.5}"));
            log::info!(
                "epoch {epoch}: total {:.5} mse {:.5} val_mse {val}",
                metrics.total,
                metrics.mse
            );
            log.push(metrics);
        }
        Ok(TrainOutcome {
            model: self.model,
            log,
            diverged,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: AsperaModel,
    pub log: Vec<EpochMetrics>,
    /// Epoch at which a non-finite loss stopped training.
    pub diverged: Option<usize>,
}

/// Initializes a model and trains it.
pub fn train(
    embeddings: EmbeddingTable,
    train: &[EncodedReview],
    validation: &[EncodedReview],
    config: &AsperaTrainConfig,
) -> Result<TrainOutcome> {
    let model = AsperaModel::init(embeddings, config)?;
    Trainer::new(model, config.clone())?.fit(train, validation)
}
