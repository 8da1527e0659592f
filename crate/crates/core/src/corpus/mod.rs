//! Review ingestion, vocabulary, fixed-length encoding, splits and the
//! same-user / same-item review pairs that drive joint training.

mod pairs;
mod tokenize;
mod vocab;

pub use pairs::{build_pairs, PairKind, ReviewPair};
pub use tokenize::{Tokenizer, ENGLISH_STOPWORDS};
pub use vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Review {
    pub review_id: String,
    pub user_id: String,
    pub item_id: String,
    /// Star rating in `[1, 5]`.
    pub rating: f64,
    pub tokens: Vec<String>,
}

impl Review {
    /// Amazon-style JSON line. Tokens are joined with spaces, so ingesting
    /// the line again reproduces them.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "review_id": self.review_id,
            "reviewerID": self.user_id,
            "asin": self.item_id,
            "overall": self.rating,
            "reviewText": self.tokens.join(" "),
        })
        .to_string()
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub reviews: Vec<Review>,
    /// Lines that were not JSON or lacked a required field.
    pub malformed: usize,
    /// Valid lines whose text was empty after tokenization.
    pub empty: usize,
}

/// Parses one Amazon 5-core record. `None` means the line is malformed.
fn parse_record(line: &str) -> Option<(Option<String>, String, String, f64, String)> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    let user = obj.get("reviewerID")?.as_str()?.to_owned();
    let item = obj.get("asin")?.as_str()?.to_owned();
    let rating = obj.get("overall")?.as_f64()?;
    let text = obj.get("reviewText")?.as_str()?.to_owned();
    let id = obj.get("review_id").and_then(Value::as_str).map(str::to_owned);
    (1.0..=5.0).contains(&rating).then_some((id, user, item, rating, text))
}

/// Reads Amazon 5-core JSON lines (`reviewerID`, `asin`, `overall`,
/// `reviewText`). Reviews without an explicit `review_id` get their
/// 1-based line number as id.
pub fn ingest_json_lines(path: &Path, tokenizer: &Tokenizer) -> Result<IngestReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, user_id, item_id, rating, body)) = parse_record(line) else {
            report.malformed += 1;
            continue;
        };
        let tokens = tokenizer.tokenize(&body);
        if tokens.is_empty() {
            report.empty += 1;
            continue;
        }
        let review_id = id.unwrap_or_else(|| (n + 1).to_string());
        if !seen.insert(review_id.clone()) {
            return Err(Error::format(path, n + 1, format!("duplicate review id {review_id}")));
        }
        report.reviews.push(Review {
            review_id,
            user_id,
            item_id,
            rating,
            tokens,
        });
    }
    if report.malformed > 0 {
        warn!("{}: skipped {} malformed lines", path.display(), report.malformed);
    }
    if report.reviews.is_empty() {
        return Err(Error::invalid(format!("{}: no valid reviews", path.display())));
    }
    Ok(report)
}

/// A review as a fixed-length index sequence. Real tokens form a prefix;
/// the rest is padding with mask `false`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedReview {
    pub review_id: String,
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub token_indices: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncodedReview {
    /// Indices of the unmasked positions.
    pub fn tokens(&self) -> &[usize] {
        &self.token_indices[..self.real_len()]
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|m| **m).count()
    }

    /// False when every kept token is out of vocabulary; such reviews are
    /// left out of training batches.
    pub fn has_known_token(&self) -> bool {
        self.tokens().iter().any(|&t| t != UNK)
    }
}

pub fn encode_review(review: &Review, vocab: &Vocabulary, seq_len: usize) -> Result<EncodedReview> {
    if seq_len == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    if review.tokens.is_empty() {
        return Err(Error::invalid(format!("review {} has no tokens", review.review_id)));
    }
    let mut token_indices: Vec<usize> = review
        .tokens
        .iter()
        .take(seq_len)
        .map(|t| vocab.index_or_unk(t))
        .collect();
    let real = token_indices.len();
    token_indices.resize(seq_len, PAD);
    let mask = (0..seq_len).map(|i| i < real).collect();
    Ok(EncodedReview {
        review_id: review.review_id.clone(),
        user_id: review.user_id.clone(),
        item_id: review.item_id.clone(),
        rating: review.rating,
        token_indices,
        mask,
    })
}

/// Encodes every review, dropping (and counting) those without a single
/// in-vocabulary token.
pub fn encode_for_training(
    reviews: &[Review],
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<(Vec<EncodedReview>, usize)> {
    let mut out = Vec::with_capacity(reviews.len());
    let mut flagged = 0;
    for r in reviews {
        let e = encode_review(r, vocab, seq_len)?;
        if e.has_known_token() {
            out.push(e);
        } else {
            flagged += 1;
        }
    }
    Ok((out, flagged))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitCorpus {
    pub train: Vec<Review>,
    pub validation: Vec<Review>,
    pub test: Vec<Review>,
    pub seed: u64,
}

/// Sizes `(train, validation, test)`: 10% test, then 10% of the remainder
/// for validation, each rounded to the nearest review.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let test = (n as f64 * 0.1).round() as usize;
    let rest = n - test;
    let validation = (rest as f64 * 0.1).round() as usize;
    (rest - validation, validation, test)
}

/// Random 90/10 train/test split, then 10% of train held out for
/// validation. Each part keeps the input order of its members.
pub fn split_corpus(reviews: Vec<Review>, seed: u64) -> Result<SplitCorpus> {
    let n = reviews.len();
    if n < 10 {
        return Err(Error::invalid(format!("need at least 10 reviews to split, got {n}")));
    }
    let (_, n_val, n_test) = split_sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // 0 = train, 1 = validation, 2 = test
    let mut part = vec![0u8; n];
    for &i in &order[..n_test] {
        part[i] = 2;
    }
    for &i in &order[n_test..n_test + n_val] {
        part[i] = 1;
    }
    let mut split = SplitCorpus {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (review, p) in reviews.into_iter().zip(part) {
        match p {
            0 => split.train.push(review),
            1 => split.validation.push(review),
            _ => split.test.push(review),
        }
    }
    Ok(split)
}
