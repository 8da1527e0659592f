#![allow(dead_code)]

use std::sync::Arc;

use aspera::corpus::{encode_for_training, EncodedReview, Review, Vocabulary};
use aspera::diffcore::Tensor;
use aspera::embeddings::{train_sgns, EmbeddingTable, SgnsConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn review(id: usize, user: &str, item: &str, rating: f64, tokens: &[&str]) -> Review {
    Review {
        review_id: id.to_string(),
        user_id: user.to_string(),
        item_id: item.to_string(),
        rating,
        tokens: tokens.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn encoded(id: usize, user: &str, item: &str, rating: f64, tokens: Vec<usize>) -> EncodedReview {
    let n = tokens.len();
    EncodedReview {
        review_id: id.to_string(),
        user_id: user.to_string(),
        item_id: item.to_string(),
        rating,
        token_indices: tokens,
        mask: vec![true; n],
    }
}

/// Encoded reviews over `users × items` ids with random ratings and tokens.
pub fn random_encoded(n: usize, users: usize, items: usize, vocab: usize, seed: u64) -> Vec<EncodedReview> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..6);
            let toks = (0..len).map(|_| rng.gen_range(2..vocab)).collect();
            encoded(
                i,
                &format!("u{}", rng.gen_range(0..users)),
                &format!("i{}", rng.gen_range(0..items)),
                rng.gen_range(1..=5) as f64,
                toks,
            )
        })
        .collect()
}

pub fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Vocabulary with words `w0..w{n}` and a random table of width `d`.
pub fn random_table(words: usize, d: usize, seed: u64) -> EmbeddingTable {
    let tokens: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
    let r = Review {
        review_id: "0".into(),
        user_id: "u".into(),
        item_id: "i".into(),
        rating: 3.0,
        tokens,
    };
    let vocab = Arc::new(Vocabulary::build(&[r], 1).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = random_tensor(vocab.len(), d, 1.0, &mut rng);
    m.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
    EmbeddingTable::new(vocab, m).unwrap()
}

/// Vocabulary, SGNS table and encoded train/validation sets for a corpus.
pub struct Prepared {
    pub table: EmbeddingTable,
    pub train: Vec<EncodedReview>,
    pub validation: Vec<EncodedReview>,
    pub test: Vec<EncodedReview>,
}

pub fn prepare(split: &aspera::corpus::SplitCorpus, sgns: &SgnsConfig, seq_len: usize) -> Prepared {
    let vocab = Arc::new(Vocabulary::build(&split.train, 1).unwrap());
    let sentences: Vec<&[String]> = split.train.iter().map(|r| r.tokens.as_slice()).collect();
    let table = train_sgns(&sentences, vocab.clone(), sgns).unwrap();
    let enc = |rs: &[Review]| encode_for_training(rs, &vocab, seq_len).unwrap().0;
    Prepared {
        train: enc(&split.train),
        validation: enc(&split.validation),
        test: enc(&split.test),
        table,
    }
}

/// Prints the one-line verdict for an acceptance criterion and fails the
/// test when it does not hold.
pub fn verdict(criterion: &str, pass: bool, detail: impl AsRef<str>) {
    println!(
        "{} {criterion}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    assert!(pass, "{criterion}: {}", detail.as_ref());
}
