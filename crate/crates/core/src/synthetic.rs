//! Seeded generators for corpora with known structure.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Review;

/// Documents each drawn from one of several disjoint vocabularies.
#[derive(Clone, Debug)]
pub struct PlantedTopics {
    pub reviews: Vec<Review>,
    /// The words of each planted topic.
    pub topics: Vec<Vec<String>>,
    /// Topic of every document.
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub topics: usize,
    pub words_per_topic: usize,
    pub documents: usize,
    pub doc_len: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            topics: 4,
            words_per_topic: 50,
            documents: 2000,
            doc_len: 20,
            seed: 1,
        }
    }
}

pub fn planted_topics(config: &PlantedConfig) -> PlantedTopics {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topics: Vec<Vec<String>> = (0..config.topics)
        .map(|t| (0..config.words_per_topic).map(|w| format!("t{t}w{w}")).collect())
        .collect();
    let mut reviews = Vec::with_capacity(config.documents);
    let mut labels = Vec::with_capacity(config.documents);
    for d in 0..config.documents {
        let t = rng.gen_range(0..config.topics);
        let tokens = (0..config.doc_len)
            .map(|_| topics[t].choose(&mut rng).expect("non-empty topic").clone())
            .collect();
        reviews.push(Review {
            review_id: format!("d{d}"),
            user_id: format!("u{}", d % 50),
            item_id: format!("i{}", d % 70),
            rating: 1.0 + t as f64,
            tokens,
        });
        labels.push(t);
    }
    PlantedTopics {
        reviews,
        topics,
        labels,
    }
}

/// Greedily matches aspects to topics by largest top-word overlap (each
/// topic used at most once) and returns the mean fraction of an aspect's
/// words that belong to its matched topic. Unmatched aspects score 0.
pub fn matched_purity(aspect_words: &[Vec<String>], topics: &[Vec<String>]) -> f64 {
    if aspect_words.is_empty() {
        return 0.0;
    }
    let topic_sets: Vec<HashSet<&str>> = topics.iter().map(|t| t.iter().map(String::as_str).collect()).collect();
    let mut overlaps = Vec::new();
    for (a, words) in aspect_words.iter().enumerate() {
        for (t, set) in topic_sets.iter().enumerate() {
            let hits = words.iter().filter(|w| set.contains(w.as_str())).count();
            overlaps.push((hits, a, t));
        }
    }
    overlaps.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = HashSet::new();
    let mut used_t = HashSet::new();
    let mut total = 0.0;
    for (hits, a, t) in overlaps {
        if used_a.contains(&a) || used_t.contains(&t) {
            continue;
        }
        used_a.insert(a);
        used_t.insert(t);
        total += hits as f64 / aspect_words[a].len().max(1) as f64;
    }
    total / aspect_words.len() as f64
}

#[derive(Clone, Debug)]
pub struct LatentRatingConfig {
    pub users: usize,
    pub items: usize,
    pub reviews: usize,
    pub factors: usize,
    /// Words per factor and polarity.
    pub words_per_group: usize,
    pub filler_words: usize,
    pub review_len: usize,
    /// Share of tokens drawn from the filler vocabulary.
    pub filler_rate: f64,
    /// Half-width of uniform rating noise before rounding.
    pub noise: f64,
    pub seed: u64,
}

impl Default for LatentRatingConfig {
    fn default() -> Self {
        Self {
            users: 250,
            items: 250,
            reviews: 5000,
            factors: 4,
            words_per_group: 6,
            filler_words: 40,
            review_len: 30,
            filler_rate: 0.4,
            noise: 0.5,
            seed: 1,
        }
    }
}

/// Reviews whose ratings and words both come from latent user and item
/// factors `f_u, g_i ∈ [-1, 1]^K`.
///
/// With `h = f_u ⊙ g_i`, the rating is `3 + 1.5·Σh_k` plus noise, rounded
/// and clamped to 1..=5. Non-filler tokens pick factor `k` with probability
/// proportional to `|h_k|` and come from that factor's positive or
/// negative word group according to the sign of `h_k`.
pub fn latent_rating_corpus(config: &LatentRatingConfig) -> Vec<Review> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.factors;
    let mut factors = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    };
    let users = factors(config.users);
    let items = factors(config.items);
    let group = |f: usize, positive: bool, j: usize| format!("f{f}{}{j}", if positive { "p" } else { "n" });

    let mut out = Vec::with_capacity(config.reviews);
    let mut seen = HashSet::new();
    while out.len() < config.reviews {
        let u = rng.gen_range(0..config.users);
        let i = rng.gen_range(0..config.items);
        if !seen.insert((u, i)) {
            continue;
        }
        let h: Vec<f64> = users[u].iter().zip(&items[i]).map(|(a, b)| a * b).collect();
        let score: f64 = h.iter().sum();
        let noisy = 3.0 + 1.5 * score + rng.gen_range(-config.noise..=config.noise);
        let rating = noisy.round().clamp(1.0, 5.0);
        let weight: f64 = h.iter().map(|v| v.abs()).sum();
        let mut tokens = Vec::with_capacity(config.review_len);
        for _ in 0..config.review_len {
            if weight == 0.0 || rng.gen::<f64>() < config.filler_rate {
                tokens.push(format!("filler{}", rng.gen_range(0..config.filler_words)));
                continue;
            }
            let mut target = rng.gen::<f64>() * weight;
            let mut f = k - 1;
            for (idx, v) in h.iter().enumerate() {
                if target < v.abs() {
                    f = idx;
                    break;
                }
                target -= v.abs();
            }
            tokens.push(group(f, h[f] > 0.0, rng.gen_range(0..config.words_per_group)));
        }
        out.push(Review {
            review_id: format!("r{}", out.len()),
            user_id: format!("u{u}"),
            item_id: format!("i{i}"),
            rating,
            tokens,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_docs_use_one_topic() {
        let p = planted_topics(&PlantedConfig {
            documents: 50,
            ..PlantedConfig::default()
        });
        for (r, &t) in p.reviews.iter().zip(&p.labels) {
            assert!(r.tokens.iter().all(|w| p.topics[t].contains(w)));
        }
    }

    #[test]
    fn purity_of_exact_topics_is_one() {
        let p = planted_topics(&PlantedConfig::default());
        let lists: Vec<Vec<String>> = p.topics.iter().rev().map(|t| t[..10].to_vec()).collect();
        assert_eq!(matched_purity(&lists, &p.topics), 1.0);
        let mixed: Vec<Vec<String>> = vec![p.topics[0][..5].iter().chain(&p.topics[1][..5]).cloned().collect()];
        assert_eq!(matched_purity(&mixed, &p.topics), 0.5);
    }

    #[test]
    fn ratings_in_range_and_deterministic() {
        let cfg = LatentRatingConfig {
            reviews: 300,
            ..LatentRatingConfig::default()
        };
        let a = latent_rating_corpus(&cfg);
        assert_eq!(a.len(), 300);
        assert!(a.iter().all(|r| (1.0..=5.0).contains(&r.rating)));
        let b = latent_rating_corpus(&cfg);
        assert_eq!(a, b);
    }
}
