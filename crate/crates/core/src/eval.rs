//! Rating error against simple baselines, and PMI/NPMI topic coherence of
//! aspect word lists.
//!
//! Coherence uses document-level co-occurrence over a reference corpus of
//! `D` documents. With `P_w = df(w)/D` and `P_ab = codf(a, b)/D`:
//!
//! ```text
//! PMI(a, b)  = log((P_ab + ε/D) / (P_a · P_b))
//! NPMI(a, b) = PMI(a, b) / −log(P_ab + ε/D)
//! ```
//!
//! Words missing from the reference corpus get `P = ε/D`.

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::Serialize;

use crate::corpus::EncodedReview;
use crate::error::{Error, Result};
use crate::model::{prediction_mse, AsperaModel};

pub const COHERENCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MseReport {
    /// Predictions clamped to the rating range.
    pub clamped: f64,
    pub raw: f64,
}

pub fn evaluate_mse(model: &AsperaModel, test: &[EncodedReview]) -> Result<MseReport> {
    let (clamped, raw) = prediction_mse(model, test)?;
    Ok(MseReport { clamped, raw })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaselineMse {
    pub global_mean: f64,
    pub user_mean: f64,
    pub item_mean: f64,
}

fn group_means<'a>(train: &'a [EncodedReview], key: impl Fn(&'a EncodedReview) -> &'a str) -> HashMap<&'a str, f64> {
    let mut acc: HashMap<&str, (f64, usize)> = HashMap::new();
    for r in train {
        let e = acc.entry(key(r)).or_default();
        e.0 += r.rating;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Global, per-user and per-item mean predictors fit on `train` and scored
/// on `test`. Users or items unseen in training fall back to the global mean.
pub fn baseline_mse(train: &[EncodedReview], test: &[EncodedReview]) -> Result<BaselineMse> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("baselines need non-empty train and test sets"));
    }
    let global = train.iter().map(|r| r.rating).sum::<f64>() / train.len() as f64;
    let users = group_means(train, |r| r.user_id.as_str());
    let items = group_means(train, |r| r.item_id.as_str());
    let n = test.len() as f64;
    let score =
        |pred: &dyn Fn(&EncodedReview) -> f64| test.iter().map(|r| (pred(r) - r.rating).powi(2)).sum::<f64>() / n;
    Ok(BaselineMse {
        global_mean: score(&|_| global),
        user_mean: score(&|r| users.get(r.user_id.as_str()).copied().unwrap_or(global)),
        item_mean: score(&|r| items.get(r.item_id.as_str()).copied().unwrap_or(global)),
    })
}

/// Document and co-document frequencies over a reference corpus.
#[derive(Clone, Debug)]
pub struct CoherenceStats {
    postings: HashMap<String, Vec<u32>>,
    documents: usize,
    pub epsilon: f64,
}

impl CoherenceStats {
    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn df(&self, word: &str) -> usize {
        self.postings.get(word).map_or(0, Vec::len)
    }

    /// Number of documents containing both words.
    pub fn codf(&self, a: &str, b: &str) -> usize {
        let (Some(x), Some(y)) = (self.postings.get(a), self.postings.get(b)) else {
            return 0;
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    fn prob(&self, count: usize) -> f64 {
        count as f64 / self.documents as f64
    }

    /// `P_w`, or `ε/D` for words absent from the corpus.
    fn word_prob(&self, w: &str) -> f64 {
        match self.df(w) {
            0 => self.epsilon / self.documents as f64,
            n => self.prob(n),
        }
    }

    fn joint(&self, a: &str, b: &str) -> f64 {
        self.prob(self.codf(a, b)) + self.epsilon / self.documents as f64
    }

    pub fn pmi(&self, a: &str, b: &str) -> f64 {
        (self.joint(a, b) / (self.word_prob(a) * self.word_prob(b))).ln()
    }

    /// Clamped to `[-1, 1]`; defined as 1 when the smoothed joint
    /// probability reaches 1.
    pub fn npmi(&self, a: &str, b: &str) -> f64 {
        let joint = self.joint(a, b);
        if joint >= 1.0 {
            return 1.0;
        }
        (self.pmi(a, b) / -joint.ln()).clamp(-1.0, 1.0)
    }
}

/// Counts each word once per document.
pub fn build_coherence_stats<D, W>(reference: &[D]) -> Result<CoherenceStats>
where
    D: AsRef<[W]>,
    W: AsRef<str>,
{
    if reference.is_empty() {
        return Err(Error::invalid("coherence needs a non-empty reference corpus"));
    }
    let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
    for (d, doc) in reference.iter().enumerate() {
        let unique: HashSet<&str> = doc.as_ref().iter().map(|w| w.as_ref()).collect();
        for w in unique {
            postings.entry(w.to_string()).or_default().push(d as u32);
        }
    }
    Ok(CoherenceStats {
        postings,
        documents: reference.len(),
        epsilon: COHERENCE_EPS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceMetric {
    Pmi,
    Npmi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherenceScores {
    pub per_aspect: Vec<f64>,
    pub mean: f64,
}

/// Mean pairwise score over the first `top_n` words of each list, then the
/// mean over lists.
pub fn coherence<W: AsRef<str>>(
    stats: &CoherenceStats,
    word_lists: &[Vec<W>],
    top_n: usize,
    metric: CoherenceMetric,
) -> Result<CoherenceScores> {
    if top_n < 2 {
        return Err(Error::invalid("coherence needs top_n >= 2"));
    }
    if word_lists.is_empty() {
        return Err(Error::invalid("coherence needs at least one word list"));
    }
    let mut per_aspect = Vec::with_capacity(word_lists.len());
    for (k, list) in word_lists.iter().enumerate() {
        if list.len() < top_n {
            warn!("aspect {k} has {} words, fewer than top_n={top_n}", list.len());
        }
        let words: Vec<&str> = list.iter().take(top_n).map(|w| w.as_ref()).collect();
        if words.len() < 2 {
            return Err(Error::invalid(format!("aspect {k} has fewer than 2 words")));
        }
        let (mut sum, mut pairs) = (0.0, 0usize);
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                sum += match metric {
                    CoherenceMetric::Pmi => stats.pmi(words[i], words[j]),
                    CoherenceMetric::Npmi => stats.npmi(words[i], words[j]),
                };
                pairs += 1;
            }
        }
        per_aspect.push(sum / pairs as f64);
    }
    let mean = per_aspect.iter().sum::<f64>() / per_aspect.len() as f64;
    Ok(CoherenceScores { per_aspect, mean })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub pmi: f64,
    pub npmi: f64,
}

pub fn coherence_curve<W: AsRef<str>>(
    stats: &CoherenceStats,
    word_lists: &[Vec<W>],
    n_values: &[usize],
) -> Result<Vec<CurvePoint>> {
    n_values
        .iter()
        .map(|&n| {
            Ok(CurvePoint {
                n,
                pmi: coherence(stats, word_lists, n, CoherenceMetric::Pmi)?.mean,
                npmi: coherence(stats, word_lists, n, CoherenceMetric::Npmi)?.mean,
            })
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("n,pmi,npmi\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.n, p.pmi, p.npmi));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherenceRow {
    pub n: usize,
    pub pmi: CoherenceScores,
    pub npmi: CoherenceScores,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub test_mse: MseReport,
    pub baselines: BaselineMse,
    /// Coherence of each tower's aspect word lists, keyed by tower name.
    pub coherence: BTreeMap<String, Vec<CoherenceRow>>,
    /// Resolved configuration of the run that produced the report.
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-aspect PMI and NPMI at each `n`.
pub fn coherence_table<W: AsRef<str>>(
    stats: &CoherenceStats,
    word_lists: &[Vec<W>],
    n_values: &[usize],
) -> Result<Vec<CoherenceRow>> {
    n_values
        .iter()
        .map(|&n| {
            Ok(CoherenceRow {
                n,
                pmi: coherence(stats, word_lists, n, CoherenceMetric::Pmi)?,
                npmi: coherence(stats, word_lists, n, CoherenceMetric::Npmi)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(d: &[&str]) -> Vec<Vec<String>> {
        d.iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn single_document_counts() {
        let s = build_coherence_stats(&docs(&["a b b"])).unwrap();
        assert_eq!((s.df("a"), s.df("b"), s.codf("a", "b")), (1, 1, 1));
        assert_eq!(s.npmi("a", "b"), 1.0);
    }

    #[test]
    fn never_together() {
        let s = build_coherence_stats(&docs(&["a", "b"])).unwrap();
        assert_eq!(s.codf("a", "b"), 0);
        assert!(s.npmi("a", "b") < -0.9);
    }

    #[test]
    fn independent_words_have_zero_pmi() {
        let s = build_coherence_stats(&docs(&["a b", "a", "b", "c"])).unwrap();
        assert!(s.pmi("a", "b").abs() < 1e-10);
    }

    #[test]
    fn perfect_cooccurrence_approaches_one() {
        let s = build_coherence_stats(&docs(&["a b", "a b", "c", "c d"])).unwrap();
        assert!((s.npmi("a", "b") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top_n_validation() {
        let s = build_coherence_stats(&docs(&["a b"])).unwrap();
        assert!(coherence(&s, &[vec!["a", "b"]], 1, CoherenceMetric::Pmi).is_err());
        // Truncated to the two available words.
        let c = coherence(&s, &[vec!["a", "b"]], 5, CoherenceMetric::Npmi).unwrap();
        assert_eq!(c.per_aspect.len(), 1);
        assert!(coherence_curve(&s, &[vec!["a", "b"]], &[]).unwrap().is_empty());
    }

    #[test]
    fn csv_header() {
        let csv = curve_csv(&[CurvePoint {
            n: 5,
            pmi: 0.5,
            npmi: -0.25,
        }]);
        assert_eq!(csv, "n,pmi,npmi\n5,0.5,-0.25\n");
    }
}
