use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::Review;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Word ↔ index mapping. Index 0 is padding and index 1 the unknown word;
/// retained words start at 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps words seen at least `min_count` times, ordered by descending
    /// frequency and then lexicographically.
    pub fn build(reviews: &[Review], min_count: u64) -> Result<Self> {
        if reviews.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from zero reviews"));
        }
        if min_count == 0 {
            return Err(Error::invalid("min_count must be at least 1"));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for review in reviews {
            for token in &review.tokens {
                *freq.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_entries(kept.into_iter().map(|(w, c)| (w.to_owned(), c))))
    }

    fn from_entries(entries: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut words = vec![PAD_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        let mut counts = vec![0, 0];
        for (w, c) in entries {
            words.push(w);
            counts.push(c);
        }
        let index = words.iter().enumerate().skip(2).map(|(i, w)| (w.clone(), i)).collect();
        Self { words, counts, index }
    }

    /// Total rows including the two reserved indices.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real_len() == 0
    }

    /// Number of retained words.
    pub fn real_len(&self) -> usize {
        self.words.len() - 2
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn index_or_unk(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK)
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    /// Retained words with their indices.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.words.iter().enumerate().skip(2).map(|(i, w)| (i, w.as_str()))
    }

    /// One `word<TAB>index<TAB>count` line per retained word.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, w) in self.iter() {
            writeln!(out, "{w}\t{i}\t{}", self.counts[i])?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(|e| Error::io(path, e))?;
        crate::checkpoint::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [word, index, count] = fields[..] else {
                return Err(Error::format(path, n + 1, "expected word<TAB>index<TAB>count"));
            };
            let index: usize = index.parse().map_err(|_| Error::format(path, n + 1, "bad index"))?;
            let count: u64 = count.parse().map_err(|_| Error::format(path, n + 1, "bad count"))?;
            if index != entries.len() + 2 {
                return Err(Error::format(
                    path,
                    n + 1,
                    format!("index {index} out of sequence, expected {}", entries.len() + 2),
                ));
            }
            entries.push((word.to_owned(), count));
        }
        let vocab = Self::from_entries(entries);
        if vocab.index.len() != vocab.real_len() {
            return Err(Error::format(path, 0, "duplicate words"));
        }
        Ok(vocab)
    }
}
