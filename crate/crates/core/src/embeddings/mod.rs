//! Word-embedding tables: SGNS training, pretrained text vectors, k-means
//! over rows and cosine nearest-neighbour queries.

mod kmeans;
mod sgns;

pub use kmeans::{kmeans, kmeans_with_restarts, kmeanspp_seeds, lloyd, Centroids};
pub use sgns::{train_sgns, ProbePair, SgnsConfig, SgnsTrainer};

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Vocabulary, PAD, UNK};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// `|V| × d` matrix aligned with a vocabulary. Row [`PAD`] stays zero.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    vocab: Arc<Vocabulary>,
    matrix: Tensor,
}

impl EmbeddingTable {
    pub fn new(vocab: Arc<Vocabulary>, matrix: Tensor) -> Result<Self> {
        if matrix.rows() != vocab.len() {
            return Err(Error::invalid(format!(
                "embedding matrix has {} rows for a vocabulary of {}",
                matrix.rows(),
                vocab.len()
            )));
        }
        if matrix.cols() < 2 {
            return Err(Error::invalid("embedding dimension must be at least 2"));
        }
        if matrix.row(PAD).iter().any(|v| *v != 0.0) {
            return Err(Error::invalid("padding row must be zero"));
        }
        Ok(Self { vocab, matrix })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.matrix.row(index)
    }

    /// Rows of the retained words only (no padding/unknown).
    pub fn word_rows(&self) -> Tensor {
        let d = self.dim();
        let mut data = Vec::with_capacity(self.vocab.real_len() * d);
        for (i, _) in self.vocab.iter() {
            data.extend_from_slice(self.row(i));
        }
        Tensor::from_vec(self.vocab.real_len(), d, data).expect("row count matches")
    }

    /// Replaces the matrix after training. The padding row is forced back
    /// to zero.
    pub fn set_matrix(&mut self, mut matrix: Tensor) -> Result<()> {
        if matrix.shape() != self.matrix.shape() {
            return Err(Error::invalid("embedding matrix shape changed"));
        }
        matrix.row_mut(PAD).iter_mut().for_each(|v| *v = 0.0);
        self.matrix = matrix;
        Ok(())
    }

    /// Text format: a `count dim` header, then `word v1 ... vd` per retained
    /// word.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vocab.real_len(), self.dim());
        for (i, w) in self.vocab.iter() {
            out.push_str(w);
            for v in self.row(i) {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::checkpoint::write_atomic(path, self.to_text().as_bytes())
    }
}

/// How many vocabulary words a pretrained file covered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coverage {
    pub found: usize,
    pub missing: usize,
}

fn is_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Loads `word v1 ... vd` vectors for the words of `vocab`. Words missing
/// from the file get uniform values in `[-0.5/d, 0.5/d]`; the unknown row
/// is the mean of the loaded rows.
pub fn load_text_embeddings(path: &Path, vocab: Arc<Vocabulary>, seed: u64) -> Result<(EmbeddingTable, Coverage)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    let mut dim: Option<usize> = None;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (n == 0 && is_header(line)) {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(word) = fields.next() else { continue };
        let values: Vec<f64> = fields
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, n + 1, "non-numeric vector component"))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    path,
                    n + 1,
                    format!("dimension {} differs from {}", values.len(), d),
                ))
            }
            _ => {}
        }
        if let Some(i) = vocab.get(word) {
            rows[i] = Some(values);
        }
    }
    let d = dim.ok_or_else(|| Error::invalid(format!("{}: no vectors", path.display())))?;
    if d < 2 {
        return Err(Error::invalid("embedding dimension must be at least 2"));
    }
    let found = rows.iter().filter(|r| r.is_some()).count();
    if found == 0 {
        return Err(Error::invalid(format!(
            "{}: no overlap with the vocabulary",
            path.display()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / d as f64;
    let mut matrix = Tensor::zeros(vocab.len(), d);
    let mut mean = vec![0.0; d];
    for (i, _) in vocab.iter() {
        let dst = matrix.row_mut(i);
        match &rows[i] {
            Some(v) => {
                dst.copy_from_slice(v);
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x / found as f64;
                }
            }
            None => dst.iter_mut().for_each(|x| *x = rng.gen_range(-bound..=bound)),
        }
    }
    matrix.row_mut(UNK).copy_from_slice(&mean);
    let coverage = Coverage {
        found,
        missing: vocab.real_len() - found,
    };
    Ok((EmbeddingTable::new(vocab, matrix)?, coverage))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub word: String,
    pub similarity: f64,
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Top-`n` retained words by cosine similarity to `query`, ties broken by
/// lower index. `n` is capped at the vocabulary size.
pub fn nearest_words(table: &EmbeddingTable, query: &[f64], n: usize) -> Result<Vec<Neighbor>> {
    if query.len() != table.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, table has {}",
            query.len(),
            table.dim()
        )));
    }
    let mut scored: Vec<(usize, f64)> = table
        .vocab
        .iter()
        .map(|(i, _)| (i, cosine(query, table.row(i))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    Ok(scored
        .into_iter()
        .map(|(index, similarity)| Neighbor {
            index,
            word: table.vocab.word(index).to_owned(),
            similarity,
        })
        .collect())
}
