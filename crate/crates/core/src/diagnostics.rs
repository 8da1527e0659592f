//! Finite-difference checks of the training losses on small random
//! instances, grouped by parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abae::{abae_batch_loss, ContextMode, TowerVars, WordVectors};
use crate::corpus::PairKind;
use crate::diffcore::{gradient_check, DiffError, GradCheckReport, Tensor};
use crate::error::{Error, Result};
use crate::model::{aspera_batch_loss, LossWeights, PairInput};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

const DIM: usize = 8;
const ASPECTS: usize = 3;
const WORDS: usize = 20;
const TOWER_GROUPS: [&str; 4] = ["attention", "projection", "bias", "aspects"];

/// Worst relative error of one parameter group across all instances.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub kinks: usize,
    pub failures: usize,
}

impl GroupCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape matches data")
}

fn random_tower(rng: &mut impl Rng) -> [Tensor; 4] {
    [
        random_tensor(DIM, DIM, 0.5, rng),
        random_tensor(ASPECTS, DIM, 1.0, rng),
        random_tensor(ASPECTS, 1, 0.5, rng),
        random_tensor(ASPECTS, DIM, 1.0, rng),
    ]
}

fn random_table(rng: &mut impl Rng) -> Tensor {
    let mut t = random_tensor(WORDS + 2, DIM, 1.0, rng);
    t.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
    t
}

fn random_seq(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(2..WORDS + 2)).collect()
}

fn into_diff(e: Error) -> DiffError {
    match e {
        Error::Diff(d) => d,
        other => panic!("loss construction failed: {other}"),
    }
}

fn accumulate(groups: &mut [GroupCheck], report: &GradCheckReport) {
    for (g, p) in groups.iter_mut().zip(&report.params) {
        g.max_rel_error = g.max_rel_error.max(p.max_rel_error);
        g.checked += p.checked;
        g.kinks += p.nondifferentiable;
    }
    for f in &report.failures {
        groups[f.param].failures += 1;
    }
}

fn groups(names: impl IntoIterator<Item = String>) -> Vec<GroupCheck> {
    names
        .into_iter()
        .map(|name| GroupCheck {
            name,
            max_rel_error: 0.0,
            checked: 0,
            kinks: 0,
            failures: 0,
        })
        .collect()
}

/// Reconstruction loss of a batch of 6 reviews against 2 negatives, with the
/// embedding table trainable.
pub fn check_abae(seeds: u64) -> Result<Vec<GroupCheck>> {
    let mut out = groups(
        TOWER_GROUPS
            .iter()
            .map(|g| format!("abae.{g}"))
            .chain(["abae.embeddings".to_string()]),
    );
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<Tensor> = random_tower(&mut rng).into();
        params.push(random_table(&mut rng));
        let docs: Vec<Vec<usize>> = (0..8).map(|_| random_seq(rng.gen_range(2..6), &mut rng)).collect();
        let report = gradient_check(
            |tape, vars| {
                let tower = TowerVars::from_vars(&vars[0..4], ContextMode::Mean);
                let batch: Vec<&[usize]> = docs[..6].iter().map(Vec::as_slice).collect();
                let negs: Vec<&[usize]> = docs[6..].iter().map(Vec::as_slice).collect();
                let loss = abae_batch_loss(tape, WordVectors::Trainable(vars[4]), &tower, &batch, &negs, 1.0, 0.1)
                    .map_err(into_diff)?;
                Ok(loss.total)
            },
            &params,
            STEP,
            TOLERANCE,
        )?;
        accumulate(&mut out, &report);
    }
    Ok(out)
}

/// Full rating loss on a batch of two pairs (one per pair kind) with
/// sequences of length 6.
pub fn check_aspera(seeds: u64) -> Result<Vec<GroupCheck>> {
    let names = ["user", "item"]
        .iter()
        .flat_map(|t| TOWER_GROUPS.iter().map(move |g| format!("aspera.{t}.{g}")));
    let mut out = groups(names);
    let weights = LossWeights {
        alpha_mse: 1.0,
        alpha_mm: 1.0,
        ortho: 0.1,
        margin: 1.0,
    };
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_table(&mut rng);
        let mut params: Vec<Tensor> = random_tower(&mut rng).into();
        params.extend(random_tower(&mut rng));
        let seqs: Vec<Vec<usize>> = (0..4).map(|_| random_seq(6, &mut rng)).collect();
        let ratings = [rng.gen_range(1..=5) as f64, rng.gen_range(1..=5) as f64];
        let report = gradient_check(
            |tape, vars| {
                let user = TowerVars::from_vars(&vars[0..4], ContextMode::Mean);
                let item = TowerVars::from_vars(&vars[4..8], ContextMode::Mean);
                let batch = [
                    PairInput {
                        anchor: &seqs[0],
                        companion: &seqs[1],
                        rating: ratings[0],
                        kind: PairKind::SameUser,
                    },
                    PairInput {
                        anchor: &seqs[2],
                        companion: &seqs[3],
                        rating: ratings[1],
                        kind: PairKind::SameItem,
                    },
                ];
                let loss = aspera_batch_loss(tape, WordVectors::Frozen(&table), &user, &item, &batch, &weights)
                    .map_err(into_diff)?;
                Ok(loss.total)
            },
            &params,
            STEP,
            TOLERANCE,
        )?;
        accumulate(&mut out, &report);
    }
    Ok(out)
}
