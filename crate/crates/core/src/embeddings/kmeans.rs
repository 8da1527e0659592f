use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Centroids {
    /// `k × d`
    pub centroids: Tensor,
    pub assignments: Vec<usize>,
    /// Sum of squared distances of points to their assigned centroid.
    pub objective: f64,
    /// Objective after each assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn distinct_rows(points: &Tensor) -> usize {
    let mut seen = HashSet::new();
    for r in 0..points.rows() {
        seen.insert(points.row(r).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    seen.len()
}

/// k-means++ seeding: first centre uniform, the rest sampled with
/// probability proportional to squared distance from the chosen set.
pub fn kmeanspp_seeds(points: &Tensor, k: usize, rng: &mut impl Rng) -> Tensor {
    let n = points.rows();
    let mut centers = Tensor::zeros(k, points.cols());
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(chosen));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(chosen)));
        }
    }
    centers
}

/// Lloyd iterations from the given centres until assignments stop changing
/// or `max_iters` assignment steps have run. A centre that loses all its
/// points jumps to the point farthest from its current centre.
pub fn lloyd(points: &Tensor, init: Tensor, max_iters: usize) -> Centroids {
    let (n, d, k) = (points.rows(), points.cols(), init.rows());
    let mut centroids = init;
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        let mut dists = Vec::with_capacity(n);
        for i in 0..n {
            let (c, dist) = nearest(points.row(i), &centroids);
            next.push(c);
            dists.push(dist);
        }
        history.push(dists.iter().sum());
        if next == assignments {
            break;
        }
        assignments = next;

        let mut sums = Tensor::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("non-empty point set");
                centroids.row_mut(c).copy_from_slice(points.row(far));
                dists[far] = 0.0;
            }
        }
    }
    let objective = assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), centroids.row(c)))
        .sum();
    Centroids {
        centroids,
        assignments,
        objective,
        history,
        iterations,
    }
}

fn validate(points: &Tensor, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if points.rows() < k {
        return Err(Error::invalid(format!(
            "k-means with k={k} needs at least k points, got {}",
            points.rows()
        )));
    }
    let distinct = distinct_rows(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k-means with k={k} but only {distinct} distinct points"
        )));
    }
    Ok(())
}

/// Best of `restarts` k-means++ seeded Lloyd runs.
pub fn kmeans_with_restarts(
    points: &Tensor,
    k: usize,
    max_iters: usize,
    seed: u64,
    restarts: usize,
) -> Result<Centroids> {
    validate(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Centroids> = None;
    for _ in 0..restarts.max(1) {
        let init = kmeanspp_seeds(points, k, &mut rng);
        let run = lloyd(points, init, max_iters);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding with 10 restarts, keeping the lowest objective.
pub fn kmeans(points: &Tensor, k: usize, max_iters: usize, seed: u64) -> Result<Centroids> {
    kmeans_with_restarts(points, k, max_iters, seed, 10)
}
