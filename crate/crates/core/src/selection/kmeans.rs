//! Entropy-weighted k-means partitioning.
//!
//! The pool is split into `B` clusters minimising
//! `sum_b sum_{x in X_b} I(x) * ||F(x) - c_b||^2`, with `c_b` the `I`-weighted
//! mean of cluster `b`. One representative per cluster is returned: the member
//! nearest the weighted mean.

use rand::Rng;

use crate::datastream::{squared_distance, SampleId};
use crate::error::{Error, Result};
use crate::seed;

pub const MAX_LLOYD_ITERATIONS: usize = 100;

/// Weighted mean of `points`; falls back to the plain mean when the weights sum
/// to zero.
pub fn weighted_mean(points: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; dim];
    if total > 0.0 {
        for (p, w) in points.iter().zip(weights) {
            for (m, v) in mean.iter_mut().zip(*p) {
                *m += w * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
    } else {
        for p in points {
            for (m, v) in mean.iter_mut().zip(*p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= points.len() as f64);
    }
    mean
}

/// `sum_x w(x) * ||x - c||^2` around the weighted mean `c`. If every weight is
/// zero the mean is unweighted and so is the sum.
pub fn weighted_variance(points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::contract("weighted variance of an empty partition"));
    }
    check_weights(points.len(), weights)?;
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let c = weighted_mean(&refs, weights);
    let all_zero = weights.iter().all(|w| *w == 0.0);
    Ok(points
        .iter()
        .zip(weights)
        .map(|(p, w)| if all_zero { 1.0 } else { *w } * squared_distance(p, &c))
        .sum())
}

/// Pairwise ("difference method") variance:
/// `1 / (2 |X|^2) * sum_{i,j} ||x_i - x_j||^2`.
pub fn pairwise_variance(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in points {
        for b in points {
            total += squared_distance(a, b);
        }
    }
    total / (2.0 * (n * n) as f64)
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != n {
        return Err(Error::contract(format!(
            "{} weights for {} points",
            weights.len(),
            n
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::contract("weights must be finite and non-negative"));
    }
    Ok(())
}

/// Draws an index with probability proportional to `mass`; `None` if all mass
/// is zero.
fn sample_proportional(mass: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let total: f64 = mass.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, m) in mass.iter().enumerate() {
        if *m <= 0.0 {
            continue;
        }
        acc += m;
        last = Some(i);
        if acc > target {
            return Some(i);
        }
    }
    last
}

/// Weighted k-means++ seeding: the first center is drawn with probability
/// proportional to `w(x)`, later ones proportional to `w(x) * D(x)^2`.
pub fn weighted_plus_plus(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = points.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k.min(n) {
        let mass: Vec<f64> = (0..n)
            .map(|i| {
                if is_chosen[i] {
                    0.0
                } else if chosen.is_empty() {
                    weights[i]
                } else {
                    weights[i] * nearest[i]
                }
            })
            .collect();
        let pick = sample_proportional(&mass, rng)
            .or_else(|| {
                // Remaining points carry no mass: fall back to their weights,
                // then to uniform.
                let by_weight: Vec<f64> = (0..n)
                    .map(|i| if is_chosen[i] { 0.0 } else { weights[i] })
                    .collect();
                sample_proportional(&by_weight, rng)
            })
            .or_else(|| {
                let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
                Some(free[rng.random_range(0..free.len())])
            })
            .expect("a free point exists");
        is_chosen[pick] = true;
        chosen.push(pick);
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(&points[i], &points[pick]));
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Objective after each Lloyd iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

pub fn objective(points: &[Vec<f64>], weights: &[f64], run: &KMeansRun) -> f64 {
    points
        .iter()
        .zip(weights)
        .zip(&run.assignments)
        .map(|((p, w), &a)| w * squared_distance(p, &run.centers[a]))
        .sum()
}

/// Lloyd iterations with weighted centroid updates, stopping when assignments
/// are stable or after [`MAX_LLOYD_ITERATIONS`]. Empty clusters are re-seeded
/// from the point with the largest weighted distance to its center (taken from
/// a cluster that keeps at least one member). Requires `k <= points.len()`.
pub fn weighted_kmeans(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    rng: &mut impl Rng,
) -> Result<KMeansRun> {
    if k == 0 {
        return Err(Error::contract("number of clusters must be at least 1"));
    }
    if points.is_empty() || k > points.len() {
        return Err(Error::contract(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    check_weights(points.len(), weights)?;
    let seeds = weighted_plus_plus(points, weights, k, rng);
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| points[i].clone()).collect();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        reseed_empty(points, weights, &mut assignments, &mut centers);
        for (j, center) in centers.iter_mut().enumerate() {
            let (members, member_weights): (Vec<&[f64]>, Vec<f64>) = points
                .iter()
                .zip(weights)
                .zip(&assignments)
                .filter(|(_, &a)| a == j)
                .map(|((p, w), _)| (p.as_slice(), *w))
                .unzip();
            if !members.is_empty() {
                *center = weighted_mean(&members, &member_weights);
            }
        }
        let run_objective: f64 = points
            .iter()
            .zip(weights)
            .zip(&assignments)
            .map(|((p, w), &a)| w * squared_distance(p, &centers[a]))
            .sum();
        trace.push(run_objective);

        if iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        let next: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Ok(KMeansRun {
        assignments,
        centers,
        objective_trace: trace,
        iterations,
    })
}

fn reseed_empty(
    points: &[Vec<f64>],
    weights: &[f64],
    assignments: &mut [usize],
    centers: &mut [Vec<f64>],
) {
    let k = centers.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[assignments[i]] >= 2)
            .map(|i| {
                let cost = weights[i] * squared_distance(&points[i], &centers[assignments[i]]);
                (i, cost)
            })
            .fold(None, |best: Option<(usize, f64)>, (i, cost)| match best {
                Some((_, bc)) if bc >= cost => best,
                _ => Some((i, cost)),
            });
        let Some((i, _)) = donor else {
            return;
        };
        assignments[i] = empty;
        centers[empty] = points[i].clone();
    }
}

/// Picks `budget` ids from the pool: the member nearest each weighted-k-means
/// cluster's weighted mean (ties by lowest id). Pools no larger than the
/// budget are returned whole.
pub fn weighted_kmeans_select(
    ids: &[SampleId],
    embeddings: &[Vec<f64>],
    weights: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<SampleId>> {
    if budget == 0 {
        return Err(Error::contract("selection budget must be at least 1"));
    }
    if ids.len() != embeddings.len() {
        return Err(Error::contract("ids and embeddings differ in length"));
    }
    if ids.len() <= budget {
        return Ok(ids.to_vec());
    }
    let mut rng = seed::rng(seed);
    let run = weighted_kmeans(embeddings, weights, budget, &mut rng)?;
    Ok(representatives(ids, embeddings, &run))
}

pub(crate) fn representatives(
    ids: &[SampleId],
    embeddings: &[Vec<f64>],
    run: &KMeansRun,
) -> Vec<SampleId> {
    let mut picks: Vec<Option<(SampleId, f64)>> = vec![None; run.centers.len()];
    for ((&id, e), &a) in ids.iter().zip(embeddings).zip(&run.assignments) {
        let d = squared_distance(e, &run.centers[a]);
        picks[a] = match picks[a] {
            Some((bid, bd)) if bd < d || (bd == d && bid < id) => Some((bid, bd)),
            _ => Some((id, d)),
        };
    }
    picks.into_iter().flatten().map(|(id, _)| id).collect()
}
