//! Comparison strategies. Random, Coreset and BADGE draw only from the
//! unlabeled set; iCaRL, GDumb and Rainbow see the whole annotated episode
//! plus the incoming exemplars.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::budget::per_class_budgets;
use super::{group_by, ExemplarSet, Origin, SelectionContext, Strategy};
use crate::classifier::ModelParams;
use crate::datastream::{squared_distance, ClassId, Sample};
use crate::error::{Error, Result};
use crate::seed;

/// Perturbed copies per sample for Rainbow's uncertainty estimate.
pub const RAINBOW_COPIES: usize = 10;
/// Perturbation standard deviation as a fraction of each feature's spread.
pub const RAINBOW_NOISE_FRACTION: f64 = 0.05;

pub fn baseline_select(strategy: Strategy, ctx: &SelectionContext<'_>) -> Result<ExemplarSet> {
    ctx.validate()?;
    let mut rng = seed::rng(seed::derive(ctx.seed, seed::TAG_SELECT));
    match strategy {
        Strategy::Random => {
            let pool = &ctx.episode.unlabeled;
            let picks = index::sample(&mut rng, pool.len(), ctx.budget.min(pool.len())).into_vec();
            from_pool(pool, picks, Origin::Unlabeled)
        }
        Strategy::Coreset => coreset_select(ctx, &mut rng),
        Strategy::Badge => badge_select(ctx, &mut rng),
        Strategy::Icarl | Strategy::Gdumb | Strategy::Rainbow => {
            let candidates = full_candidates(ctx);
            let labels: Vec<ClassId> = candidates.iter().map(|(s, _)| s.true_label).collect();
            let picks = match strategy {
                Strategy::Icarl => icarl_picks(ctx, &candidates, &labels)?,
                Strategy::Gdumb => gdumb_balance(&labels, ctx.budget, &mut rng),
                _ => rainbow_picks(ctx, &candidates, &labels, &mut rng)?,
            };
            ExemplarSet::from_members(
                picks
                    .into_iter()
                    .map(|i| (candidates[i].0.clone(), candidates[i].1)),
            )
        }
        Strategy::Acil | Strategy::Finetuning => Err(Error::config(
            "strategy",
            format!("{strategy} is not a baseline selection strategy"),
        )),
    }
}

fn from_pool(pool: &[Sample], picks: Vec<usize>, origin: Origin) -> Result<ExemplarSet> {
    ExemplarSet::from_members(picks.into_iter().map(|i| (pool[i].clone(), origin)))
}

fn full_candidates<'a>(ctx: &SelectionContext<'a>) -> Vec<(&'a Sample, Origin)> {
    let ep = ctx.episode;
    ep.labeled
        .iter()
        .map(|s| (s, Origin::Labeled))
        .chain(ep.unlabeled.iter().map(|s| (s, Origin::Unlabeled)))
        .chain(ep.incoming_exemplars.iter().map(|s| (s, Origin::Exemplar)))
        .collect()
}

fn embed_all(model: &ModelParams, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| model.embed(s)).collect()
}

/// Greedy k-center: repeatedly take the point farthest from everything
/// covered so far (ties by lowest index). With nothing pre-covered the first
/// point is drawn uniformly.
pub fn k_center_greedy(
    points: &[Vec<f64>],
    covered: &[Vec<f64>],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = points.len();
    let k = k.min(n);
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| {
            covered
                .iter()
                .map(|c| squared_distance(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    while chosen.len() < k {
        let pick = if chosen.is_empty() && covered.is_empty() {
            rng.random_range(0..n)
        } else {
            (0..n)
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if nearest[b] >= nearest[i] => Some(b),
                    _ => Some(i),
                })
                .expect("fewer picks than points")
        };
        taken[pick] = true;
        chosen.push(pick);
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(&points[i], &points[pick]));
        }
    }
    chosen
}

pub fn coreset_select(ctx: &SelectionContext<'_>, rng: &mut impl Rng) -> Result<ExemplarSet> {
    let pool = &ctx.episode.unlabeled;
    let points = embed_all(ctx.model, pool)?;
    let covered = embed_all(ctx.model, &ctx.episode.labeled)?;
    let picks = k_center_greedy(&points, &covered, ctx.budget, rng);
    from_pool(pool, picks, Origin::Unlabeled)
}

/// Output-layer gradient embedding `(p - onehot(argmax p)) (x) F(x)`, class
/// major.
pub fn gradient_embedding(model: &ModelParams, sample: &Sample) -> Result<Vec<f64>> {
    let embedding = model.embed(sample)?;
    let mut p = model.predict_proba(sample)?;
    let predicted = model.predict(sample)?;
    let row = model
        .class_index(predicted)
        .expect("prediction is a model class");
    p[row] -= 1.0;
    Ok(p.iter()
        .flat_map(|g| embedding.iter().map(move |e| g * e))
        .collect())
}

/// BADGE: k-means++ seeding on gradient embeddings, starting from the
/// largest-norm embedding.
pub fn badge_select(ctx: &SelectionContext<'_>, rng: &mut impl Rng) -> Result<ExemplarSet> {
    let pool = &ctx.episode.unlabeled;
    let grads = pool
        .iter()
        .map(|s| gradient_embedding(ctx.model, s))
        .collect::<Result<Vec<_>>>()?;
    let n = grads.len();
    let k = ctx.budget.min(n);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let pick = if chosen.is_empty() {
            let norms: Vec<f64> = grads
                .iter()
                .map(|g| g.iter().map(|v| v * v).sum())
                .collect();
            (0..n)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if norms[b] >= norms[i] => Some(b),
                    _ => Some(i),
                })
                .expect("nonempty pool")
        } else {
            let mass: Vec<f64> = (0..n)
                .map(|i| if taken[i] { 0.0 } else { nearest[i] })
                .collect();
            let total: f64 = mass.iter().sum();
            if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, m) in mass.iter().enumerate() {
                    if *m > 0.0 {
                        acc += m;
                        pick = Some(i);
                        if acc > target {
                            break;
                        }
                    }
                }
                pick.expect("positive mass")
            } else {
                (0..n).find(|&i| !taken[i]).expect("free point")
            }
        };
        taken[pick] = true;
        chosen.push(pick);
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(&grads[i], &grads[pick]));
        }
    }
    from_pool(pool, chosen, Origin::Unlabeled)
}

/// iCaRL herding: greedily add the point that keeps the running mean of the
/// chosen set closest to the mean of all points (ties by lowest index).
pub fn herding(embeddings: &[Vec<f64>], budget: usize) -> Vec<usize> {
    let n = embeddings.len();
    if n == 0 || budget == 0 {
        return Vec::new();
    }
    let dim = embeddings[0].len();
    let mut mu = vec![0.0; dim];
    for e in embeddings {
        for (m, v) in mu.iter_mut().zip(e) {
            *m += v / n as f64;
        }
    }
    let mut sum = vec![0.0; dim];
    let mut chosen = Vec::with_capacity(budget.min(n));
    let mut taken = vec![false; n];
    while chosen.len() < budget.min(n) {
        let count = (chosen.len() + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let d: f64 = (0..dim)
                .map(|j| {
                    let diff = mu[j] - (sum[j] + embeddings[i][j]) / count;
                    diff * diff
                })
                .sum();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (pick, _) = best.expect("free point");
        taken[pick] = true;
        for (s, v) in sum.iter_mut().zip(&embeddings[pick]) {
            *s += v;
        }
        chosen.push(pick);
    }
    chosen
}

fn icarl_picks(
    ctx: &SelectionContext<'_>,
    candidates: &[(&Sample, Origin)],
    labels: &[ClassId],
) -> Result<Vec<usize>> {
    let groups = group_by(labels, |c| *c);
    let classes: Vec<ClassId> = groups.keys().copied().collect();
    let avail: BTreeMap<ClassId, usize> = groups.iter().map(|(c, m)| (*c, m.len())).collect();
    let budgets = per_class_budgets(ctx.budget, &classes, &avail);
    let mut picks = Vec::new();
    for (class, members) in &groups {
        let embeddings = members
            .iter()
            .map(|&i| ctx.model.embed(candidates[i].0))
            .collect::<Result<Vec<_>>>()?;
        picks.extend(
            herding(&embeddings, budgets[class])
                .into_iter()
                .map(|j| members[j]),
        );
    }
    Ok(picks)
}

/// GDumb balancing: repeatedly draw a random sample of the least represented
/// class that still has candidates (ties by lowest class id).
pub fn gdumb_balance(labels: &[ClassId], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut remaining = group_by(labels, |c| *c);
    let mut counts: BTreeMap<ClassId, usize> = remaining.keys().map(|c| (*c, 0)).collect();
    let mut picks = Vec::with_capacity(k.min(labels.len()));
    while picks.len() < k {
        let Some(class) = remaining
            .iter()
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, _)| *c)
            .min_by_key(|c| (counts[c], *c))
        else {
            break;
        };
        let members = remaining.get_mut(&class).expect("class present");
        let i = rng.random_range(0..members.len());
        picks.push(members.swap_remove(i));
        *counts.get_mut(&class).expect("class present") += 1;
    }
    picks
}

/// Variance, across perturbed copies, of the model's top-class probability.
/// Copies add Gaussian noise with per-feature standard deviation
/// `RAINBOW_NOISE_FRACTION * feature_std[j]`.
pub fn rainbow_uncertainty(
    model: &ModelParams,
    samples: &[&Sample],
    feature_std: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    samples
        .iter()
        .map(|s| {
            let mut tops = Vec::with_capacity(RAINBOW_COPIES);
            for _ in 0..RAINBOW_COPIES {
                let noisy: Vec<f64> = s
                    .features
                    .iter()
                    .zip(feature_std)
                    .map(|(x, sd)| x + RAINBOW_NOISE_FRACTION * sd * unit.sample(rng))
                    .collect();
                let p = model.predict_proba_features(&noisy)?;
                tops.push(p.iter().cloned().fold(0.0, f64::max));
            }
            let mean = tops.iter().sum::<f64>() / tops.len() as f64;
            Ok(tops.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / tops.len() as f64)
        })
        .collect()
}

fn feature_std(samples: &[&Sample]) -> Vec<f64> {
    let n = samples.len() as f64;
    let dim = samples.first().map_or(0, |s| s.features.len());
    (0..dim)
        .map(|j| {
            let mean = samples.iter().map(|s| s.features[j]).sum::<f64>() / n;
            (samples
                .iter()
                .map(|s| (s.features[j] - mean).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        })
        .collect()
}

/// Rainbow memory: class-balanced budgets; within a class, samples sorted by
/// uncertainty are cut into as many contiguous strata as the class budget and
/// one random member is taken from each stratum.
fn rainbow_picks(
    ctx: &SelectionContext<'_>,
    candidates: &[(&Sample, Origin)],
    labels: &[ClassId],
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let all: Vec<&Sample> = candidates.iter().map(|(s, _)| *s).collect();
    let std = feature_std(&all);
    let uncertainty = rainbow_uncertainty(ctx.model, &all, &std, rng)?;
    let groups = group_by(labels, |c| *c);
    let classes: Vec<ClassId> = groups.keys().copied().collect();
    let avail: BTreeMap<ClassId, usize> = groups.iter().map(|(c, m)| (*c, m.len())).collect();
    let budgets = per_class_budgets(ctx.budget, &classes, &avail);
    let mut picks = Vec::new();
    for (class, members) in &groups {
        let b = budgets[class];
        if b == 0 {
            continue;
        }
        let mut ordered = members.clone();
        ordered.sort_by(|&a, &c| {
            uncertainty[a]
                .total_cmp(&uncertainty[c])
                .then(all[a].id.cmp(&all[c].id))
        });
        let n = ordered.len();
        for s in 0..b {
            let (lo, hi) = (s * n / b, (s + 1) * n / b);
            picks.push(ordered[rng.random_range(lo..hi)]);
        }
    }
    Ok(picks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gdumb_balances_two_classes() {
        let labels: Vec<ClassId> = (0..100).map(|i| i % 2).collect();
        let picks = gdumb_balance(&labels, 10, &mut seed::rng(0));
        let zeros = picks.iter().filter(|&&i| labels[i] == 0).count();
        assert_eq!(zeros, 5);
        assert_eq!(picks.len(), 10);
    }

    #[test]
    fn gdumb_exhausts_small_classes() {
        let labels = vec![0, 1, 1, 1, 1, 1, 2];
        let picks = gdumb_balance(&labels, 5, &mut seed::rng(1));
        let count = |c| picks.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!((count(0), count(1), count(2)), (1, 3, 1));
    }

    #[test]
    fn herding_first_pick_is_nearest_to_mean() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![4.0, 0.0],
            vec![1.5, 0.2],
            vec![0.0, 3.0],
        ];
        let mu = [5.5 / 4.0, 3.2 / 4.0];
        let oracle = (0..pts.len())
            .min_by(|&a, &b| {
                squared_distance(&pts[a], &mu).total_cmp(&squared_distance(&pts[b], &mu))
            })
            .unwrap();
        let order = herding(&pts, 4);
        assert_eq!(order[0], oracle);
        let mut all = order.clone();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_center_respects_covered_points() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        let picks = k_center_greedy(&pts, &[vec![0.0]], 1, &mut seed::rng(0));
        assert_eq!(picks, vec![2]);
    }

    #[test]
    fn gradient_embedding_shape() {
        let model = ModelParams::init(3, 4, vec![0, 1, 2], &mut seed::rng(0)).unwrap();
        let g = gradient_embedding(&model, &Sample::new(0, vec![1.0, 0.0, -1.0], 0)).unwrap();
        assert_eq!(g.len(), 12);
    }

    #[test]
    fn rainbow_uncertainty_is_zero_without_noise() {
        let model = ModelParams::init(2, 3, vec![0, 1], &mut seed::rng(0)).unwrap();
        let s = Sample::new(0, vec![0.3, 0.1], 0);
        let u = rainbow_uncertainty(&model, &[&s], &[0.0, 0.0], &mut seed::rng(1)).unwrap();
        assert_eq!(u, vec![0.0]);
        let u = rainbow_uncertainty(&model, &[&s], &[5.0, 5.0], &mut seed::rng(1)).unwrap();
        assert!(u[0] > 0.0);
    }
}
