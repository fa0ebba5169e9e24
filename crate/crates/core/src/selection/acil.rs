use std::collections::BTreeMap;

use super::budget::{per_class_budgets, split_budget, BudgetSplit};
use super::kmeans::weighted_kmeans_select;
use super::{group_by, pseudo_label, ExemplarSet, Origin, PseudoLabelSource, SelectionContext};
use crate::classifier::{entropy, ModelParams};
use crate::datastream::{ClassId, Sample};
use crate::error::Result;
use crate::seed;

/// Lower bound on uncertainty weights so weighted means stay defined when the
/// model is fully confident.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Prediction entropy of each sample, floored at [`ENTROPY_FLOOR`].
pub fn uncertainty_weights(model: &ModelParams, samples: &[&Sample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| Ok(entropy(&model.predict_proba(s)?)?.max(ENTROPY_FLOOR)))
        .collect()
}

const SIDE_UNLABELED: u64 = 1 << 40;
const SIDE_EXEMPLAR: u64 = 2 << 40;

/// Budget plan for the episode: split `k` by class counts, then per class,
/// moving budget one side cannot place to the other side.
fn plan(
    k: usize,
    episode_classes: &[ClassId],
    exemplar_classes: &[ClassId],
    unlabeled_avail: &BTreeMap<ClassId, usize>,
    exemplar_avail: &BTreeMap<ClassId, usize>,
) -> BudgetSplit {
    let mut split = split_budget(k, episode_classes.len(), exemplar_classes.len());
    let place = |total, classes: &[ClassId], avail| per_class_budgets(total, classes, avail);
    split.per_class_unlabeled = place(split.k_unlabeled, episode_classes, unlabeled_avail);
    split.per_class_exemplar = place(split.k_exemplar, exemplar_classes, exemplar_avail);
    let placed_u: usize = split.per_class_unlabeled.values().sum();
    let placed_e: usize = split.per_class_exemplar.values().sum();
    let short_u = split.k_unlabeled - placed_u;
    let short_e = split.k_exemplar - placed_e;
    if short_u > 0 && short_e == 0 {
        split.per_class_exemplar =
            place(split.k_exemplar + short_u, exemplar_classes, exemplar_avail);
    } else if short_e > 0 && short_u == 0 {
        split.per_class_unlabeled = place(
            split.k_unlabeled + short_e,
            episode_classes,
            unlabeled_avail,
        );
    }
    split
}

/// Selects the next exemplar set from the unlabeled set (grouped by
/// pseudo-label) and the incoming exemplars (grouped by label). Within each
/// class, members are chosen by entropy-weighted k-means on the model's
/// embeddings. The labeled set is never drawn from.
pub fn acil_select(ctx: &SelectionContext<'_>) -> Result<ExemplarSet> {
    ctx.validate()?;
    let episode = ctx.episode;
    let episode_classes = ctx.episode_classes();
    let exemplar_classes = episode.exemplar_classes();

    let labeler = match (ctx.pseudo_labels, ctx.snapshot) {
        (PseudoLabelSource::Previous, Some(snapshot)) => snapshot.params(),
        _ => ctx.model,
    };
    let labels = pseudo_label(labeler, &episode.unlabeled, &episode_classes)?;
    let unlabeled_groups = group_by(&episode.unlabeled, |s| labels[&s.id]);
    let exemplar_groups = group_by(&episode.incoming_exemplars, |s| s.true_label);
    let sizes = |groups: &BTreeMap<ClassId, Vec<usize>>| {
        groups
            .iter()
            .map(|(c, members)| (*c, members.len()))
            .collect::<BTreeMap<_, _>>()
    };
    let split = plan(
        ctx.budget,
        &episode_classes,
        &exemplar_classes,
        &sizes(&unlabeled_groups),
        &sizes(&exemplar_groups),
    );

    let mut chosen: Vec<(Sample, Origin)> = Vec::new();
    let sides = [
        (
            &episode.unlabeled,
            &unlabeled_groups,
            &split.per_class_unlabeled,
            Origin::Unlabeled,
            SIDE_UNLABELED,
        ),
        (
            &episode.incoming_exemplars,
            &exemplar_groups,
            &split.per_class_exemplar,
            Origin::Exemplar,
            SIDE_EXEMPLAR,
        ),
    ];
    for (pool, groups, budgets, origin, side) in sides {
        for (class, &budget) in budgets {
            let Some(members) = groups.get(class) else {
                continue;
            };
            if budget == 0 {
                continue;
            }
            let samples: Vec<&Sample> = members.iter().map(|&i| &pool[i]).collect();
            let ids: Vec<_> = samples.iter().map(|s| s.id).collect();
            let embeddings = samples
                .iter()
                .map(|s| ctx.model.embed(s))
                .collect::<Result<Vec<_>>>()?;
            let weights = uncertainty_weights(ctx.model, &samples)?;
            let class_seed = seed::derive(ctx.seed, side | *class as u64);
            let picked = weighted_kmeans_select(&ids, &embeddings, &weights, budget, class_seed)?;
            for id in picked {
                let sample = samples
                    .iter()
                    .find(|s| s.id == id)
                    .expect("selected id comes from the pool");
                chosen.push(((*sample).clone(), origin));
            }
        }
    }
    ExemplarSet::from_members(chosen)
}
