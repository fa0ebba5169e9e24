use std::collections::BTreeMap;

use crate::datastream::ClassId;

/// How the exemplar budget `k` is divided between the episode's unlabeled set
/// and the incoming exemplar set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BudgetSplit {
    pub k_unlabeled: usize,
    pub k_exemplar: usize,
    pub per_class_unlabeled: BTreeMap<ClassId, usize>,
    pub per_class_exemplar: BTreeMap<ClassId, usize>,
}

/// Splits `k` in proportion to the class counts on each side:
/// `k_unlabeled = round(k * |C_episode| / (|C_episode| + |C_exemplar|))`,
/// rounding halves up, and `k_exemplar = k - k_unlabeled`.
pub fn split_budget(k: usize, episode_classes: usize, exemplar_classes: usize) -> BudgetSplit {
    let total = episode_classes + exemplar_classes;
    let k_unlabeled = if total == 0 {
        k
    } else {
        (2 * k * episode_classes + total) / (2 * total)
    };
    BudgetSplit {
        k_unlabeled,
        k_exemplar: k - k_unlabeled,
        ..BudgetSplit::default()
    }
}

/// Spreads `total` over `classes` by water-filling: classes that cannot hold
/// an even share keep everything they have, the rest split what is left
/// evenly, and the remainder goes one each to the classes with the most
/// available samples (ties by ascending id). Budget that no class can hold is
/// dropped.
pub fn per_class_budgets(
    total: usize,
    classes: &[ClassId],
    available: &BTreeMap<ClassId, usize>,
) -> BTreeMap<ClassId, usize> {
    let avail = |c: &ClassId| available.get(c).copied().unwrap_or(0);
    let mut budgets: BTreeMap<ClassId, usize> = classes.iter().map(|&c| (c, 0)).collect();
    let mut by_avail: Vec<ClassId> = budgets.keys().copied().collect();
    by_avail.sort_by(|a, b| avail(a).cmp(&avail(b)).then(a.cmp(b)));

    let mut remaining = total;
    let mut open = by_avail.as_slice();
    while let Some((&class, rest)) = open.split_first() {
        let fair = remaining / open.len();
        if avail(&class) > fair {
            break;
        }
        budgets.insert(class, avail(&class));
        remaining -= avail(&class);
        open = rest;
    }
    if open.is_empty() {
        return budgets;
    }
    let base = remaining / open.len();
    let extra = remaining % open.len();
    let mut largest_first = open.to_vec();
    largest_first.sort_by(|a, b| avail(b).cmp(&avail(a)).then(a.cmp(b)));
    for (rank, class) in largest_first.iter().enumerate() {
        budgets.insert(*class, base + usize::from(rank < extra));
    }
    budgets
}
