//! Exemplar selection: the entropy-weighted partitioning strategy and the
//! comparison strategies, behind [`select`].

mod acil;
mod baselines;
mod budget;
mod kmeans;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::classifier::{argmax_class, ModelParams, ModelSnapshot};
use crate::datastream::{ClassId, EpisodeData, Sample, SampleId};
use crate::error::{Error, Result};

pub use acil::{acil_select, uncertainty_weights, ENTROPY_FLOOR};
pub use baselines::{
    badge_select, baseline_select, coreset_select, gdumb_balance, gradient_embedding, herding,
    k_center_greedy, rainbow_uncertainty, RAINBOW_COPIES, RAINBOW_NOISE_FRACTION,
};
pub use budget::{per_class_budgets, split_budget, BudgetSplit};
pub use kmeans::{
    objective, pairwise_variance, weighted_kmeans, weighted_kmeans_select, weighted_mean,
    weighted_plus_plus, weighted_variance, KMeansRun, MAX_LLOYD_ITERATIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Acil,
    Random,
    Coreset,
    Badge,
    Icarl,
    Gdumb,
    Rainbow,
    Finetuning,
}

/// Which labels a strategy pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelingMode {
    /// Pays for the labeled set plus the unlabeled samples it selects.
    Active,
    /// Pays for the whole episode up front.
    FullAnnotation,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Acil,
        Strategy::Random,
        Strategy::Coreset,
        Strategy::Badge,
        Strategy::Icarl,
        Strategy::Gdumb,
        Strategy::Rainbow,
        Strategy::Finetuning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Acil => "acil",
            Strategy::Random => "random",
            Strategy::Coreset => "coreset",
            Strategy::Badge => "badge",
            Strategy::Icarl => "icarl",
            Strategy::Gdumb => "gdumb",
            Strategy::Rainbow => "rainbow",
            Strategy::Finetuning => "finetuning",
        }
    }

    pub fn labeling(self) -> LabelingMode {
        match self {
            Strategy::Acil | Strategy::Random | Strategy::Coreset | Strategy::Badge => {
                LabelingMode::Active
            }
            Strategy::Icarl | Strategy::Gdumb | Strategy::Rainbow | Strategy::Finetuning => {
                LabelingMode::FullAnnotation
            }
        }
    }

    /// Finetuning keeps training the previous episode's model; the others
    /// start from a fresh model unless configured otherwise.
    pub fn warm_starts(self) -> bool {
        self == Strategy::Finetuning
    }

    pub fn keeps_exemplars(self) -> bool {
        self != Strategy::Finetuning
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "strategy",
                    format!(
                        "unknown strategy {s:?}; expected one of {}",
                        Strategy::ALL.map(Strategy::as_str).join(", ")
                    ),
                )
            })
    }
}

/// Model used to pseudo-label the unlabeled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoLabelSource {
    /// The model trained in the current episode.
    #[default]
    Current,
    /// The previous episode's snapshot (falls back to the current model when
    /// there is none).
    Previous,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub episode: &'a EpisodeData,
    pub model: &'a ModelParams,
    pub snapshot: Option<&'a ModelSnapshot>,
    pub budget: usize,
    pub seed: u64,
    pub pseudo_labels: PseudoLabelSource,
}

impl SelectionContext<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        Ok(())
    }

    /// Classes of the current episode, read off the labeled set.
    pub fn episode_classes(&self) -> Vec<ClassId> {
        let mut classes: Vec<ClassId> = self.episode.labeled.iter().map(|s| s.true_label).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}

/// Where an exemplar came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Unlabeled,
    Exemplar,
    Labeled,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Unlabeled => "from-unlabeled",
            Origin::Exemplar => "from-exemplar",
            Origin::Labeled => "from-labeled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarMember {
    pub sample: Sample,
    pub origin: Origin,
}

/// Fixed-budget labeled set carried into the next episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExemplarSet {
    pub members: Vec<ExemplarMember>,
}

impl ExemplarSet {
    /// Builds a set from `(sample, origin)` pairs, marking every member
    /// annotated and rejecting duplicate ids.
    pub fn from_members(members: impl IntoIterator<Item = (Sample, Origin)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (mut sample, origin) in members {
            if !seen.insert(sample.id) {
                return Err(Error::contract(format!(
                    "sample {} selected twice",
                    sample.id
                )));
            }
            sample.annotated = true;
            out.push(ExemplarMember { sample, origin });
        }
        Ok(ExemplarSet { members: out })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> Vec<SampleId> {
        self.members.iter().map(|m| m.sample.id).collect()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.members.iter().filter(|m| m.origin == origin).count()
    }

    pub fn ids_from(&self, origin: Origin) -> Vec<SampleId> {
        self.members
            .iter()
            .filter(|m| m.origin == origin)
            .map(|m| m.sample.id)
            .collect()
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.members.iter().map(|m| m.sample.clone()).collect()
    }
}

/// Argmax of the model's prediction restricted to `classes`, ties by lowest
/// class id.
pub fn pseudo_label(
    model: &ModelParams,
    samples: &[Sample],
    classes: &[ClassId],
) -> Result<BTreeMap<SampleId, ClassId>> {
    if !classes.iter().any(|c| model.class_index(*c).is_some()) {
        return Err(Error::contract(
            "pseudo-labelling model has none of the episode's classes",
        ));
    }
    samples
        .iter()
        .map(|s| {
            let logits = model.logits(s)?;
            let label = argmax_class(model.classes(), &logits, |c| classes.contains(&c))
                .expect("at least one allowed class");
            Ok((s.id, label))
        })
        .collect()
}

/// Runs `strategy` on the context.
pub fn select(strategy: Strategy, ctx: &SelectionContext<'_>) -> Result<ExemplarSet> {
    match strategy {
        Strategy::Acil => acil_select(ctx),
        Strategy::Finetuning => Ok(ExemplarSet::default()),
        other => baseline_select(other, ctx),
    }
}

/// Groups sample indices by a label function, classes ascending.
pub(crate) fn group_by<T>(
    items: &[T],
    label: impl Fn(&T) -> ClassId,
) -> BTreeMap<ClassId, Vec<usize>> {
    let mut groups: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(label(item)).or_default().push(i);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_ids_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!(matches!(
            "bogus".parse::<Strategy>(),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn uniform_model_pseudo_labels_lowest_episode_class() {
        let model = ModelParams::zeros(2, 0, vec![0, 1, 2, 3]).unwrap();
        let xs: Vec<Sample> = (0..4)
            .map(|i| Sample::new(i, vec![i as f64, 1.0], 2))
            .collect();
        let labels = pseudo_label(&model, &xs, &[2, 3]).unwrap();
        assert!(labels.values().all(|&l| l == 2));
    }

    #[test]
    fn pseudo_labels_stay_in_episode_classes() {
        let mut model = ModelParams::zeros(1, 0, vec![0, 1, 2]).unwrap();
        // Class 0 dominates everywhere, but is not an episode class.
        model.b2 = vec![10.0, 0.0, 1.0];
        let xs = vec![Sample::new(0, vec![0.5], 1)];
        let labels = pseudo_label(&model, &xs, &[1, 2]).unwrap();
        assert_eq!(labels[&0], 2);
        assert!(pseudo_label(&model, &xs, &[7]).is_err());
    }

    #[test]
    fn exemplar_set_rejects_duplicates() {
        let s = Sample::new(1, vec![0.0], 0);
        assert!(
            ExemplarSet::from_members([(s.clone(), Origin::Unlabeled), (s, Origin::Exemplar)])
                .is_err()
        );
    }
}
