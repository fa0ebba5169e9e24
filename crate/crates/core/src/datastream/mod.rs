//! Episodic disjoint-class data streams.
//!
//! A stream is a list of [`EpisodeData`]: each episode carries a small
//! labeled set, a large unlabeled set and a held-out test set, all drawn from
//! classes that never appear in any other episode. Classes are assigned to
//! episodes in ascending id order.

mod file;
mod idx;
mod ledger;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;

pub use file::{load_file_stream, read_dataset, write_dataset, Dataset};
pub use idx::{convert_idx, read_idx_images, read_idx_labels, IdxImages};
pub use ledger::AnnotationLedger;

pub type ClassId = usize;
pub type SampleId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub features: Vec<f64>,
    pub true_label: ClassId,
    /// Set once the sample's label has been paid for.
    pub annotated: bool,
}

impl Sample {
    pub fn new(id: SampleId, features: Vec<f64>, true_label: ClassId) -> Self {
        Sample {
            id,
            features,
            true_label,
            annotated: false,
        }
    }

    pub fn annotated(mut self) -> Self {
        self.annotated = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeData {
    pub index: usize,
    /// Classes introduced by this episode, ascending.
    pub classes: Vec<ClassId>,
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Sample>,
    /// Exemplar set carried over from the previous episode (empty for episode 0).
    pub incoming_exemplars: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl EpisodeData {
    pub fn with_exemplars(mut self, exemplars: Vec<Sample>) -> Self {
        self.incoming_exemplars = exemplars;
        self
    }

    /// Classes of the incoming exemplar set, ascending.
    pub fn exemplar_classes(&self) -> Vec<ClassId> {
        let set: BTreeSet<ClassId> = self
            .incoming_exemplars
            .iter()
            .map(|s| s.true_label)
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Isotropic Gaussian classes. `num_classes` defaults to
    /// `num_episodes * classes_per_episode`.
    SyntheticGaussian {
        num_classes: Option<usize>,
        sigma: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub num_episodes: usize,
    pub classes_per_episode: usize,
    pub labeled_per_class: usize,
    pub unlabeled_per_class: usize,
    pub test_per_class: usize,
    /// Ignored for file sources, whose header fixes the dimension.
    pub feature_dim: usize,
    pub seed: u64,
    pub source: Source,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            num_episodes: 5,
            classes_per_episode: 2,
            labeled_per_class: 10,
            unlabeled_per_class: 200,
            test_per_class: 100,
            feature_dim: 8,
            seed: 0,
            source: Source::SyntheticGaussian {
                num_classes: None,
                sigma: 1.0,
            },
        }
    }
}

impl StreamConfig {
    pub fn classes_needed(&self) -> usize {
        self.num_episodes * self.classes_per_episode
    }

    pub fn samples_per_class(&self) -> usize {
        self.labeled_per_class + self.unlabeled_per_class + self.test_per_class
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("stream.num_episodes", self.num_episodes),
            ("stream.classes_per_episode", self.classes_per_episode),
            ("stream.labeled_per_class", self.labeled_per_class),
            ("stream.unlabeled_per_class", self.unlabeled_per_class),
            ("stream.test_per_class", self.test_per_class),
            ("stream.feature_dim", self.feature_dim),
        ];
        for (key, value) in counts {
            if value == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.labeled_per_class >= self.unlabeled_per_class {
            return Err(Error::config(
                "stream.labeled_per_class",
                format!(
                    "labeled set ({}) must be smaller than unlabeled set ({})",
                    self.labeled_per_class, self.unlabeled_per_class
                ),
            ));
        }
        if let Source::SyntheticGaussian { num_classes, sigma } = &self.source {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::config("stream.sigma", "must be positive"));
            }
            let available = num_classes.unwrap_or_else(|| self.classes_needed());
            if self.classes_needed() > available {
                return Err(Error::config(
                    "stream.classes_per_episode",
                    format!(
                        "{} episodes x {} classes = {} exceeds the {} classes available",
                        self.num_episodes,
                        self.classes_per_episode,
                        self.classes_needed(),
                        available
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Minimum pairwise distance between synthetic class means, in units of sigma.
pub const MIN_MEAN_SEPARATION: f64 = 4.0;

/// Places `count` class means in `dim` dimensions with pairwise distance at
/// least `MIN_MEAN_SEPARATION * sigma`, by seeded rejection sampling in a cube
/// that grows whenever placement stalls.
pub fn synthetic_class_means(count: usize, dim: usize, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let min_dist = MIN_MEAN_SEPARATION * sigma;
    let per_axis = (count.max(2) as f64).powf(1.0 / dim as f64).ceil();
    let mut half_width = min_dist * per_axis;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut stalled = 0;
    while means.len() < count {
        let candidate: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(-half_width..half_width))
            .collect();
        let ok = means
            .iter()
            .all(|m| squared_distance(m, &candidate) >= min_dist * min_dist);
        if ok {
            means.push(candidate);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 1000 {
                half_width *= 1.5;
                stalled = 0;
            }
        }
    }
    means
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Builds a synthetic Gaussian stream. Pure function of the config.
pub fn generate_synthetic_stream(config: &StreamConfig) -> Result<Vec<EpisodeData>> {
    config.validate()?;
    let (num_classes, sigma) = match &config.source {
        Source::SyntheticGaussian { num_classes, sigma } => (
            num_classes.unwrap_or_else(|| config.classes_needed()),
            *sigma,
        ),
        Source::File(_) => {
            return Err(Error::config(
                "stream.source",
                "generate_synthetic_stream requires the synthetic source",
            ))
        }
    };
    let dim = config.feature_dim;
    let means = synthetic_class_means(
        num_classes,
        dim,
        sigma,
        seed::derive(config.seed, seed::TAG_STREAM),
    );
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    let mut next_id: SampleId = 0;
    let mut draw = |class: ClassId, count: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        (0..count)
            .map(|_| {
                let features = means[class].iter().map(|m| m + noise.sample(rng)).collect();
                let sample = Sample::new(next_id, features, class);
                next_id += 1;
                sample
            })
            .collect::<Vec<_>>()
    };

    let mut episodes = Vec::with_capacity(config.num_episodes);
    for index in 0..config.num_episodes {
        let classes: Vec<ClassId> = (index * config.classes_per_episode
            ..(index + 1) * config.classes_per_episode)
            .collect();
        let mut episode = empty_episode(index, classes.clone());
        for &class in &classes {
            let mut rng = seed::rng(seed::derive(config.seed, class as u64));
            episode.labeled.extend(
                draw(class, config.labeled_per_class, &mut rng)
                    .into_iter()
                    .map(Sample::annotated),
            );
            episode
                .unlabeled
                .extend(draw(class, config.unlabeled_per_class, &mut rng));
            episode.test.extend(
                draw(class, config.test_per_class, &mut rng)
                    .into_iter()
                    .map(Sample::annotated),
            );
        }
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Dispatches on `config.source`.
pub fn build_stream(config: &StreamConfig) -> Result<Vec<EpisodeData>> {
    match &config.source {
        Source::SyntheticGaussian { .. } => generate_synthetic_stream(config),
        Source::File(path) => load_file_stream(path, config),
    }
}

fn empty_episode(index: usize, classes: Vec<ClassId>) -> EpisodeData {
    EpisodeData {
        index,
        classes,
        labeled: Vec::new(),
        unlabeled: Vec::new(),
        incoming_exemplars: Vec::new(),
        test: Vec::new(),
    }
}

/// Splits per-class sample pools into episodes. `pools[c]` holds class `c`'s
/// samples; each pool is shuffled with a class-specific seed before splitting.
pub(crate) fn split_into_episodes(
    mut pools: Vec<(ClassId, Vec<Sample>)>,
    config: &StreamConfig,
) -> Result<Vec<EpisodeData>> {
    pools.sort_by_key(|(class, _)| *class);
    if pools.len() < config.classes_needed() {
        return Err(Error::config(
            "stream.classes_per_episode",
            format!(
                "{} episodes x {} classes = {} exceeds the {} classes available",
                config.num_episodes,
                config.classes_per_episode,
                config.classes_needed(),
                pools.len()
            ),
        ));
    }
    let needed = config.samples_per_class();
    let mut episodes = Vec::with_capacity(config.num_episodes);
    let mut pools = pools.into_iter();
    for index in 0..config.num_episodes {
        let chunk: Vec<(ClassId, Vec<Sample>)> =
            pools.by_ref().take(config.classes_per_episode).collect();
        let mut episode = empty_episode(index, chunk.iter().map(|(c, _)| *c).collect());
        for (class, mut samples) in chunk {
            if samples.len() < needed {
                return Err(Error::config(
                    "stream.unlabeled_per_class",
                    format!(
                        "class {class} has {} samples but {needed} are required per class",
                        samples.len()
                    ),
                ));
            }
            let mut rng = seed::rng(seed::derive(config.seed, class as u64));
            samples.shuffle(&mut rng);
            let mut it = samples.into_iter();
            episode.labeled.extend(
                it.by_ref()
                    .take(config.labeled_per_class)
                    .map(Sample::annotated),
            );
            episode
                .unlabeled
                .extend(it.by_ref().take(config.unlabeled_per_class));
            episode
                .test
                .extend(it.take(config.test_per_class).map(Sample::annotated));
        }
        episodes.push(episode);
    }
    Ok(episodes)
}
