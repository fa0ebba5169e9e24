//! Compact multinomial classifier: a linear softmax model or a one-hidden-layer
//! ReLU MLP, with the embedding taken from the hidden layer.

mod checkpoint;
mod loss;
mod train;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::datastream::{ClassId, Sample};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{
    class_weights, distillation_loss, entropy, loss_and_gradient, softmax, weighted_ce_loss,
    DistillTerm, Gradients,
};
pub use train::{
    train_episode, AlphaMode, ModelInit, Optimizer, TrainConfig, TrainOutcome, TrainingSet,
};

/// Model parameters. Matrices are row-major; output row `r` scores
/// `classes[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    input_dim: usize,
    hidden: usize,
    classes: Vec<ClassId>,
    /// `hidden x input_dim`
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// `classes x embed_dim`
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeros(input_dim: usize, hidden: usize, classes: Vec<ClassId>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::contract("input dimension must be positive"));
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::contract("duplicate class ids in model"));
        }
        let embed_dim = if hidden == 0 { input_dim } else { hidden };
        Ok(ModelParams {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; classes.len() * embed_dim],
            b2: vec![0.0; classes.len()],
            classes,
        })
    }

    /// He-initialised hidden layer, `N(0, 1/embed_dim)` output layer, zero biases.
    pub fn init(
        input_dim: usize,
        hidden: usize,
        classes: Vec<ClassId>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut model = Self::zeros(input_dim, hidden, classes)?;
        if hidden > 0 {
            let he = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).unwrap();
            model.w1.iter_mut().for_each(|w| *w = he.sample(rng));
        }
        let out = Normal::new(0.0, (1.0 / model.embed_dim() as f64).sqrt()).unwrap();
        model.w2.iter_mut().for_each(|w| *w = out.sample(rng));
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn embed_dim(&self) -> usize {
        if self.hidden == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, class: ClassId) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    pub fn is_finite(&self) -> bool {
        self.parameters()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Parameter tensors in `[w1, b1, w2, b2]` order, matching the fields of
    /// [`Gradients`].
    pub fn parameters(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn parameters_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Adds zero output rows for classes not yet covered and returns their row
    /// indices. Existing rows are untouched, so old-class logits are unchanged.
    pub fn widen(&mut self, classes: &[ClassId]) -> Vec<usize> {
        let mut added = Vec::new();
        for &class in classes {
            if self.class_index(class).is_none() {
                added.push(self.classes.len());
                self.classes.push(class);
                self.w2.extend(std::iter::repeat_n(0.0, self.embed_dim()));
                self.b2.push(0.0);
            }
        }
        added
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim {
            return Err(Error::contract(format!(
                "feature dimension {} does not match model input dimension {}",
                features.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations (empty for the linear model).
    pub(crate) fn pre_activation(&self, features: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                self.b1[j] + dot(row, features)
            })
            .collect()
    }

    pub(crate) fn embed_unchecked(&self, features: &[f64]) -> Vec<f64> {
        if self.hidden == 0 {
            features.to_vec()
        } else {
            self.pre_activation(features)
                .into_iter()
                .map(|a| a.max(0.0))
                .collect()
        }
    }

    pub(crate) fn logits_from_embedding(&self, embedding: &[f64]) -> Vec<f64> {
        let m = self.embed_dim();
        (0..self.classes.len())
            .map(|r| self.b2[r] + dot(&self.w2[r * m..(r + 1) * m], embedding))
            .collect()
    }

    pub fn embed_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(self.embed_unchecked(features))
    }

    pub fn logits_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(self.logits_from_embedding(&self.embed_unchecked(features)))
    }

    pub fn predict_proba_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits_features(features)?))
    }

    /// Last-hidden-layer activation, or the raw features for the linear model.
    pub fn embed(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.embed_features(&sample.features)
    }

    pub fn logits(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.logits_features(&sample.features)
    }

    /// Class probabilities in [`classes`](Self::classes) order.
    pub fn predict_proba(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.predict_proba_features(&sample.features)
    }

    /// Most probable class; ties go to the lowest class id.
    pub fn predict(&self, sample: &Sample) -> Result<ClassId> {
        let logits = self.logits(sample)?;
        Ok(argmax_class(&self.classes, &logits, |_| true).expect("model has classes"))
    }
}

/// Index of the highest score among classes accepted by `keep`, ties broken by
/// lowest class id.
pub(crate) fn argmax_class(
    classes: &[ClassId],
    scores: &[f64],
    keep: impl Fn(ClassId) -> bool,
) -> Option<ClassId> {
    let mut best: Option<(ClassId, f64)> = None;
    for (&class, &score) in classes.iter().zip(scores) {
        if !keep(class) {
            continue;
        }
        best = match best {
            Some((bc, bs)) if bs > score || (bs == score && bc < class) => Some((bc, bs)),
            _ => Some((class, score)),
        };
    }
    best.map(|(c, _)| c)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Frozen copy of a trained model, used as the distillation teacher in the
/// next episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    params: ModelParams,
}

impl ModelSnapshot {
    pub fn new(params: ModelParams) -> Self {
        ModelSnapshot { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn classes(&self) -> &[ClassId] {
        self.params.classes()
    }
}
