use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::loss::{class_weights, loss_and_gradient, DistillTerm, Gradients};
use super::{ModelParams, ModelSnapshot};
use crate::datastream::{ClassId, Sample};
use crate::error::{Error, Result};
use crate::seed;

/// Rule for the class-weight scale `alpha` in `w_j = alpha / n_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// `alpha = |L| / C`, so weights average to one on balanced data.
    Balanced,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub temperature: f64,
    pub alpha: AlphaMode,
    pub optimizer: Optimizer,
    /// Hidden width for freshly initialised models; 0 is a linear model.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.05,
            lambda: 1.0,
            temperature: 2.0,
            alpha: AlphaMode::Balanced,
            optimizer: Optimizer::Sgd,
            hidden: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("train.lambda", "must be non-negative"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("train.temperature", "must be positive"));
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("train.alpha", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Starting point for an episode's training.
#[derive(Debug, Clone)]
pub enum ModelInit {
    /// Fresh random model over `classes`.
    Fresh {
        input_dim: usize,
        classes: Vec<ClassId>,
    },
    /// Continue from `model`, widening its output layer to cover `classes`.
    /// New rows start at zero and receive a small seeded perturbation.
    Warm {
        model: ModelParams,
        classes: Vec<ClassId>,
    },
}

/// Labeled training data for one episode. Every sample enters the weighted
/// cross-entropy; `exemplars` additionally enter the distillation term.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet<'a> {
    pub labeled: Vec<&'a Sample>,
    pub exemplars: Vec<&'a Sample>,
}

impl TrainingSet<'_> {
    pub fn len(&self) -> usize {
        self.labeled.len() + self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for s in self.labeled.iter().chain(&self.exemplars) {
            *counts.entry(s.true_label).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub snapshot: ModelSnapshot,
    /// Mean mini-batch loss per epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

const NEW_ROW_STD: f64 = 0.01;

/// Mini-batch training on `L_WCE + lambda * L_D`. The distillation term is
/// dropped when there is no snapshot, no exemplar or `lambda == 0`.
pub fn train_episode(
    init: ModelInit,
    data: &TrainingSet<'_>,
    snapshot: Option<&ModelSnapshot>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.labeled.is_empty() {
        return Err(Error::contract("training requires a nonempty labeled set"));
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, seed::TAG_TRAIN));
    let counts = data.class_counts();
    let pool_classes: Vec<ClassId> = counts.keys().copied().collect();
    let mut model = match init {
        ModelInit::Fresh {
            input_dim,
            mut classes,
        } => {
            for c in &pool_classes {
                if !classes.contains(c) {
                    classes.push(*c);
                }
            }
            let mut init_rng = seed::rng(seed::derive(cfg.seed, seed::TAG_MODEL));
            ModelParams::init(input_dim, cfg.hidden, classes, &mut init_rng)?
        }
        ModelInit::Warm { mut model, classes } => {
            let mut added = model.widen(&classes);
            added.extend(model.widen(&pool_classes));
            let noise = Normal::new(0.0, NEW_ROW_STD).unwrap();
            let m = model.embed_dim();
            for r in added {
                for w in &mut model.w2[r * m..(r + 1) * m] {
                    *w = noise.sample(&mut rng);
                }
            }
            model
        }
    };

    let alpha = match cfg.alpha {
        AlphaMode::Balanced => data.len() as f64 / counts.len() as f64,
        AlphaMode::Fixed(a) => a,
    };
    let weights = class_weights(&counts, alpha);
    let distilling = snapshot.is_some() && cfg.lambda > 0.0 && !data.exemplars.is_empty();

    // (sample, is_exemplar)
    let mut order: Vec<(&Sample, bool)> = data
        .labeled
        .iter()
        .map(|s| (*s, false))
        .chain(data.exemplars.iter().map(|s| (*s, true)))
        .collect();
    let mut optimizer = OptimizerState::new(cfg.optimizer, &model);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|(s, _)| *s).collect();
            let replay: Vec<&Sample> = chunk.iter().filter(|(_, e)| *e).map(|(s, _)| *s).collect();
            let distill = match snapshot {
                Some(snapshot) if distilling => Some(DistillTerm {
                    snapshot,
                    batch: &replay,
                    temperature: cfg.temperature,
                    lambda: cfg.lambda,
                }),
                _ => None,
            };
            let (loss, grads) = loss_and_gradient(&model, &batch, &weights, distill)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss;
            batches += 1;
            optimizer.step(&mut model, &grads, cfg.learning_rate);
        }
        let mean = total / batches as f64;
        if !model.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }

    let snapshot = ModelSnapshot::new(model.clone());
    Ok(TrainOutcome {
        model,
        snapshot,
        epoch_losses,
    })
}

struct AdamMoments {
    m: [Vec<f64>; 4],
    v: [Vec<f64>; 4],
    t: i32,
}

enum OptimizerState {
    Sgd,
    Adam(AdamMoments),
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    fn new(kind: Optimizer, model: &ModelParams) -> Self {
        match kind {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam => {
                let zeros = || {
                    [
                        vec![0.0; model.w1.len()],
                        vec![0.0; model.b1.len()],
                        vec![0.0; model.w2.len()],
                        vec![0.0; model.b2.len()],
                    ]
                };
                OptimizerState::Adam(AdamMoments {
                    m: zeros(),
                    v: zeros(),
                    t: 0,
                })
            }
        }
    }

    fn step(&mut self, model: &mut ModelParams, grads: &Gradients, lr: f64) {
        let params = [&mut model.w1, &mut model.b1, &mut model.w2, &mut model.b2];
        match self {
            OptimizerState::Sgd => {
                for (p, g) in params.into_iter().zip(grads.tensors()) {
                    for (w, d) in p.iter_mut().zip(g) {
                        *w -= lr * d;
                    }
                }
            }
            OptimizerState::Adam(state) => {
                state.t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(state.t);
                let c2 = 1.0 - ADAM_BETA2.powi(state.t);
                for (k, (p, g)) in params.into_iter().zip(grads.tensors()).enumerate() {
                    for i in 0..p.len() {
                        let m = &mut state.m[k][i];
                        let v = &mut state.v[k][i];
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g[i];
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g[i] * g[i];
                        p[i] -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}
