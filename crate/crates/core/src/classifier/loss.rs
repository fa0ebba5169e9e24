use std::collections::BTreeMap;

use super::{ModelParams, ModelSnapshot};
use crate::datastream::{ClassId, Sample};
use crate::error::{Error, Result};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::contract(
            "probability vector has negative or non-finite entries",
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(p.iter()
        .filter(|v| **v > 0.0)
        .map(|v| -v * v.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Per-class weights `alpha / n_j`.
pub fn class_weights(
    class_counts: &BTreeMap<ClassId, usize>,
    alpha: f64,
) -> BTreeMap<ClassId, f64> {
    class_counts
        .iter()
        .map(|(&c, &n)| (c, alpha / n as f64))
        .collect()
}

fn class_row(model: &ModelParams, class: ClassId) -> Result<usize> {
    model
        .class_index(class)
        .ok_or_else(|| Error::contract(format!("class {class} is not an output of the model")))
}

/// Mean over the batch of `w_y * (-ln p_y)` with `w_j = alpha / n_j`.
pub fn weighted_ce_loss(
    model: &ModelParams,
    batch: &[&Sample],
    class_counts: &BTreeMap<ClassId, usize>,
    alpha: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let weights = class_weights(class_counts, alpha);
    let mut total = 0.0;
    for sample in batch {
        let row = class_row(model, sample.true_label)?;
        let w = *weights.get(&sample.true_label).ok_or_else(|| {
            Error::contract(format!("no class count for class {}", sample.true_label))
        })?;
        let logits = model.logits(sample)?;
        total += w * -log_softmax_at(&logits, row);
    }
    Ok(total / batch.len() as f64)
}

fn log_softmax_at(logits: &[f64], row: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits[row] - lse
}

fn snapshot_rows(model: &ModelParams, snapshot: &ModelSnapshot) -> Result<Vec<usize>> {
    snapshot
        .classes()
        .iter()
        .map(|&c| {
            model.class_index(c).ok_or_else(|| {
                Error::contract(format!("snapshot class {c} is not an output of the model"))
            })
        })
        .collect()
}

/// Cross-entropy between the teacher's temperature-softened distribution over
/// its own classes and the student's softened distribution restricted to the
/// same classes, averaged over the batch. Zero for an empty batch.
pub fn distillation_loss(
    model: &ModelParams,
    snapshot: &ModelSnapshot,
    batch: &[&Sample],
    temperature: f64,
) -> Result<f64> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::contract("temperature must be positive"));
    }
    let rows = snapshot_rows(model, snapshot)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for sample in batch {
        let (target, student) = softened_pair(model, snapshot, &rows, sample, temperature)?;
        total -= target
            .iter()
            .zip(&student)
            .map(|(q, r)| if *q > 0.0 { q * r.ln() } else { 0.0 })
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

fn softened_pair(
    model: &ModelParams,
    snapshot: &ModelSnapshot,
    rows: &[usize],
    sample: &Sample,
    temperature: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let teacher: Vec<f64> = snapshot
        .params()
        .logits(sample)?
        .iter()
        .map(|z| z / temperature)
        .collect();
    let logits = model.logits(sample)?;
    let student: Vec<f64> = rows.iter().map(|&r| logits[r] / temperature).collect();
    Ok((softmax(&teacher), softmax(&student)))
}

/// Gradient buffers with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(model: &ModelParams) -> Self {
        Gradients {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    pub(crate) fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// Distillation half of the objective.
#[derive(Debug, Clone, Copy)]
pub struct DistillTerm<'a> {
    pub snapshot: &'a ModelSnapshot,
    pub batch: &'a [&'a Sample],
    pub temperature: f64,
    pub lambda: f64,
}

/// Value and analytic gradient of `L_WCE + lambda * L_D`.
pub fn loss_and_gradient(
    model: &ModelParams,
    batch: &[&Sample],
    weights: &BTreeMap<ClassId, f64>,
    distill: Option<DistillTerm<'_>>,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;

    if !batch.is_empty() {
        let scale = 1.0 / batch.len() as f64;
        for sample in batch {
            let row = class_row(model, sample.true_label)?;
            let w = *weights.get(&sample.true_label).ok_or_else(|| {
                Error::contract(format!("no class weight for class {}", sample.true_label))
            })?;
            let (embedding, pre) = forward(model, sample)?;
            let logits = model.logits_from_embedding(&embedding);
            loss += scale * w * -log_softmax_at(&logits, row);
            let mut dz = softmax(&logits);
            dz[row] -= 1.0;
            dz.iter_mut().for_each(|g| *g *= scale * w);
            backward(model, sample, &embedding, &pre, &dz, &mut grads);
        }
    }

    if let Some(term) = distill {
        if term.lambda != 0.0 && !term.batch.is_empty() {
            if term.temperature.is_nan() || term.temperature <= 0.0 {
                return Err(Error::contract("temperature must be positive"));
            }
            let rows = snapshot_rows(model, term.snapshot)?;
            let scale = term.lambda / term.batch.len() as f64;
            for sample in term.batch {
                let (target, student) =
                    softened_pair(model, term.snapshot, &rows, sample, term.temperature)?;
                loss -= scale
                    * target
                        .iter()
                        .zip(&student)
                        .map(|(q, r)| if *q > 0.0 { q * r.ln() } else { 0.0 })
                        .sum::<f64>();
                let (embedding, pre) = forward(model, sample)?;
                let mut dz = vec![0.0; model.num_classes()];
                for ((&r, q), s) in rows.iter().zip(&target).zip(&student) {
                    dz[r] = scale * (s - q) / term.temperature;
                }
                backward(model, sample, &embedding, &pre, &dz, &mut grads);
            }
        }
    }
    Ok((loss, grads))
}

fn forward(model: &ModelParams, sample: &Sample) -> Result<(Vec<f64>, Vec<f64>)> {
    model.check_dim(&sample.features)?;
    if model.hidden == 0 {
        Ok((sample.features.clone(), Vec::new()))
    } else {
        let pre = model.pre_activation(&sample.features);
        let embedding = pre.iter().map(|a| a.max(0.0)).collect();
        Ok((embedding, pre))
    }
}

fn backward(
    model: &ModelParams,
    sample: &Sample,
    embedding: &[f64],
    pre: &[f64],
    dz: &[f64],
    grads: &mut Gradients,
) {
    let m = model.embed_dim();
    let mut dh = vec![0.0; m];
    for (r, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads.b2[r] += g;
        let w_row = &model.w2[r * m..(r + 1) * m];
        let g_row = &mut grads.w2[r * m..(r + 1) * m];
        for j in 0..m {
            g_row[j] += g * embedding[j];
            dh[j] += g * w_row[j];
        }
    }
    if model.hidden == 0 {
        return;
    }
    let d = model.input_dim;
    for j in 0..model.hidden {
        if pre[j] <= 0.0 {
            continue;
        }
        let da = dh[j];
        grads.b1[j] += da;
        let g_row = &mut grads.w1[j * d..(j + 1) * d];
        for (g, x) in g_row.iter_mut().zip(&sample.features) {
            *g += da * x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn entropy_spot_values() {
        assert!((entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let expected = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((entropy(&[0.75, 0.25]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn entropy_rejects_invalid_distributions() {
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(entropy(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn wce_hand_example() {
        // Linear model, zero weights: p = (0.5, 0.5) for both samples.
        let model = ModelParams::zeros(1, 0, vec![0, 1]).unwrap();
        let a = Sample::new(0, vec![1.0], 0);
        let b = Sample::new(1, vec![-1.0], 1);
        let counts = BTreeMap::from([(0, 1), (1, 3)]);
        let loss = weighted_ce_loss(&model, &[&a, &b], &counts, 2.0).unwrap();
        assert!((loss - 4.0 / 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn wce_balanced_is_plain_ce_and_confident_is_zero() {
        let mut model = ModelParams::zeros(1, 0, vec![0, 1]).unwrap();
        model.w2 = vec![1.0, -1.0];
        let a = Sample::new(0, vec![2.0], 0);
        let b = Sample::new(1, vec![-2.0], 1);
        let counts = BTreeMap::from([(0, 1), (1, 1)]);
        let weighted = weighted_ce_loss(&model, &[&a, &b], &counts, 1.0).unwrap();
        let plain = -(softmax(&model.logits(&a).unwrap())[0].ln()
            + softmax(&model.logits(&b).unwrap())[1].ln())
            / 2.0;
        assert!((weighted - plain).abs() < 1e-15);

        model.w2 = vec![1e3, -1e3];
        let confident = weighted_ce_loss(&model, &[&a, &b], &counts, 1.0).unwrap();
        assert!(confident.abs() < 1e-12);
    }

    #[test]
    fn wce_unknown_label_is_contract_violation() {
        let model = ModelParams::zeros(1, 0, vec![0, 1]).unwrap();
        let a = Sample::new(0, vec![1.0], 7);
        let counts = BTreeMap::from([(7, 1)]);
        assert!(matches!(
            weighted_ce_loss(&model, &[&a], &counts, 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn self_distillation_is_target_entropy() {
        let model = ModelParams::init(3, 4, vec![0, 1, 2], &mut seed::rng(9)).unwrap();
        let snap = ModelSnapshot::new(model.clone());
        let xs: Vec<Sample> = (0..5)
            .map(|i| Sample::new(i, vec![i as f64 * 0.3, -0.5, 1.0], 0))
            .collect();
        let batch: Vec<&Sample> = xs.iter().collect();
        let loss = distillation_loss(&model, &snap, &batch, 2.0).unwrap();
        let target_entropy: f64 = xs
            .iter()
            .map(|x| {
                let z: Vec<f64> = model.logits(x).unwrap().iter().map(|v| v / 2.0).collect();
                entropy(&softmax(&z)).unwrap()
            })
            .sum::<f64>()
            / xs.len() as f64;
        assert!((loss - target_entropy).abs() < 1e-9);
    }

    #[test]
    fn distillation_edge_cases() {
        let model = ModelParams::init(2, 3, vec![0, 1, 2, 3], &mut seed::rng(2)).unwrap();
        let old = ModelParams::init(2, 3, vec![0, 1], &mut seed::rng(4)).unwrap();
        let snap = ModelSnapshot::new(old);
        assert_eq!(distillation_loss(&model, &snap, &[], 2.0).unwrap(), 0.0);

        let x = Sample::new(0, vec![0.4, -1.2], 0);
        let limit = distillation_loss(&model, &snap, &[&x], 1e6).unwrap();
        assert!((limit - 2f64.ln()).abs() < 1e-3);

        let foreign = ModelSnapshot::new(ModelParams::zeros(2, 3, vec![9]).unwrap());
        assert!(matches!(
            distillation_loss(&model, &foreign, &[&x], 2.0),
            Err(Error::Contract(_))
        ));
    }
}
