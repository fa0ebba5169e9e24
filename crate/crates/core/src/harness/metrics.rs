use crate::classifier::ModelParams;
use crate::datastream::Sample;
use crate::error::{Error, Result};

/// Fraction of `samples` whose argmax prediction is the true label.
pub fn accuracy(model: &ModelParams, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("accuracy of an empty test set"));
    }
    let mut correct = 0usize;
    for s in samples {
        if model.predict(s)? == s.true_label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Unweighted mean of per-episode test accuracies over every episode seen so
/// far (episode 0 included).
pub fn incremental_accuracy(model: &ModelParams, test_sets: &[&[Sample]]) -> Result<f64> {
    if test_sets.is_empty() {
        return Err(Error::contract(
            "incremental accuracy needs at least one test set",
        ));
    }
    let mut total = 0.0;
    for set in test_sets {
        total += accuracy(model, set)?;
    }
    Ok(total / test_sets.len() as f64)
}

/// Accuracy on the first episode's test set.
pub fn retention(model: &ModelParams, first_test: &[Sample]) -> Result<f64> {
    accuracy(model, first_test)
}
