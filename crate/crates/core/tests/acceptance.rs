//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion failed.
//!
//!     cargo test -p acil-core --test acceptance

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use acil_core::classifier::{
    class_weights, distillation_loss, entropy, loss_and_gradient, weighted_ce_loss, DistillTerm,
    ModelParams, ModelSnapshot,
};
use acil_core::datastream::Sample;
use acil_core::harness::{
    aggregate, final_summary, format_aggregate, format_results, format_summary, run_sweep,
    ExperimentConfig, MetricsRecord, RunResults,
};
use acil_core::seed;
use acil_core::selection::{
    gdumb_balance, herding, k_center_greedy, objective, split_budget, weighted_kmeans,
    weighted_kmeans_select, Strategy,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

// Pinned tolerances.
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Gradient components below this magnitude are compared absolutely.
const GRAD_ABS_FLOOR: f64 = 1e-6;
/// ReLU pre-activations closer than this to zero are resampled, since central
/// differences straddle the kink there.
const KINK_MARGIN: f64 = 1e-3;
const SPOT_TOL: f64 = 1e-9;
/// Relative slack for the k-means objective between iterations (rounding only).
const KMEANS_SLACK: f64 = 1e-12;
const ACCURACY_GAP: f64 = 0.05;
const RETENTION_GAP: f64 = 0.20;
const BUDGET_BAND: f64 = 0.02;
const SEEDS: usize = 5;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn random_points(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

/// Criterion 1.
fn budget_split() -> Outcome {
    let mut rng = seed::rng(1);
    for _ in 0..200 {
        let k = rng.random_range(1..=5000usize);
        let ce = rng.random_range(1..=20usize);
        let cx = rng.random_range(0..=100usize);
        let s = split_budget(k, ce, cx);
        let expected = round_half_up(k as f64 * ce as f64 / (ce + cx) as f64);
        ensure(
            s.k_unlabeled == expected,
            format!(
                "k={k} |Ce|={ce} |Cx|={cx}: k_unlabeled {} != {expected}",
                s.k_unlabeled
            ),
        )?;
        ensure(
            s.k_unlabeled + s.k_exemplar == k,
            format!("k={k}: parts do not sum to k"),
        )?;
    }
    ensure(
        split_budget(5, 1, 1).k_unlabeled == 3,
        "2.5 must round up to 3",
    )?;
    Ok("200 triples exact, sums equal k".into())
}

fn default_config(strategy: Strategy, budget: usize, num_seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        strategy,
        budget,
        num_seeds,
        ..ExperimentConfig::default()
    }
}

/// Criterion 2.
fn annotation_closed_forms(runs: &mut Vec<RunResults>) -> Outcome {
    let cfg = default_config(Strategy::Acil, 100, 2);
    let results = run_sweep(&cfg, &Strategy::ALL).map_err(|e| e.to_string())?;
    ensure(
        results.failures.is_empty(),
        format!("{:?}", results.failures),
    )?;
    let (c, l, u, k) = (2usize, 10usize, 200usize, 100usize);
    for r in &results.records {
        let n = r.episode;
        let expected = match r.strategy {
            Strategy::Acil => c * l + round_half_up(k as f64 * c as f64 / (c + c * n) as f64),
            Strategy::Random | Strategy::Coreset | Strategy::Badge => c * l + k,
            _ => c * (l + u),
        };
        ensure(
            r.annotated_this_episode == expected,
            format!(
                "{} episode {n}: {} annotations, expected {expected}",
                r.strategy, r.annotated_this_episode
            ),
        )?;
        if r.strategy == Strategy::Acil && n > 0 {
            ensure(
                r.annotated_this_episode < 120,
                "ACIL must charge fewer than 120 after episode 0",
            )?;
        }
    }
    let acil: Vec<usize> = results
        .records
        .iter()
        .filter(|r| r.strategy == Strategy::Acil && r.seed == results.records[0].seed)
        .map(|r| r.annotated_this_episode)
        .collect();
    runs.push(results);
    Ok(format!("full 420/ep, AL 120/ep, ACIL {acil:?}"))
}

struct GradInstance {
    model: ModelParams,
    snapshot: ModelSnapshot,
    labeled: Vec<Sample>,
    exemplars: Vec<Sample>,
    weights: BTreeMap<usize, f64>,
    lambda: f64,
    temperature: f64,
}

fn random_model(rng: &mut impl Rng, d: usize, h: usize, classes: Vec<usize>) -> ModelParams {
    let mut m = ModelParams::zeros(d, h, classes).unwrap();
    let normal = Normal::new(0.0, 0.7).unwrap();
    for t in m.parameters_mut() {
        t.iter_mut().for_each(|v| *v = normal.sample(rng));
    }
    m
}

fn near_kink(model: &ModelParams, samples: &[Sample]) -> bool {
    let [w1, b1, _, _] = model.parameters();
    let (d, h) = (model.input_dim(), model.hidden());
    samples.iter().any(|s| {
        (0..h).any(|j| {
            let pre: f64 = b1[j] + (0..d).map(|i| w1[j * d + i] * s.features[i]).sum::<f64>();
            pre.abs() < KINK_MARGIN
        })
    })
}

fn grad_instance(rng: &mut impl Rng) -> GradInstance {
    loop {
        let d = rng.random_range(2..=5usize);
        let c = rng.random_range(2..=3usize);
        let h = if rng.random_bool(0.25) {
            0
        } else {
            rng.random_range(2..=6usize)
        };
        let classes: Vec<usize> = (0..c).map(|i| 10 + 3 * i).collect();
        let model = random_model(rng, d, h, classes.clone());
        // Two old classes: with one the softened distribution is constant and KD vanishes.
        let old = classes[..2].to_vec();
        let snapshot = ModelSnapshot::new(random_model(rng, d, h, old.clone()));
        let nl = rng.random_range(1..=6usize);
        let ne = rng.random_range(1..=(8 - nl).min(4));
        let mut sample = |id: u64, classes: &[usize]| {
            let f = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            Sample::new(id, f, classes[rng.random_range(0..classes.len())])
        };
        let labeled: Vec<Sample> = (0..nl as u64).map(|i| sample(i, &classes)).collect();
        let exemplars: Vec<Sample> = (0..ne as u64).map(|i| sample(100 + i, &old)).collect();
        let all: Vec<Sample> = labeled.iter().chain(&exemplars).cloned().collect();
        if near_kink(&model, &all) {
            continue;
        }
        let mut counts = BTreeMap::new();
        for s in &all {
            *counts.entry(s.true_label).or_insert(0usize) += 1;
        }
        for &cl in &classes {
            counts.entry(cl).or_insert(1);
        }
        let alpha = all.len() as f64 / c as f64;
        return GradInstance {
            model,
            snapshot,
            labeled,
            exemplars,
            weights: class_weights(&counts, alpha),
            lambda: rng.random_range(0.5..2.0),
            temperature: rng.random_range(1.0..4.0),
        };
    }
}

fn objective_value(inst: &GradInstance, model: &ModelParams) -> f64 {
    let batch: Vec<&Sample> = inst.labeled.iter().chain(&inst.exemplars).collect();
    let ex: Vec<&Sample> = inst.exemplars.iter().collect();
    let term = DistillTerm {
        snapshot: &inst.snapshot,
        batch: &ex,
        temperature: inst.temperature,
        lambda: inst.lambda,
    };
    loss_and_gradient(model, &batch, &inst.weights, Some(term))
        .unwrap()
        .0
}

/// Criterion 3.
fn gradient_check() -> Outcome {
    let mut rng = seed::rng(3);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let inst = grad_instance(&mut rng);
        let batch: Vec<&Sample> = inst.labeled.iter().chain(&inst.exemplars).collect();
        let ex: Vec<&Sample> = inst.exemplars.iter().collect();
        let term = DistillTerm {
            snapshot: &inst.snapshot,
            batch: &ex,
            temperature: inst.temperature,
            lambda: inst.lambda,
        };
        let (loss, grads) =
            loss_and_gradient(&inst.model, &batch, &inst.weights, Some(term)).unwrap();

        // The reported value must be the sum of the two separately computed terms.
        let wce: f64 = batch
            .iter()
            .map(|s| {
                let p = inst.model.predict_proba(s).unwrap();
                let row = inst.model.class_index(s.true_label).unwrap();
                inst.weights[&s.true_label] * -p[row].ln()
            })
            .sum::<f64>()
            / batch.len() as f64;
        let kd = distillation_loss(&inst.model, &inst.snapshot, &ex, inst.temperature).unwrap();
        ensure(
            (loss - (wce + inst.lambda * kd)).abs() < 1e-10 * loss.abs().max(1.0),
            format!("case {case}: loss {loss} != WCE {wce} + lambda * KD {kd}"),
        )?;
        ensure(
            kd > 0.0 && wce > 0.0,
            format!("case {case}: both terms must be active"),
        )?;

        let analytic = [&grads.w1, &grads.b1, &grads.w2, &grads.b2];
        for (t, g) in analytic.iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = inst.model.clone();
                plus.parameters_mut()[t][i] += GRAD_STEP;
                let mut minus = inst.model.clone();
                minus.parameters_mut()[t][i] -= GRAD_STEP;
                let numeric = (objective_value(&inst, &plus) - objective_value(&inst, &minus))
                    / (2.0 * GRAD_STEP);
                let denom = g[i].abs().max(numeric.abs()).max(GRAD_ABS_FLOOR);
                let rel = (g[i] - numeric).abs() / denom;
                worst = worst.max(rel);
                ensure(
                    rel <= GRAD_REL_TOL,
                    format!(
                        "case {case} tensor {t} index {i}: analytic {} numeric {numeric}",
                        g[i]
                    ),
                )?;
            }
        }
    }
    Ok(format!("20 instances, worst relative error {worst:.2e}"))
}

/// Weighted mean and the member nearest to it (ties by lowest id).
fn brute_force_b1(ids: &[u64], points: &[Vec<f64>], weights: &[f64]) -> u64 {
    let d = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += w * v / total;
        }
    }
    let mut best = (f64::INFINITY, u64::MAX);
    for (id, p) in ids.iter().zip(points) {
        let key = (dist2(p, &mean), *id);
        if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
            best = key;
        }
    }
    best.1
}

/// Criterion 4.
fn kmeans_properties() -> Outcome {
    let mut rng = seed::rng(4);
    for case in 0..50 {
        let n = rng.random_range(8..=60usize);
        let d = rng.random_range(1..=4usize);
        let k = rng.random_range(2..=6usize).min(n);
        let points = random_points(&mut rng, n, d, 5.0);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..2.0)).collect();
        let run = weighted_kmeans(&points, &weights, k, &mut rng).map_err(|e| e.to_string())?;
        for w in run.objective_trace.windows(2) {
            ensure(
                w[1] <= w[0] * (1.0 + KMEANS_SLACK),
                format!("case {case}: objective rose {} -> {}", w[0], w[1]),
            )?;
        }
        let direct: f64 = points
            .iter()
            .zip(&weights)
            .zip(&run.assignments)
            .map(|((p, w), &a)| w * dist2(p, &run.centers[a]))
            .sum();
        let reported = objective(&points, &weights, &run);
        ensure(
            (direct - reported).abs() <= 1e-9 * direct.max(1.0),
            format!("case {case}: objective {reported} != direct {direct}"),
        )?;
    }

    for case in 0..50 {
        let n = rng.random_range(1..=50usize);
        let d = rng.random_range(1..=4usize);
        let points = random_points(&mut rng, n, d, 3.0);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
        let ids: Vec<u64> = (0..n as u64).map(|i| 1000 + 7 * i).collect();
        let got =
            weighted_kmeans_select(&ids, &points, &weights, 1, case).map_err(|e| e.to_string())?;
        let want = brute_force_b1(&ids, &points, &weights);
        ensure(
            got == vec![want],
            format!("B=1 case {case}: {got:?} != [{want}]"),
        )?;
    }

    let mut hits = 0;
    for s in 0..10u64 {
        let mut rng = seed::rng(400 + s);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut points = Vec::new();
        let mut blob = Vec::new();
        for b in 0..2 {
            let centre = if b == 0 { [-6.0, 0.0] } else { [6.0, 0.0] };
            for _ in 0..25 {
                points.push(
                    centre
                        .iter()
                        .map(|c| c + noise.sample(&mut rng))
                        .collect::<Vec<f64>>(),
                );
                blob.push(b);
            }
        }
        let weights: Vec<f64> = (0..50).map(|_| rng.random_range(0.01..1.0)).collect();
        let ids: Vec<u64> = (0..50).collect();
        let picks =
            weighted_kmeans_select(&ids, &points, &weights, 2, s).map_err(|e| e.to_string())?;
        let blobs: std::collections::BTreeSet<usize> =
            picks.iter().map(|&i| blob[i as usize]).collect();
        if picks.len() == 2 && blobs.len() == 2 {
            hits += 1;
        }
    }
    ensure(
        hits >= 9,
        format!("two blobs split in only {hits}/10 seeds"),
    )?;
    Ok(format!(
        "50 monotone traces, 50 B=1 oracle matches, two blobs {hits}/10"
    ))
}

/// Criterion 5.
fn spot_values() -> Outcome {
    for c in 1..=20usize {
        let h = entropy(&vec![1.0 / c as f64; c]).map_err(|e| e.to_string())?;
        ensure(
            (h - (c as f64).ln()).abs() <= SPOT_TOL,
            format!("entropy(uniform {c}) = {h}"),
        )?;
        let mut one_hot = vec![0.0; c];
        one_hot[c / 2] = 1.0;
        let h = entropy(&one_hot).map_err(|e| e.to_string())?;
        ensure(h.abs() <= SPOT_TOL, format!("entropy(one-hot {c}) = {h}"))?;
    }
    // Zero linear model: p = (1/2, 1/2). Counts (1, 3), alpha = 2, so the
    // weights are 2 and 2/3 and the batch mean is (4/3) ln 2.
    let model = ModelParams::zeros(1, 0, vec![0, 1]).unwrap();
    let a = Sample::new(0, vec![1.0], 0);
    let b = Sample::new(1, vec![-1.0], 1);
    let counts = BTreeMap::from([(0, 1), (1, 3)]);
    let loss = weighted_ce_loss(&model, &[&a, &b], &counts, 2.0).map_err(|e| e.to_string())?;
    let expected = 4.0 / 3.0 * 2f64.ln();
    ensure(
        (loss - expected).abs() <= SPOT_TOL,
        format!("WCE example {loss} != {expected}"),
    )?;
    ensure(
        (loss - 0.9242).abs() < 1e-4,
        format!("WCE example {loss} != 0.9242"),
    )?;
    Ok(format!(
        "ln C for C=1..20, one-hot 0, WCE example {loss:.10}"
    ))
}

fn covering_radius(points: &[Vec<f64>], centres: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| {
            centres
                .iter()
                .map(|&c| dist2(p, &points[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

fn best_radius(points: &[Vec<f64>], k: usize) -> f64 {
    fn go(points: &[Vec<f64>], k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            *best = best.min(covering_radius(points, chosen));
            return;
        }
        for i in start..points.len() {
            chosen.push(i);
            go(points, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(points, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Criterion 6.
fn baseline_oracles() -> Outcome {
    let mut rng = seed::rng(6);
    let mut worst_ratio: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(2..=12usize);
        let k = rng.random_range(1..=3usize).min(n);
        let d = rng.random_range(1..=3usize);
        let points = random_points(&mut rng, n, d, 10.0);
        let picks = k_center_greedy(&points, &[], k, &mut rng);
        ensure(
            picks.len() == k,
            format!("coreset case {case}: {} picks for k={k}", picks.len()),
        )?;
        let got = covering_radius(&points, &picks);
        let opt = best_radius(&points, k);
        if opt > 0.0 {
            worst_ratio = worst_ratio.max(got / opt);
        }
        ensure(
            got <= 2.0 * opt + 1e-12,
            format!("coreset case {case}: radius {got} > 2 x {opt}"),
        )?;
    }

    for case in 0..50 {
        let n = rng.random_range(1..=40usize);
        let d = rng.random_range(1..=5usize);
        let points = random_points(&mut rng, n, d, 4.0);
        let mu: Vec<f64> = (0..d)
            .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let want = (0..n)
            .min_by(|&a, &b| {
                dist2(&points[a], &mu)
                    .total_cmp(&dist2(&points[b], &mu))
                    .then(a.cmp(&b))
            })
            .unwrap();
        let got = herding(&points, rng.random_range(1..=n));
        ensure(
            got.first() == Some(&want),
            format!("herding case {case}: first {:?} != {want}", got.first()),
        )?;
    }

    for case in 0..100 {
        let classes = rng.random_range(1..=6usize);
        let k = rng.random_range(1..=60usize);
        let per_class = k.div_ceil(classes) + rng.random_range(0..5usize);
        let labels: Vec<usize> = (0..classes)
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect();
        let picks = gdumb_balance(&labels, k, &mut rng);
        ensure(
            picks.len() == k,
            format!("gdumb case {case}: {} picks for k={k}", picks.len()),
        )?;
        let mut counts = vec![0usize; classes];
        for &i in &picks {
            counts[labels[i]] += 1;
        }
        let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        ensure(spread <= 1, format!("gdumb case {case}: counts {counts:?}"))?;
    }
    Ok(format!(
        "coreset worst ratio {worst_ratio:.3}, herding 50/50, gdumb spread <= 1"
    ))
}

fn final_means(records: &[MetricsRecord], strategy: Strategy) -> (f64, f64) {
    let last = records.iter().map(|r| r.episode).max().unwrap();
    let finals: Vec<&MetricsRecord> = records
        .iter()
        .filter(|r| r.strategy == strategy && r.episode == last)
        .collect();
    assert_eq!(
        finals.len(),
        SEEDS,
        "{strategy}: expected {SEEDS} final records"
    );
    let acc: Vec<f64> = finals.iter().map(|r| r.incremental_accuracy).collect();
    let ret: Vec<f64> = finals.iter().map(|r| r.retention).collect();
    (mean(&acc), mean(&ret))
}

/// Criterion 7.
fn forgetting_ordering(runs: &mut Vec<RunResults>) -> Outcome {
    let cfg = default_config(Strategy::Acil, 100, SEEDS);
    let results = run_sweep(
        &cfg,
        &[Strategy::Acil, Strategy::Random, Strategy::Finetuning],
    )
    .map_err(|e| e.to_string())?;
    ensure(
        results.failures.is_empty(),
        format!("{:?}", results.failures),
    )?;
    let (acil_acc, acil_ret) = final_means(&results.records, Strategy::Acil);
    let (rand_acc, _) = final_means(&results.records, Strategy::Random);
    let (_, ft_ret) = final_means(&results.records, Strategy::Finetuning);
    runs.push(results);
    let msg = format!(
        "accuracy ACIL {acil_acc:.4} vs Random {rand_acc:.4}; retention ACIL {acil_ret:.4} vs Finetuning {ft_ret:.4}"
    );
    ensure(acil_acc - rand_acc >= ACCURACY_GAP, msg.clone())?;
    ensure(acil_ret - ft_ret >= RETENTION_GAP, msg.clone())?;
    Ok(msg)
}

/// Criterion 8.
fn budget_monotonicity(runs: &mut Vec<RunResults>) -> Outcome {
    let mut per_budget = Vec::new();
    for k in [50, 100, 250] {
        let cfg = default_config(Strategy::Acil, k, SEEDS);
        let results = run_sweep(&cfg, &[Strategy::Acil]).map_err(|e| e.to_string())?;
        ensure(
            results.failures.is_empty(),
            format!("k={k}: {:?}", results.failures),
        )?;
        let (acc, _) = final_means(&results.records, Strategy::Acil);
        let counts: BTreeMap<(u64, usize), usize> = results
            .records
            .iter()
            .map(|r| ((r.seed, r.episode), r.annotated_this_episode))
            .collect();
        per_budget.push((k, acc, counts));
        runs.push(results);
    }
    for pair in per_budget.windows(2) {
        let (k1, a1, c1) = &pair[0];
        let (k2, a2, c2) = &pair[1];
        ensure(
            *a2 >= a1 - BUDGET_BAND,
            format!("accuracy fell from {a1:.4} (k={k1}) to {a2:.4} (k={k2})"),
        )?;
        for (key, n1) in c1 {
            let n2 = c2[key];
            ensure(
                n2 >= *n1,
                format!(
                    "seed {} episode {}: {n1} annotations at k={k1}, {n2} at k={k2}",
                    key.0, key.1
                ),
            )?;
        }
    }
    let accs: Vec<String> = per_budget
        .iter()
        .map(|(k, a, _)| format!("k={k}: {a:.4}"))
        .collect();
    Ok(format!(
        "final accuracy {}; per-episode annotations non-decreasing",
        accs.join(", ")
    ))
}

fn csv_bytes(results: &RunResults) -> String {
    let rows = aggregate(&results.records);
    format!(
        "{}{}{}",
        format_results(&results.records),
        format_aggregate(&rows),
        format_summary(&final_summary(&rows))
    )
}

/// Criterion 9.
fn determinism() -> Outcome {
    let cfg = default_config(Strategy::Acil, 100, 3);
    let strategies = [
        Strategy::Acil,
        Strategy::Random,
        Strategy::Coreset,
        Strategy::Rainbow,
    ];
    let a = csv_bytes(&run_sweep(&cfg, &strategies).map_err(|e| e.to_string())?);
    let b = csv_bytes(&run_sweep(&cfg, &strategies).map_err(|e| e.to_string())?);
    ensure(a == b, "repeated runs produced different CSV bytes")?;
    let other = ExperimentConfig { seed: 1, ..cfg };
    let c = csv_bytes(&run_sweep(&other, &strategies).map_err(|e| e.to_string())?);
    ensure(a != c, "a different master seed should change the results")?;
    Ok(format!("{} bytes identical across repeats", a.len()))
}

fn loss_trend(runs: &[RunResults]) -> Outcome {
    let mut checked = 0;
    for r in runs.iter().flat_map(|r| &r.records) {
        ensure(
            r.final_epoch_loss <= r.first_epoch_loss,
            format!(
                "{} seed {} episode {}: final loss {} > first {}",
                r.strategy, r.seed, r.episode, r.final_epoch_loss, r.first_epoch_loss
            ),
        )?;
        checked += 1;
    }
    ensure(checked > 0, "no runs recorded")?;
    Ok(format!(
        "{checked} trained episodes, final epoch loss <= first"
    ))
}

fn run(c: Criterion, f: impl FnOnce() -> Outcome, failures: &mut Vec<&'static str>) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let elapsed = start.elapsed();
    let outcome = match (outcome, c.limit) {
        (Ok(_), Some(limit)) if elapsed > limit => {
            Err(format!("took {elapsed:.2?}, limit {limit:?}"))
        }
        (o, _) => o,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("[{tag}] {:>2} {}: {detail} ({elapsed:.2?})", c.id, c.name);
    if outcome.is_err() {
        failures.push(c.id);
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut failures = Vec::new();
    let mut runs = Vec::new();

    run(
        Criterion {
            id: "1",
            name: "budget split",
            limit: Some(secs(1)),
        },
        budget_split,
        &mut failures,
    );
    run(
        Criterion {
            id: "2",
            name: "annotation closed forms",
            limit: Some(secs(60)),
        },
        || annotation_closed_forms(&mut runs),
        &mut failures,
    );
    run(
        Criterion {
            id: "3",
            name: "gradient check",
            limit: Some(secs(10)),
        },
        gradient_check,
        &mut failures,
    );
    run(
        Criterion {
            id: "4",
            name: "weighted k-means",
            limit: Some(secs(30)),
        },
        kmeans_properties,
        &mut failures,
    );
    run(
        Criterion {
            id: "5",
            name: "entropy and loss spot values",
            limit: Some(secs(1)),
        },
        spot_values,
        &mut failures,
    );
    run(
        Criterion {
            id: "6",
            name: "baseline oracles",
            limit: Some(secs(60)),
        },
        baseline_oracles,
        &mut failures,
    );
    run(
        Criterion {
            id: "7",
            name: "forgetting ordering",
            limit: Some(secs(600)),
        },
        || forgetting_ordering(&mut runs),
        &mut failures,
    );
    run(
        Criterion {
            id: "8",
            name: "budget monotonicity",
            limit: Some(secs(1800)),
        },
        || budget_monotonicity(&mut runs),
        &mut failures,
    );
    run(
        Criterion {
            id: "9",
            name: "determinism",
            limit: None,
        },
        determinism,
        &mut failures,
    );
    run(
        Criterion {
            id: "L",
            name: "training loss trend",
            limit: None,
        },
        || loss_trend(&runs),
        &mut failures,
    );

    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failures:?}");
        std::process::exit(1);
    }
}
