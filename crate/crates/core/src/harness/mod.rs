//! The episode loop: train, select, charge annotations, evaluate.

mod metrics;
mod results;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{debug, warn};

use crate::classifier::{
    save_checkpoint, train_episode, ModelInit, ModelParams, ModelSnapshot, TrainConfig, TrainingSet,
};
use crate::datastream::{build_stream, AnnotationLedger, ClassId, Sample, StreamConfig};
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{
    select, LabelingMode, Origin, PseudoLabelSource, SelectionContext, Strategy,
};

pub use metrics::{accuracy, incremental_accuracy, retention};
pub use results::{
    aggregate, final_summary, format_aggregate, format_results, format_series, format_summary,
    format_summary_table, read_results, read_results_str, AggregateRow, SummaryRow,
    AGGREGATE_HEADER, RESULTS_COLUMNS, RESULTS_HEADER,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamConfig,
    pub train: TrainConfig,
    pub strategy: Strategy,
    pub budget: usize,
    pub num_seeds: usize,
    /// Master seed; every replica, stream, initialisation and selection seed
    /// is derived from it.
    pub seed: u64,
    /// Warm-start replay strategies from the previous episode's model.
    /// Finetuning always warm-starts.
    pub warm_start: bool,
    pub pseudo_labels: PseudoLabelSource,
    pub output_dir: Option<PathBuf>,
    /// When set, each episode's trained model is saved here.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            stream: StreamConfig::default(),
            train: TrainConfig::default(),
            strategy: Strategy::Acil,
            budget: 100,
            num_seeds: 5,
            seed: 0,
            warm_start: false,
            pseudo_labels: PseudoLabelSource::Current,
            output_dir: None,
            checkpoint_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if self.num_seeds == 0 {
            return Err(Error::config("num_seeds", "must be at least 1"));
        }
        self.stream.validate()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub strategy: Strategy,
    /// Replica seed derived from the master seed.
    pub seed: u64,
    pub episode: usize,
    pub incremental_accuracy: f64,
    pub retention: f64,
    pub annotated_this_episode: usize,
    pub cumulative_annotated: usize,
    /// Size of the exemplar set selected in this episode.
    pub exemplars: usize,
    pub exemplars_from_unlabeled: usize,
    pub first_epoch_loss: f64,
    pub final_epoch_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub strategy: Strategy,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResults {
    pub records: Vec<MetricsRecord>,
    /// Replicas aborted by diverged training; excluded from `records`.
    pub failures: Vec<SeedFailure>,
}

/// Runs every replica of the experiment. Diverged replicas are recorded in
/// `failures` and left out of `records`; any other error aborts the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResults> {
    run_sweep(cfg, &[cfg.strategy])
}

/// Runs `strategies` on identical per-replica streams. Independent
/// `(strategy, replica)` cells run on worker threads; results are assembled
/// in `(strategy, replica, episode)` order, so output does not depend on
/// scheduling.
pub fn run_sweep(base: &ExperimentConfig, strategies: &[Strategy]) -> Result<RunResults> {
    base.validate()?;
    let jobs: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|&s| (0..base.num_seeds).map(move |r| (s, seed::replica(base.seed, r))))
        .collect();
    let outcomes = parallel_map(&jobs, |&(strategy, replica_seed)| {
        let cfg = ExperimentConfig {
            strategy,
            ..base.clone()
        };
        run_replica(&cfg, replica_seed)
    });

    let mut results = RunResults::default();
    for (&(strategy, replica_seed), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(records) => results.records.extend(records),
            Err(Error::Divergence { epoch, loss }) => {
                let message = format!("training diverged at epoch {epoch} (loss = {loss})");
                warn!("{strategy} seed {replica_seed}: {message}; excluded from aggregates");
                results.failures.push(SeedFailure {
                    strategy,
                    seed: replica_seed,
                    message,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(results)
}

fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let value = f(item);
                *slots[i].lock().expect("slot lock") = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Runs one replica with an already derived replica seed.
pub fn run_replica(cfg: &ExperimentConfig, replica_seed: u64) -> Result<Vec<MetricsRecord>> {
    let stream_cfg = StreamConfig {
        seed: seed::derive(replica_seed, seed::TAG_STREAM),
        ..cfg.stream.clone()
    };
    let episodes = build_stream(&stream_cfg)?;
    let tests: Vec<Vec<Sample>> = episodes.iter().map(|e| e.test.clone()).collect();
    let strategy = cfg.strategy;
    let full = strategy.labeling() == LabelingMode::FullAnnotation;
    let warm = strategy.warm_starts() || cfg.warm_start;
    let model_seed = seed::derive(replica_seed, seed::TAG_MODEL);
    let select_seed = seed::derive(replica_seed, seed::TAG_SELECT);

    let mut ledger = AnnotationLedger::new();
    let mut exemplars: Vec<Sample> = Vec::new();
    let mut model: Option<ModelParams> = None;
    let mut snapshot: Option<ModelSnapshot> = None;
    let mut seen: Vec<ClassId> = Vec::new();
    let mut records = Vec::with_capacity(episodes.len());

    for (n, episode) in episodes.into_iter().enumerate() {
        let input_dim = episode.labeled[0].features.len();
        seen.extend(&episode.classes);
        let mut episode = episode.with_exemplars(std::mem::take(&mut exemplars));

        let mut charged = ledger.charge_samples(n, episode.labeled.iter_mut())?;
        if full {
            charged += ledger.charge_samples(n, episode.unlabeled.iter_mut())?;
        }

        let pool = if full {
            episode.unlabeled.len() + episode.labeled.len()
        } else {
            episode.unlabeled.len()
        } + episode.incoming_exemplars.len();
        if strategy.keeps_exemplars() && cfg.budget > pool {
            warn!(
                "{strategy} episode {n}: budget {} exceeds the {pool} candidates; keeping all of them",
                cfg.budget
            );
        }

        let mut labeled: Vec<&Sample> = episode.labeled.iter().collect();
        if full {
            labeled.extend(&episode.unlabeled);
        }
        let data = TrainingSet {
            labeled,
            exemplars: episode.incoming_exemplars.iter().collect(),
        };
        let init = match model.take() {
            Some(previous) if warm => ModelInit::Warm {
                model: previous,
                classes: seen.clone(),
            },
            _ => ModelInit::Fresh {
                input_dim,
                classes: seen.clone(),
            },
        };
        let train_cfg = TrainConfig {
            seed: seed::derive(model_seed, n as u64),
            ..cfg.train.clone()
        };
        let outcome = train_episode(init, &data, snapshot.as_ref(), &train_cfg)?;

        let selected = if strategy.keeps_exemplars() {
            let ctx = SelectionContext {
                episode: &episode,
                model: &outcome.model,
                snapshot: snapshot.as_ref(),
                budget: cfg.budget,
                seed: seed::derive(select_seed, n as u64),
                pseudo_labels: cfg.pseudo_labels,
            };
            select(strategy, &ctx)?
        } else {
            Default::default()
        };
        charged += ledger.charge(n, selected.ids_from(Origin::Unlabeled))?;

        let test_refs: Vec<&[Sample]> = tests[..=n].iter().map(Vec::as_slice).collect();
        let record = MetricsRecord {
            strategy,
            seed: replica_seed,
            episode: n,
            incremental_accuracy: incremental_accuracy(&outcome.model, &test_refs)?,
            retention: retention(&outcome.model, &tests[0])?,
            annotated_this_episode: charged,
            cumulative_annotated: ledger.total(),
            exemplars: selected.len(),
            exemplars_from_unlabeled: selected.count(Origin::Unlabeled),
            first_epoch_loss: outcome.epoch_losses[0],
            final_epoch_loss: *outcome.epoch_losses.last().expect("at least one epoch"),
        };
        debug!(
            "{strategy} seed {replica_seed} episode {n}: acc {:.4} retention {:.4} annotated {}",
            record.incremental_accuracy, record.retention, record.annotated_this_episode
        );
        records.push(record);

        if let Some(dir) = &cfg.checkpoint_dir {
            let path = dir.join(format!("{strategy}_{replica_seed}_episode{n}.ckpt"));
            save_checkpoint(&path, &outcome.model)?;
        }
        exemplars = selected.samples();
        snapshot = Some(outcome.snapshot);
        model = Some(outcome.model);
    }
    Ok(records)
}
