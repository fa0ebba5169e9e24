//! Results CSVs.
//!
//! Per-run rows use [`RESULTS_HEADER`]. Aggregates report the mean and sample
//! standard deviation across seeds for each `(strategy, episode)`. Accuracies
//! are written with nine decimals and aggregated from those printed values,
//! so re-aggregating a results file reproduces the aggregate file exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::MetricsRecord;
use crate::error::{Error, Result};
use crate::selection::Strategy;

pub const RESULTS_COLUMNS: [&str; 7] = [
    "strategy",
    "seed",
    "episode",
    "incremental_accuracy",
    "retention",
    "annotated_this_episode",
    "cumulative_annotated",
];
pub const RESULTS_HEADER: &str =
    "strategy,seed,episode,incremental_accuracy,retention,annotated_this_episode,cumulative_annotated";
pub const AGGREGATE_HEADER: &str = "strategy,episode,num_seeds,mean_incremental_accuracy,std_incremental_accuracy,mean_retention,std_retention,mean_annotated_this_episode,std_annotated_this_episode,mean_cumulative_annotated,std_cumulative_annotated";

fn fmt_acc(x: f64) -> String {
    format!("{x:.9}")
}

fn quantize(x: f64) -> f64 {
    fmt_acc(x).parse().expect("formatted float parses")
}

pub fn format_results(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    writeln!(out, "{RESULTS_HEADER}").unwrap();
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.seed,
            r.episode,
            fmt_acc(r.incremental_accuracy),
            fmt_acc(r.retention),
            r.annotated_this_episode,
            r.cumulative_annotated
        )
        .unwrap();
    }
    out
}

pub fn read_results(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_results_str(path, &text)
}

/// Parses a results CSV, reporting the first offending column on mismatch.
pub fn read_results_str(path: &Path, text: &str) -> Result<Vec<MetricsRecord>> {
    let schema = |column: &str, message: String| Error::Schema {
        path: path.to_path_buf(),
        column: column.to_string(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| schema(RESULTS_COLUMNS[0], "empty results file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    for (i, expected) in RESULTS_COLUMNS.iter().enumerate() {
        match columns.get(i) {
            Some(c) if c == expected => {}
            Some(c) => {
                return Err(schema(
                    expected,
                    format!("found column `{c}` in position {i}"),
                ))
            }
            None => return Err(schema(expected, "missing column".into())),
        }
    }
    if let Some(extra) = columns.get(RESULTS_COLUMNS.len()) {
        return Err(schema(extra, "unexpected column".into()));
    }

    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != RESULTS_COLUMNS.len() {
            let column = RESULTS_COLUMNS
                .get(fields.len())
                .unwrap_or(&RESULTS_COLUMNS[6]);
            return Err(schema(
                column,
                format!("row {}: expected 7 fields, found {}", row + 1, fields.len()),
            ));
        }
        let bad = |i: usize| {
            schema(
                RESULTS_COLUMNS[i],
                format!("row {}: bad value {:?}", row + 1, fields[i]),
            )
        };
        let strategy: Strategy = fields[0].parse().map_err(|_| bad(0))?;
        let seed: u64 = fields[1].parse().map_err(|_| bad(1))?;
        let episode: usize = fields[2].parse().map_err(|_| bad(2))?;
        let acc: f64 = fields[3].parse().map_err(|_| bad(3))?;
        let ret: f64 = fields[4].parse().map_err(|_| bad(4))?;
        let annotated: usize = fields[5].parse().map_err(|_| bad(5))?;
        let cumulative: usize = fields[6].parse().map_err(|_| bad(6))?;
        if !(0.0..=1.0).contains(&acc) {
            return Err(bad(3));
        }
        if !(0.0..=1.0).contains(&ret) {
            return Err(bad(4));
        }
        records.push(MetricsRecord {
            strategy,
            seed,
            episode,
            incremental_accuracy: acc,
            retention: ret,
            annotated_this_episode: annotated,
            cumulative_annotated: cumulative,
            exemplars: 0,
            exemplars_from_unlabeled: 0,
            first_epoch_loss: f64::NAN,
            final_epoch_loss: f64::NAN,
        });
    }
    if records.is_empty() {
        return Err(schema(RESULTS_COLUMNS[0], "no result rows".into()));
    }
    Ok(records)
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub episode: usize,
    pub num_seeds: usize,
    pub accuracy: (f64, f64),
    pub retention: (f64, f64),
    pub annotated: (f64, f64),
    pub cumulative: (f64, f64),
}

/// Per-`(strategy, episode)` statistics. Strategies keep their order of first
/// appearance; episodes ascend.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<AggregateRow> {
    let mut strategies: Vec<Strategy> = Vec::new();
    for r in records {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy);
        }
    }
    let mut rows = Vec::new();
    for strategy in strategies {
        let mine: Vec<&MetricsRecord> = records.iter().filter(|r| r.strategy == strategy).collect();
        let mut episodes: Vec<usize> = mine.iter().map(|r| r.episode).collect();
        episodes.sort_unstable();
        episodes.dedup();
        for episode in episodes {
            let at: Vec<&&MetricsRecord> = mine.iter().filter(|r| r.episode == episode).collect();
            let stat = |f: &dyn Fn(&MetricsRecord) -> f64| {
                mean_std(&at.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            rows.push(AggregateRow {
                strategy,
                episode,
                num_seeds: at.len(),
                accuracy: stat(&|r| quantize(r.incremental_accuracy)),
                retention: stat(&|r| quantize(r.retention)),
                annotated: stat(&|r| r.annotated_this_episode as f64),
                cumulative: stat(&|r| r.cumulative_annotated as f64),
            });
        }
    }
    rows
}

pub fn format_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{AGGREGATE_HEADER}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
            r.strategy,
            r.episode,
            r.num_seeds,
            fmt_acc(r.accuracy.0),
            fmt_acc(r.accuracy.1),
            fmt_acc(r.retention.0),
            fmt_acc(r.retention.1),
            r.annotated.0,
            r.annotated.1,
            r.cumulative.0,
            r.cumulative.1
        )
        .unwrap();
    }
    out
}

/// `(episode, mean accuracy, std)` series for one strategy.
pub fn format_series(rows: &[AggregateRow], strategy: Strategy) -> String {
    let mut out = String::from("episode,mean_incremental_accuracy,std_incremental_accuracy\n");
    for r in rows.iter().filter(|r| r.strategy == strategy) {
        writeln!(
            out,
            "{},{},{}",
            r.episode,
            fmt_acc(r.accuracy.0),
            fmt_acc(r.accuracy.1)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub final_episode: usize,
    pub num_seeds: usize,
    pub accuracy: (f64, f64),
    pub retention: (f64, f64),
    /// Total annotations over the run (cumulative count at the last episode).
    pub total_annotated: (f64, f64),
}

/// Last-episode statistics per strategy.
pub fn final_summary(rows: &[AggregateRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for r in rows {
        let row = SummaryRow {
            strategy: r.strategy,
            final_episode: r.episode,
            num_seeds: r.num_seeds,
            accuracy: r.accuracy,
            retention: r.retention,
            total_annotated: r.cumulative,
        };
        match out.iter_mut().find(|s| s.strategy == r.strategy) {
            Some(existing) if existing.final_episode < r.episode => *existing = row,
            Some(_) => {}
            None => out.push(row),
        }
    }
    out
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "strategy,final_episode,num_seeds,mean_accuracy,std_accuracy,mean_retention,std_retention,mean_total_annotated,std_total_annotated\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{:.3}",
            r.strategy,
            r.final_episode,
            r.num_seeds,
            fmt_acc(r.accuracy.0),
            fmt_acc(r.accuracy.1),
            fmt_acc(r.retention.0),
            fmt_acc(r.retention.1),
            r.total_annotated.0,
            r.total_annotated.1
        )
        .unwrap();
    }
    out
}

/// Human-readable `mean ± std` table of final-episode results.
pub fn format_summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<12} {:>20} {:>20} {:>24}",
        "strategy", "accuracy", "retention", "annotated (total)"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<12} {:>20} {:>20} {:>24}",
            r.strategy.as_str(),
            format!("{:.4} ± {:.4}", r.accuracy.0, r.accuracy.1),
            format!("{:.4} ± {:.4}", r.retention.0, r.retention.1),
            format!("{:.1} ± {:.1}", r.total_annotated.0, r.total_annotated.1),
        )
        .unwrap();
    }
    out
}
