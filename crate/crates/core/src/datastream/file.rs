//! Plain-text dataset files.
//!
//! ```text
//! d=<int> classes=<int>
//! <class_id>,<f_1>,...,<f_d>
//! ```
//!
//! One record per line. Blank lines are skipped. Class ids must be below the
//! header's class count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{split_into_episodes, ClassId, EpisodeData, Sample, SampleId, StreamConfig};
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub num_classes: usize,
    pub records: Vec<(ClassId, Vec<f64>)>,
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut dim = None;
    let mut classes = None;
    for field in line.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        let value: usize = value.parse().ok()?;
        match key {
            "d" => dim = Some(value),
            "classes" => classes = Some(value),
            _ => return None,
        }
    }
    Some((dim?, classes?))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_no, header) = lines.next().ok_or_else(|| {
        parse_err(
            1,
            "empty file, expected header `d=<int> classes=<int>`".into(),
        )
    })?;
    let (dim, num_classes) = parse_header(header.trim()).ok_or_else(|| {
        parse_err(
            header_no + 1,
            format!("bad header {header:?}, expected `d=<int> classes=<int>`"),
        )
    })?;
    if dim == 0 || num_classes == 0 {
        return Err(parse_err(
            header_no + 1,
            "d and classes must be positive".into(),
        ));
    }

    let mut records = Vec::new();
    for (no, line) in lines {
        let record = records.len();
        let mut fields = line.trim().split(',');
        let class: ClassId = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| parse_err(no + 1, format!("record {record}: bad class id")))?;
        if class >= num_classes {
            return Err(parse_err(
                no + 1,
                format!("record {record}: class id {class} >= classes={num_classes}"),
            ));
        }
        let features = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(no + 1, format!("record {record}: {e}")))?;
        if features.len() != dim {
            return Err(parse_err(
                no + 1,
                format!(
                    "record {record}: expected {dim} features, found {}",
                    features.len()
                ),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(
                no + 1,
                format!("record {record}: non-finite feature"),
            ));
        }
        records.push((class, features));
    }
    Ok(Dataset {
        dim,
        num_classes,
        records,
    })
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "d={} classes={}", dataset.dim, dataset.num_classes).unwrap();
    for (class, features) in &dataset.records {
        write!(out, "{class}").unwrap();
        for v in features {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Loads a dataset file and carves it into episodes. Sample ids are record
/// indices in file order.
pub fn load_file_stream(path: &Path, config: &StreamConfig) -> Result<Vec<EpisodeData>> {
    config.validate()?;
    let dataset = read_dataset(path)?;
    let mut pools: Vec<(ClassId, Vec<Sample>)> =
        (0..dataset.num_classes).map(|c| (c, Vec::new())).collect();
    for (index, (class, features)) in dataset.records.into_iter().enumerate() {
        pools[class]
            .1
            .push(Sample::new(index as SampleId, features, class));
    }
    pools.retain(|(_, samples)| !samples.is_empty());
    split_into_episodes(pools, config)
}
