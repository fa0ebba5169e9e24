//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Layers are applied in order (defaults, then a config file, then command
//! line overrides), each later layer winning. See [`KEYS`] for every key and
//! its default.

use std::path::{Path, PathBuf};

use crate::classifier::{AlphaMode, Optimizer};
use crate::datastream::Source;
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::selection::PseudoLabelSource;

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed; all randomness derives from it"),
    (
        "strategy",
        "acil",
        "acil | random | coreset | badge | icarl | gdumb | rainbow | finetuning",
    ),
    ("budget", "100", "exemplar set size k"),
    ("num_seeds", "5", "independent replicas"),
    ("output_dir", "(unset)", "results directory"),
    (
        "warm_start",
        "false",
        "warm-start replay strategies from the previous model",
    ),
    (
        "checkpoint_dir",
        "(unset)",
        "save each episode's model here",
    ),
    ("stream.source", "synthetic", "synthetic | file"),
    (
        "stream.path",
        "(unset)",
        "dataset file for stream.source = file",
    ),
    ("stream.num_episodes", "5", "number of episodes"),
    ("stream.classes_per_episode", "2", "new classes per episode"),
    (
        "stream.labeled_per_class",
        "10",
        "labeled samples per class",
    ),
    (
        "stream.unlabeled_per_class",
        "200",
        "unlabeled samples per class",
    ),
    ("stream.test_per_class", "100", "test samples per class"),
    (
        "stream.feature_dim",
        "8",
        "feature dimension (synthetic only)",
    ),
    (
        "stream.num_classes",
        "auto",
        "synthetic classes available (auto = episodes x classes)",
    ),
    (
        "stream.sigma",
        "1.0",
        "synthetic within-class standard deviation",
    ),
    ("train.epochs", "100", "epochs per episode"),
    ("train.batch_size", "16", "mini-batch size"),
    ("train.learning_rate", "0.05", "step size"),
    ("train.lambda", "1.0", "distillation weight"),
    ("train.temperature", "2.0", "distillation temperature"),
    ("train.alpha", "auto", "class-weight scale; auto = |L| / C"),
    ("train.optimizer", "sgd", "sgd | adam"),
    ("train.hidden", "32", "hidden width; 0 = linear softmax"),
    ("selection.pseudo_labels", "current", "current | previous"),
];

/// Parses config text into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", no + 1),
                format!("expected `key = value`, found {raw:?}"),
            )
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text)
}

/// Parses a `key=value` command-line override.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must be key=value"))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, found {value:?}"),
        )),
    }
}

/// Builds an [`ExperimentConfig`] from layered `(key, value)` pairs.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    config: ExperimentConfig,
    source: String,
    path: Option<PathBuf>,
    num_classes: Option<usize>,
    sigma: f64,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        ConfigBuilder {
            config: ExperimentConfig::default(),
            source: "synthetic".into(),
            path: None,
            num_classes: None,
            sigma: 1.0,
        }
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply_all<'a>(
        mut self,
        pairs: impl IntoIterator<Item = &'a (String, String)>,
    ) -> Result<Self> {
        for (key, value) in pairs {
            self.set(key, value)?;
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.config;
        match key {
            "seed" => c.seed = parse(key, value)?,
            "strategy" => {
                c.strategy = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("unknown strategy {value:?}")))?
            }
            "budget" => c.budget = parse(key, value)?,
            "num_seeds" => c.num_seeds = parse(key, value)?,
            "output_dir" => c.output_dir = Some(PathBuf::from(value)),
            "warm_start" => c.warm_start = parse_bool(key, value)?,
            "checkpoint_dir" => c.checkpoint_dir = Some(PathBuf::from(value)),
            "stream.source" => match value {
                "synthetic" | "file" => self.source = value.to_string(),
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected synthetic or file, found {value:?}"),
                    ))
                }
            },
            "stream.path" => self.path = Some(PathBuf::from(value)),
            "stream.num_episodes" => c.stream.num_episodes = parse(key, value)?,
            "stream.classes_per_episode" => c.stream.classes_per_episode = parse(key, value)?,
            "stream.labeled_per_class" => c.stream.labeled_per_class = parse(key, value)?,
            "stream.unlabeled_per_class" => c.stream.unlabeled_per_class = parse(key, value)?,
            "stream.test_per_class" => c.stream.test_per_class = parse(key, value)?,
            "stream.feature_dim" => c.stream.feature_dim = parse(key, value)?,
            "stream.num_classes" => {
                self.num_classes = if value == "auto" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "stream.sigma" => self.sigma = parse(key, value)?,
            "train.epochs" => c.train.epochs = parse(key, value)?,
            "train.batch_size" => c.train.batch_size = parse(key, value)?,
            "train.learning_rate" => c.train.learning_rate = parse(key, value)?,
            "train.lambda" => c.train.lambda = parse(key, value)?,
            "train.temperature" => c.train.temperature = parse(key, value)?,
            "train.alpha" => {
                c.train.alpha = if value == "auto" {
                    AlphaMode::Balanced
                } else {
                    AlphaMode::Fixed(parse(key, value)?)
                }
            }
            "train.optimizer" => {
                c.train.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adam" => Optimizer::Adam,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected sgd or adam, found {value:?}"),
                        ))
                    }
                }
            }
            "train.hidden" => c.train.hidden = parse(key, value)?,
            "selection.pseudo_labels" => {
                c.pseudo_labels = match value {
                    "current" => PseudoLabelSource::Current,
                    "previous" => PseudoLabelSource::Previous,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected current or previous, found {value:?}"),
                        ))
                    }
                }
            }
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Resolves the stream source and validates the result.
    pub fn build(self) -> Result<ExperimentConfig> {
        let mut config = self.config;
        config.stream.source = match self.source.as_str() {
            "file" => Source::File(self.path.ok_or_else(|| {
                Error::config("stream.path", "required when stream.source = file")
            })?),
            _ => Source::SyntheticGaussian {
                num_classes: self.num_classes,
                sigma: self.sigma,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

/// Defaults, then each layer in order.
pub fn build_config(layers: &[&[(String, String)]]) -> Result<ExperimentConfig> {
    let mut builder = ConfigBuilder::new();
    for layer in layers {
        builder = builder.apply_all(layer.iter())?;
    }
    builder.build()
}
