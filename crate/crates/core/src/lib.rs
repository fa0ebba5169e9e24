//! Active class-incremental learning.
//!
//! Data arrives in episodes of previously unseen classes. Each episode brings
//! a small labeled set, a large unlabeled set and the exemplar set kept from
//! the previous episode. After training, a fixed-size exemplar set is chosen
//! for the next episode; only the unlabeled samples it takes must be
//! annotated.
//!
//! * [`datastream`]: synthetic and file-backed episodic streams, annotation
//!   accounting.
//! * [`classifier`]: softmax MLP with class-weighted cross-entropy and
//!   distillation.
//! * [`selection`]: budget splitting, entropy-weighted k-means selection and
//!   comparison strategies.
//! * [`harness`]: the episode loop, metrics and result files.
//! * [`config`]: `key = value` experiment configuration.

pub mod classifier;
pub mod config;
pub mod datastream;
pub mod error;
pub mod harness;
pub mod io;
pub mod seed;
pub mod selection;

pub use error::{Error, Result};
