//! Datasets, training, evaluation, threshold tuning, ablations and
//! checkpoints.

mod ablation;
mod checkpoint;
mod dataset;
mod metrics;
pub mod toygen;
mod train;

pub use ablation::{run_ablation, AblationGrid, AblationRow, AblationVariant};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use dataset::{load_dataset, CloneType, ClonePair, Dataset};
pub use metrics::{evaluate, metrics_from_scores, score_pairs, tune_threshold, Metrics, TypeRecall};
pub use train::{history_csv, split_pairs, train, EpochRecord, Splits, TrainConfig, TrainOutcome};

use std::path::PathBuf;

use crate::graphs::GraphError;
use crate::model::ModelError;
use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no pairs")]
    NoPairs,
    #[error("threshold tuning needs at least one clone and one non-clone pair")]
    DegenerateLabels,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }
}
