//! The Siamese multi-view graph network: residual GCN and self-attention per
//! view, gated cross-attention between paired views, Set2Set fusion and a
//! cosine score.

mod config;
mod layers;
mod pair;
mod params;

pub use config::{AttnScale, ModelConfig, Pooling};
pub use layers::{
    cross_attention, embed_nodes, fuse_and_pool, gru_update, intra_attention, mse_loss,
    residual_gcn, similarity,
};
pub use pair::{forward_pair, score_pair};
pub use params::init_params;

use crate::numcore::NumError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("index {index} outside a table of {rows} rows")]
    IndexOutOfVocab { index: usize, rows: usize },
    #[error("cross-attention between different views ({0} and {1})")]
    ViewMismatch(String, String),
    #[error("graph set to pool is empty")]
    EmptyGraph,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
}
