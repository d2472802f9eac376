//! Dense tensors, reverse-mode autodiff, Adam, a plateau schedule and a
//! finite-difference gradient checker.

mod gradcheck;
pub mod optim;
pub mod rng;
pub mod serial;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use optim::{adam_step, AdamConfig, PlateauScheduler};
pub use rng::Rng;
pub use tape::{Mode, RowRecipe, Tape, Var};
pub use tensor::{AdamState, ParameterSet, Tensor};

/// Norms below this are treated as zero by cosine similarity.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("index {index} out of range for table of {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("zero-norm vector in cosine similarity")]
    ZeroVector,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed tensor container: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
