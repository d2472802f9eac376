//! Control-flow and data-flow graphs derived from an [`Ast`](crate::frontend::Ast).

pub mod bundle;
pub mod cfg;
pub mod dataflow;
pub mod dfg;
pub mod export;

pub use bundle::{build_bundle, GraphBundle};
pub use cfg::{basic_blocks, build_cfg, exit_node, BasicBlock, ENTRY};
pub use dataflow::{def_use, reaching_definitions, DefSite, DefUseInfo, ReachingSet, StmtDefUse};
pub use dfg::build_dfg;
pub use export::{to_dot, to_json};

use crate::frontend::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("no method declaration found")]
    NoMethod,
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
}
