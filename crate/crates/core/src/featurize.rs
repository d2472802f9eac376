//! Node vocabulary, initial feature indices and normalized adjacency.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::frontend::{CodeGraph, View};
use crate::graphs::GraphBundle;
use crate::numcore::RowRecipe;

pub const DEFAULT_TOKEN_BUCKETS: usize = 1024;
pub const BASIC_BLOCK: &str = "BasicBlock";

/// 64-bit FNV-1a.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub kind_to_index: BTreeMap<String, usize>,
    pub token_bucket_count: usize,
}

impl Vocab {
    /// Kinds are indexed in sorted order.
    pub fn from_kinds<I, S>(kinds: I, token_bucket_count: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = kinds.into_iter().map(Into::into).collect();
        Vocab {
            kind_to_index: sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect(),
            token_bucket_count: token_bucket_count.max(1),
        }
    }

    /// Index reserved for kinds not seen when the vocabulary was built.
    pub fn unk(&self) -> usize {
        self.kind_to_index.len()
    }

    /// Rows of the kind embedding table, UNK included.
    pub fn kind_rows(&self) -> usize {
        self.kind_to_index.len() + 1
    }

    pub fn kind_index(&self, kind: &str) -> usize {
        self.kind_to_index.get(kind).copied().unwrap_or(self.unk())
    }

    pub fn token_index(&self, token: &str) -> usize {
        (fnv1a(token) % self.token_bucket_count as u64) as usize
    }
}

pub fn build_vocab<'a, I>(corpus: I, token_bucket_count: usize) -> Vocab
where
    I: IntoIterator<Item = &'a GraphBundle>,
{
    let mut kinds = BTreeSet::new();
    for b in corpus {
        for v in View::ALL {
            for n in &b.view(v).nodes {
                kinds.insert(n.kind.clone());
                kinds.extend(n.member_kinds.iter().cloned());
            }
        }
    }
    kinds.insert(BASIC_BLOCK.to_string());
    Vocab::from_kinds(kinds, token_bucket_count)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    /// `D^-1/2 (A + A^T + I) D^-1/2`
    #[default]
    Symmetric,
    /// `D^-1 (A^T + I)`: each node averages itself and its predecessors.
    Directed,
}

pub fn normalized_adjacency(g: &CodeGraph) -> Array2<f64> {
    normalized_adjacency_with(g, AdjacencyMode::Symmetric)
}

pub fn normalized_adjacency_with(g: &CodeGraph, mode: AdjacencyMode) -> Array2<f64> {
    let n = g.nodes.len();
    let mut a = Array2::<f64>::eye(n);
    for e in &g.edges {
        if e.src == e.dst {
            continue;
        }
        a[[e.dst, e.src]] = 1.0;
        if mode == AdjacencyMode::Symmetric {
            a[[e.src, e.dst]] = 1.0;
        }
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    match mode {
        AdjacencyMode::Symmetric => {
            let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
            for ((i, j), x) in a.indexed_iter_mut() {
                *x *= s[i] * s[j];
            }
        }
        AdjacencyMode::Directed => {
            for ((i, _), x) in a.indexed_iter_mut() {
                *x /= deg[i];
            }
        }
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizedGraph {
    pub view: View,
    pub kind_indices: Vec<usize>,
    pub token_indices: Vec<Option<usize>>,
    /// Member statement kind indices for BasicBlock nodes, empty otherwise.
    pub block_members: Vec<Vec<usize>>,
    pub adj_norm: Array2<f64>,
}

impl FeaturizedGraph {
    pub fn len(&self) -> usize {
        self.kind_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind_indices.is_empty()
    }

    /// Rows to gather from the kind table: the node's own kind, plus the
    /// mean of member kinds for basic blocks.
    pub fn kind_recipes(&self) -> Vec<RowRecipe> {
        self.kind_indices
            .iter()
            .zip(&self.block_members)
            .map(|(&k, members)| {
                let mut r = vec![(k, 1.0)];
                let w = 1.0 / members.len().max(1) as f64;
                r.extend(members.iter().map(|&m| (m, w)));
                r
            })
            .collect()
    }

    /// Rows to gather from the token table; empty for token-less nodes.
    pub fn token_recipes(&self) -> Vec<RowRecipe> {
        self.token_indices
            .iter()
            .map(|t| t.map(|t| vec![(t, 1.0)]).unwrap_or_default())
            .collect()
    }
}

pub fn featurize(g: &CodeGraph, vocab: &Vocab) -> FeaturizedGraph {
    featurize_with(g, vocab, AdjacencyMode::Symmetric)
}

pub fn featurize_with(g: &CodeGraph, vocab: &Vocab, mode: AdjacencyMode) -> FeaturizedGraph {
    FeaturizedGraph {
        view: g.view,
        kind_indices: g.nodes.iter().map(|n| vocab.kind_index(&n.kind)).collect(),
        token_indices: g
            .nodes
            .iter()
            .map(|n| n.token.as_deref().map(|t| vocab.token_index(t)))
            .collect(),
        block_members: g
            .nodes
            .iter()
            .map(|n| n.member_kinds.iter().map(|k| vocab.kind_index(k)).collect())
            .collect(),
        adj_norm: normalized_adjacency_with(g, mode),
    }
}

/// Featurized AST, CFG and DFG of one fragment.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizedBundle {
    pub ast: FeaturizedGraph,
    pub cfg: FeaturizedGraph,
    pub dfg: FeaturizedGraph,
}

impl FeaturizedBundle {
    pub fn view(&self, view: View) -> &FeaturizedGraph {
        match view {
            View::Ast => &self.ast,
            View::Cfg => &self.cfg,
            View::Dfg => &self.dfg,
        }
    }
}

pub fn featurize_bundle(b: &GraphBundle, vocab: &Vocab, mode: AdjacencyMode) -> FeaturizedBundle {
    FeaturizedBundle {
        ast: featurize_with(&b.ast, vocab, mode),
        cfg: featurize_with(&b.cfg, vocab, mode),
        dfg: featurize_with(&b.dfg, vocab, mode),
    }
}
