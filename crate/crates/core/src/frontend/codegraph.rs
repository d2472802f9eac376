use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Ast, AstKind, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Ast,
    Cfg,
    Dfg,
}

impl View {
    pub const ALL: [View; 3] = [View::Ast, View::Cfg, View::Dfg];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Ast => "ast",
            View::Cfg => "cfg",
            View::Dfg => "dfg",
        }
    }

    pub fn parse(s: &str) -> Option<View> {
        match s.to_ascii_lowercase().as_str() {
            "ast" => Some(View::Ast),
            "cfg" => Some(View::Cfg),
            "dfg" => Some(View::Dfg),
            _ => None,
        }
    }

    fn allows(self, kind: EdgeKind) -> bool {
        match self {
            View::Ast => kind == EdgeKind::Child,
            View::Cfg => matches!(
                kind,
                EdgeKind::Seq
                    | EdgeKind::BranchTrue
                    | EdgeKind::BranchFalse
                    | EdgeKind::LoopBack
                    | EdgeKind::Exit
            ),
            View::Dfg => kind == EdgeKind::DataDep,
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    Child,
    Seq,
    BranchTrue,
    BranchFalse,
    LoopBack,
    Exit,
    DataDep,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Child => "Child",
            EdgeKind::Seq => "Seq",
            EdgeKind::BranchTrue => "BranchTrue",
            EdgeKind::BranchFalse => "BranchFalse",
            EdgeKind::LoopBack => "LoopBack",
            EdgeKind::Exit => "Exit",
            EdgeKind::DataDep => "DataDep",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub id: usize,
    pub kind: String,
    pub token: Option<String>,
    pub stmt_ref: Option<NodeId>,
    /// Member statements of a CFG basic block, in order; empty otherwise.
    #[serde(skip)]
    pub members: Vec<NodeId>,
    /// Kind labels of `members`.
    #[serde(skip)]
    pub member_kinds: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

/// Directed graph with labeled nodes and typed edges; one per view.
/// Node ids are dense indices into `nodes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodeGraph {
    pub view: View,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

impl CodeGraph {
    pub fn new(view: View) -> Self {
        CodeGraph {
            view,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, kind: &str, token: Option<String>, stmt_ref: Option<NodeId>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(GraphNode {
            id,
            kind: kind.to_string(),
            token,
            stmt_ref,
            members: Vec::new(),
            member_kinds: Vec::new(),
        });
        id
    }

    /// Adds an edge unless the identical triple already exists.
    pub fn add_edge(&mut self, src: usize, dst: usize, kind: EdgeKind) -> bool {
        let e = Edge { src, dst, kind };
        if self.edges.contains(&e) {
            return false;
        }
        self.edges.push(e);
        true
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn successors(&self, id: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == id)
    }

    pub fn predecessors(&self, id: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == id)
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.successors(id).count()
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.predecessors(id).count()
    }

    /// Dense 0/1 directed adjacency (edge kinds collapsed).
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut a = vec![vec![false; n]; n];
        for e in &self.edges {
            a[e.src][e.dst] = true;
        }
        a
    }

    /// Checks endpoint validity, uniqueness of (src, dst, kind) and the
    /// per-view edge-kind vocabulary.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node at index {i} has id {}", n.id));
            }
        }
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                return Err(format!("edge {e:?} references a missing node"));
            }
            if !seen.insert(*e) {
                return Err(format!("duplicate edge {e:?}"));
            }
            if !self.view.allows(e.kind) {
                return Err(format!("edge kind {} not allowed in {} view", e.kind, self.view));
            }
        }
        Ok(())
    }
}

/// One graph node per AST node (same ids) and one `Child` edge per
/// parent-child link.
pub fn ast_to_graph(ast: &Ast) -> CodeGraph {
    let mut g = CodeGraph::new(View::Ast);
    for n in &ast.nodes {
        g.add_node(n.kind.as_str(), n.token.clone(), Some(n.id));
    }
    for n in &ast.nodes {
        for &c in &n.children {
            g.add_edge(n.id, c, EdgeKind::Child);
        }
    }
    g
}

/// Statement-like AST kinds; used as node labels in CFG blocks and DFG nodes.
pub fn is_statement_kind(kind: AstKind) -> bool {
    use AstKind::*;
    matches!(
        kind,
        LocalVariableDeclaration
            | ExpressionStatement
            | IfStatement
            | WhileStatement
            | ForStatement
            | SwitchStatement
            | SwitchCase
            | SwitchDefault
            | ReturnStatement
            | BreakStatement
            | ContinueStatement
            | EmptyStatement
    )
}
