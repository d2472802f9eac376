use std::collections::BTreeMap;

use crate::frontend::{Ast, CodeGraph, EdgeKind, NodeId, View};

use super::dataflow::{reaching_definitions, DefSite, DefUseInfo};

/// Statement-level data-dependence graph. Node 0 is a synthetic Entry that
/// holds parameter definitions; every statement present in `cfg` follows in
/// source order. A `DataDep` edge runs from each definition to every use it
/// reaches. Edges are sorted by (src, dst).
pub fn build_dfg(ast: &Ast, cfg: &CodeGraph, info: &DefUseInfo) -> CodeGraph {
    let reaching = reaching_definitions(cfg, info);
    let mut g = CodeGraph::new(View::Dfg);
    g.add_node("Entry", None, None);
    let mut node_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &stmt in reaching.keys() {
        let n = ast.node(stmt);
        node_of.insert(stmt, g.add_node(n.kind.as_str(), n.token.clone(), Some(stmt)));
    }
    let site_node = |site: DefSite| match site {
        DefSite::Entry => 0,
        DefSite::Stmt(s) => node_of[&s],
    };
    for (&stmt, in_set) in &reaching {
        let Some(du) = info.get(stmt) else { continue };
        for (var, site) in in_set {
            if du.uses.contains(var) {
                g.add_edge(site_node(*site), node_of[&stmt], EdgeKind::DataDep);
            }
        }
    }
    g.edges.sort();
    g
}
