use serde::Serialize;

use crate::frontend::{ast_to_graph, parse_source, Ast, CodeGraph, View};

use super::{build_cfg, build_dfg, def_use, GraphError};

/// The three graph views of one code fragment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphBundle {
    pub source_id: String,
    pub ast: CodeGraph,
    pub cfg: CodeGraph,
    pub dfg: CodeGraph,
}

impl GraphBundle {
    pub fn from_ast(ast: &Ast, source_id: &str) -> Result<Self, GraphError> {
        let cfg = build_cfg(ast)?;
        let dfg = build_dfg(ast, &cfg, &def_use(ast));
        Ok(GraphBundle {
            source_id: source_id.to_string(),
            ast: ast_to_graph(ast),
            cfg,
            dfg,
        })
    }

    pub fn view(&self, view: View) -> &CodeGraph {
        match view {
            View::Ast => &self.ast,
            View::Cfg => &self.cfg,
            View::Dfg => &self.dfg,
        }
    }
}

pub fn build_bundle(source: &str, id: &str) -> Result<GraphBundle, GraphError> {
    GraphBundle::from_ast(&parse_source(source)?, id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::EdgeKind;

    #[test]
    fn bundle_views() {
        let src = "void f() { a = 1; b = a; }";
        let b = build_bundle(src, "x").unwrap();
        assert_eq!(b.ast.nodes.len(), parse_source(src).unwrap().nodes.len());
        assert!(!b.cfg.edges.iter().any(|e| e.kind == EdgeKind::BranchTrue));
        assert_eq!(b.dfg.edges.len(), 1);
        for v in View::ALL {
            assert_eq!(b.view(v).view, v);
            b.view(v).validate().unwrap();
        }
        assert_eq!(b, build_bundle(src, "x").unwrap());
    }

    #[test]
    fn errors_propagate() {
        assert!(matches!(build_bundle("void f( {", "x"), Err(GraphError::Frontend(_))));
    }
}
