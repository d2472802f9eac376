use std::fmt::Write;

use crate::frontend::CodeGraph;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: nodes labeled `kind` or `kind:token`, edges labeled
/// with their kind.
pub fn to_dot(g: &CodeGraph) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", g.view).unwrap();
    for n in &g.nodes {
        let label = match &n.token {
            Some(t) => format!("{}:{}", n.kind, t),
            None => n.kind.clone(),
        };
        writeln!(out, "  n{} [label=\"{}\"];", n.id, escape(&label)).unwrap();
    }
    for e in &g.edges {
        writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.src, e.dst, e.kind).unwrap();
    }
    out.push_str("}\n");
    out
}

/// `{"view", "nodes": [{id, kind, token, stmt_ref}], "edges": [{src, dst, kind}]}`
pub fn to_json(g: &CodeGraph) -> String {
    serde_json::to_string_pretty(g).expect("graph serialization cannot fail")
}
