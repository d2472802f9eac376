//! Lexing and parsing of the supported Java subset, and the AST graph view.

pub mod ast;
pub mod codegraph;
pub mod lexer;
pub mod parser;

pub use ast::{Ast, AstKind, AstNode, NodeId};
pub use codegraph::{ast_to_graph, CodeGraph, Edge, EdgeKind, GraphNode, View};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("{line}:{col}: {message}")]
    Lex {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: expected {expected}, found `{found}`")]
    Syntax {
        expected: String,
        found: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: unsupported construct: {construct}")]
    Unsupported {
        construct: String,
        line: usize,
        col: usize,
    },
}

/// Tokenizes and parses in one step.
pub fn parse_source(source: &str) -> Result<Ast, FrontendError> {
    parse(&tokenize(source)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_and_comments_do_not_change_the_tree() {
        let a = parse_source("int f(int x){int y=x+1;return y;}").unwrap();
        let b = parse_source(
            "int f( int x )\n{\n  // add one\n  int y = x + 1; /* result */\n  return y;\n}\n",
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diagnostics_render_line_and_column() {
        let e = parse_source("int f(){\n  return }").unwrap_err();
        assert_eq!(e.to_string(), "2:10: expected expression, found `}`");
    }
}
