//! Control-flow graphs over basic blocks.
//!
//! Node layout: `0` is Entry, `1..=k` are basic blocks in creation order and
//! `k + 1` is Exit. Edge kinds:
//! - `Seq`: fall-through, `break`, and `continue` into a for-loop update block
//! - `BranchTrue` / `BranchFalse`: out of `if`/loop tests; switch arms get
//!   `BranchTrue`, the default arm (or the switch exit) gets `BranchFalse`
//! - `LoopBack`: every edge back into a loop test (end of body, update
//!   block, `continue` in loops without an update)
//! - `Exit`: `return` and falling off the end of a method

use std::collections::VecDeque;

use crate::frontend::{Ast, AstKind, CodeGraph, EdgeKind, NodeId, View};

use super::GraphError;

pub const ENTRY: usize = 0;

/// A maximal straight-line run of statements; only the last one may
/// transfer control.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub stmts: Vec<NodeId>,
}

/// Exit node id of a graph produced by [`build_cfg`].
pub fn exit_node(cfg: &CodeGraph) -> usize {
    cfg.nodes.len() - 1
}

/// Basic blocks (excluding Entry and Exit) with their member statements.
pub fn basic_blocks(cfg: &CodeGraph) -> Vec<BasicBlock> {
    cfg.nodes
        .iter()
        .filter(|n| n.kind == "BasicBlock")
        .map(|n| BasicBlock {
            id: n.id,
            stmts: n.members.clone(),
        })
        .collect()
}

struct LoopCtx {
    breaks: Vec<usize>,
    continues: Vec<usize>,
    /// False for switch, which catches `break` but not `continue`.
    is_loop: bool,
}

struct Builder<'a> {
    ast: &'a Ast,
    blocks: Vec<Vec<NodeId>>,
    edges: Vec<(usize, usize, EdgeKind)>,
    pending: Vec<(usize, EdgeKind)>,
    current: Option<usize>,
    ctx: Vec<LoopCtx>,
}

// Internal block ids: 0 = Entry, 1 = Exit, real blocks from 2.
const B_ENTRY: usize = 0;
const B_EXIT: usize = 1;

impl<'a> Builder<'a> {
    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    /// Resolves pending edges into `target`, rewriting `Seq` to `seq_as`.
    fn connect_pending(&mut self, target: usize, seq_as: EdgeKind) {
        for (src, kind) in std::mem::take(&mut self.pending) {
            let kind = if kind == EdgeKind::Seq { seq_as } else { kind };
            self.edges.push((src, target, kind));
        }
    }

    fn append(&mut self, stmt: NodeId) -> usize {
        let b = match self.current {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.connect_pending(b, EdgeKind::Seq);
                self.current = Some(b);
                b
            }
        };
        self.blocks[b].push(stmt);
        b
    }

    /// Ends the current block; the next statement starts a new one.
    fn flush(&mut self) {
        if let Some(b) = self.current.take() {
            self.pending.push((b, EdgeKind::Seq));
        }
    }

    /// Ends the current block and returns everything that falls out of it.
    fn take_outflow(&mut self) -> Vec<(usize, EdgeKind)> {
        self.flush();
        std::mem::take(&mut self.pending)
    }

    fn visit(&mut self, id: NodeId) -> Result<(), GraphError> {
        let ast = self.ast;
        let children = ast.children(id);
        match ast.kind(id) {
            AstKind::Block => {
                for &c in children {
                    self.visit(c)?;
                }
            }
            AstKind::LocalVariableDeclaration
            | AstKind::ExpressionStatement
            | AstKind::EmptyStatement => {
                self.append(id);
            }
            AstKind::IfStatement => {
                let cond = self.append(id);
                self.current = None;
                self.pending = vec![(cond, EdgeKind::BranchTrue)];
                self.visit(children[1])?;
                let mut out = self.take_outflow();
                self.pending = vec![(cond, EdgeKind::BranchFalse)];
                if let Some(&els) = children.get(2) {
                    self.visit(els)?;
                }
                out.extend(self.take_outflow());
                self.pending = out;
            }
            AstKind::WhileStatement => {
                self.flush();
                let test = self.append(id);
                self.current = None;
                self.run_loop(test, None, children[1])?;
            }
            AstKind::ForStatement => {
                let init = children[0];
                for &c in ast.children(init) {
                    self.append(c);
                }
                self.flush();
                let test = self.append(id);
                self.current = None;
                let update = children[children.len() - 2];
                let body = children[children.len() - 1];
                self.run_loop(test, Some(update), body)?;
            }
            AstKind::SwitchStatement => {
                let test = self.append(id);
                self.current = None;
                self.ctx.push(LoopCtx {
                    breaks: Vec::new(),
                    continues: Vec::new(),
                    is_loop: false,
                });
                let mut fallthrough: Vec<(usize, EdgeKind)> = Vec::new();
                let mut has_default = false;
                for &arm in &children[1..] {
                    let is_default = ast.kind(arm) == AstKind::SwitchDefault;
                    has_default |= is_default;
                    let entry_kind = if is_default {
                        EdgeKind::BranchFalse
                    } else {
                        EdgeKind::BranchTrue
                    };
                    self.pending = fallthrough;
                    self.pending.push((test, entry_kind));
                    self.append(arm);
                    let stmts = if is_default {
                        ast.children(arm)
                    } else {
                        &ast.children(arm)[1..]
                    };
                    for &s in stmts {
                        self.visit(s)?;
                    }
                    fallthrough = self.take_outflow();
                }
                let ctx = self.ctx.pop().expect("pushed above");
                self.pending = fallthrough;
                self.pending
                    .extend(ctx.breaks.into_iter().map(|b| (b, EdgeKind::Seq)));
                if !has_default {
                    self.pending.push((test, EdgeKind::BranchFalse));
                }
            }
            AstKind::ReturnStatement => {
                let b = self.append(id);
                self.edges.push((b, B_EXIT, EdgeKind::Exit));
                self.current = None;
                self.pending.clear();
            }
            AstKind::BreakStatement => {
                let b = self.append(id);
                let ctx = self
                    .ctx
                    .last_mut()
                    .ok_or(GraphError::UnsupportedConstruct("break outside loop or switch".into()))?;
                ctx.breaks.push(b);
                self.current = None;
                self.pending.clear();
            }
            AstKind::ContinueStatement => {
                let b = self.append(id);
                let ctx = self
                    .ctx
                    .iter_mut()
                    .rev()
                    .find(|c| c.is_loop)
                    .ok_or(GraphError::UnsupportedConstruct("continue outside loop".into()))?;
                ctx.continues.push(b);
                self.current = None;
                self.pending.clear();
            }
            other => {
                return Err(GraphError::UnsupportedConstruct(format!(
                    "{other} in statement position"
                )))
            }
        }
        Ok(())
    }

    fn run_loop(
        &mut self,
        test: usize,
        update: Option<NodeId>,
        body: NodeId,
    ) -> Result<(), GraphError> {
        self.ctx.push(LoopCtx {
            breaks: Vec::new(),
            continues: Vec::new(),
            is_loop: true,
        });
        self.pending = vec![(test, EdgeKind::BranchTrue)];
        self.visit(body)?;
        let ctx = self.ctx.pop().expect("pushed above");
        let mut back = self.take_outflow();
        let update_stmts = update.map(|u| self.ast.children(u)).unwrap_or(&[]);
        if update_stmts.is_empty() {
            back.extend(ctx.continues.iter().map(|&c| (c, EdgeKind::LoopBack)));
        } else {
            back.extend(ctx.continues.iter().map(|&c| (c, EdgeKind::Seq)));
            self.pending = back;
            for &u in update_stmts {
                self.append(u);
            }
            back = self.take_outflow();
        }
        self.pending = back;
        self.connect_pending(test, EdgeKind::LoopBack);
        self.pending = vec![(test, EdgeKind::BranchFalse)];
        self.pending
            .extend(ctx.breaks.into_iter().map(|b| (b, EdgeKind::Seq)));
        Ok(())
    }
}

/// Builds the block-level CFG of every method in `ast`. Entry falls into
/// each method's first block; all terminations lead to a single Exit.
pub fn build_cfg(ast: &Ast) -> Result<CodeGraph, GraphError> {
    let methods = ast.methods();
    if methods.is_empty() {
        return Err(GraphError::NoMethod);
    }
    let mut b = Builder {
        ast,
        blocks: vec![Vec::new(), Vec::new()],
        edges: Vec::new(),
        pending: Vec::new(),
        current: None,
        ctx: Vec::new(),
    };
    for m in methods {
        let body = *ast.children(m).last().expect("method has a body");
        b.pending = vec![(B_ENTRY, EdgeKind::Seq)];
        b.current = None;
        b.visit(body)?;
        b.flush();
        b.connect_pending(B_EXIT, EdgeKind::Exit);
    }

    // Keep blocks reachable from Entry; Exit always stays.
    let nb = b.blocks.len();
    let mut reach = vec![false; nb];
    reach[B_ENTRY] = true;
    reach[B_EXIT] = true;
    let mut queue = VecDeque::from([B_ENTRY]);
    while let Some(u) = queue.pop_front() {
        for &(s, d, _) in &b.edges {
            if s == u && !reach[d] {
                reach[d] = true;
                queue.push_back(d);
            }
        }
    }
    let kept: Vec<usize> = (2..nb).filter(|&i| reach[i]).collect();
    let mut remap = vec![usize::MAX; nb];
    remap[B_ENTRY] = 0;
    for (k, &old) in kept.iter().enumerate() {
        remap[old] = k + 1;
    }
    remap[B_EXIT] = kept.len() + 1;

    let mut g = CodeGraph::new(View::Cfg);
    g.add_node("Entry", None, None);
    for &old in &kept {
        let stmts = b.blocks[old].clone();
        let id = g.add_node("BasicBlock", None, stmts.first().copied());
        g.nodes[id].member_kinds = stmts.iter().map(|&s| ast.kind(s).as_str().to_string()).collect();
        g.nodes[id].members = stmts;
    }
    g.add_node("Exit", None, None);
    for (s, d, k) in b.edges {
        if reach[s] && reach[d] {
            g.add_edge(remap[s], remap[d], k);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use EdgeKind::*;

    fn cfg_of(body: &str) -> (Ast, CodeGraph) {
        let ast = parse_source(&format!("void f(boolean c, int k) {body}")).unwrap();
        let g = build_cfg(&ast).unwrap();
        g.validate().unwrap();
        (ast, g)
    }

    fn edges(g: &CodeGraph) -> Vec<(usize, usize, EdgeKind)> {
        let mut e: Vec<_> = g.edges.iter().map(|e| (e.src, e.dst, e.kind)).collect();
        e.sort();
        e
    }

    fn block_sizes(g: &CodeGraph) -> Vec<usize> {
        basic_blocks(g).iter().map(|b| b.stmts.len()).collect()
    }

    #[test]
    fn straight_line() {
        let (_, g) = cfg_of("{a=1; b=2;}");
        assert_eq!(g.node_count(), 3);
        assert_eq!(edges(&g), vec![(0, 1, Seq), (1, 2, Exit)]);
        assert_eq!(block_sizes(&g), vec![2]);
    }

    #[test]
    fn if_else_diamond() {
        let (_, g) = cfg_of("{if(c) x=1; else x=2; y=3;}");
        // 0 Entry, 1 cond, 2 then, 3 else, 4 join, 5 Exit
        assert_eq!(g.node_count(), 6);
        assert_eq!(
            edges(&g),
            vec![
                (0, 1, Seq),
                (1, 2, BranchTrue),
                (1, 3, BranchFalse),
                (2, 4, Seq),
                (3, 4, Seq),
                (4, 5, Exit)
            ]
        );
    }

    #[test]
    fn while_loop() {
        let (_, g) = cfg_of("{while(c) x=x+1; r=0;}");
        // 0 Entry, 1 test, 2 body, 3 after, 4 Exit
        assert_eq!(
            edges(&g),
            vec![
                (0, 1, Seq),
                (1, 2, BranchTrue),
                (1, 3, BranchFalse),
                (2, 1, LoopBack),
                (3, 4, Exit)
            ]
        );
    }

    #[test]
    fn well_formedness_on_nested_control() {
        let (ast, g) = cfg_of(
            "{int i=0; while(i<k){ if(c) { i++; continue; } for(int j=0;j<i;j++){ if(j==2) break; } i=i+2; } switch(k){case 1: i=0; case 2: i=1; break; default: i=3;} return;}",
        );
        let exit = exit_node(&g);
        assert_eq!(g.in_degree(ENTRY), 0);
        assert_eq!(g.out_degree(exit), 0);
        let mut conditionals = 0;
        for b in basic_blocks(&g) {
            let last = ast.kind(*b.stmts.last().unwrap());
            let succ: Vec<_> = g.successors(b.id).map(|e| e.kind).collect();
            let count = |k| succ.iter().filter(|s| **s == k).count();
            if matches!(last, AstKind::IfStatement | AstKind::WhileStatement | AstKind::ForStatement) {
                conditionals += 1;
                assert_eq!((count(BranchTrue), count(BranchFalse)), (1, 1), "block {}", b.id);
            }
        }
        assert_eq!(conditionals, 4);
    }

    #[test]
    fn unreachable_code_is_dropped() {
        let (_, g) = cfg_of("{ if(c) return; else return; k = 1; }");
        assert_eq!(block_sizes(&g), vec![1, 1, 1]);
        assert_eq!(g.in_degree(exit_node(&g)), 2);
    }

    #[test]
    fn empty_method_goes_straight_to_exit() {
        let (_, g) = cfg_of("{}");
        assert_eq!(edges(&g), vec![(0, 1, Exit)]);
    }

    #[test]
    fn missing_method_is_an_error() {
        let ast = crate::frontend::Ast {
            nodes: vec![crate::frontend::AstNode {
                id: 0,
                kind: AstKind::Literal,
                token: None,
                children: vec![],
            }],
            root: 0,
        };
        assert!(matches!(build_cfg(&ast), Err(GraphError::NoMethod)));
    }
}
