//! Def/use extraction and reaching-definitions analysis.

use std::collections::{BTreeMap, BTreeSet};

use crate::frontend::{Ast, AstKind, CodeGraph, NodeId};

use super::cfg::{basic_blocks, ENTRY};

/// Where a definition happens: the synthetic Entry statement (method
/// parameters) or a statement node of the AST.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefSite {
    Entry,
    Stmt(NodeId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StmtDefUse {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DefUseInfo {
    /// Parameters, defined by the synthetic Entry statement.
    pub entry_defs: BTreeSet<String>,
    pub stmts: BTreeMap<NodeId, StmtDefUse>,
}

impl DefUseInfo {
    pub fn get(&self, stmt: NodeId) -> Option<&StmtDefUse> {
        self.stmts.get(&stmt)
    }

    fn defs_at(&self, site: DefSite) -> Option<&BTreeSet<String>> {
        match site {
            DefSite::Entry => Some(&self.entry_defs),
            DefSite::Stmt(s) => self.stmts.get(&s).map(|d| &d.defs),
        }
    }
}

pub type ReachingSet = BTreeSet<(String, DefSite)>;

/// Defs and uses of every statement the CFG can hold. Compound statements
/// contribute only their header expression (condition, selector, label);
/// their bodies are separate statements.
pub fn def_use(ast: &Ast) -> DefUseInfo {
    let mut info = DefUseInfo::default();
    for id in ast.preorder() {
        let node = ast.node(id);
        let mut du = StmtDefUse::default();
        match node.kind {
            AstKind::Parameter => {
                if let Some(name) = &node.token {
                    info.entry_defs.insert(name.clone());
                }
                continue;
            }
            AstKind::LocalVariableDeclaration => {
                for &d in &node.children[1..] {
                    if let Some(name) = &ast.node(d).token {
                        du.defs.insert(name.clone());
                    }
                    for &init in ast.children(d) {
                        expr_def_use(ast, init, &mut du);
                    }
                }
            }
            AstKind::ExpressionStatement | AstKind::ReturnStatement | AstKind::SwitchCase => {
                if let Some(&e) = node.children.first() {
                    expr_def_use(ast, e, &mut du);
                }
            }
            AstKind::IfStatement | AstKind::WhileStatement | AstKind::SwitchStatement => {
                expr_def_use(ast, node.children[0], &mut du);
            }
            AstKind::ForStatement => {
                if node.children.len() == 4 {
                    expr_def_use(ast, node.children[1], &mut du);
                }
            }
            AstKind::BreakStatement
            | AstKind::ContinueStatement
            | AstKind::EmptyStatement
            | AstKind::SwitchDefault => {}
            _ => continue,
        }
        info.stmts.insert(id, du);
    }
    info
}

/// Leftmost identifier of an lvalue (`a` in `a[i].f`).
fn base_name(ast: &Ast, mut id: NodeId) -> Option<String> {
    loop {
        let n = ast.node(id);
        match n.kind {
            AstKind::Identifier => return n.token.clone(),
            AstKind::ArrayAccess | AstKind::FieldAccess => id = n.children[0],
            _ => return None,
        }
    }
}

/// Uses inside an lvalue other than its base (array indices).
fn lvalue_inner_uses(ast: &Ast, id: NodeId, du: &mut StmtDefUse) {
    let n = ast.node(id);
    match n.kind {
        AstKind::ArrayAccess => {
            lvalue_inner_uses(ast, n.children[0], du);
            expr_def_use(ast, n.children[1], du);
        }
        AstKind::FieldAccess => lvalue_inner_uses(ast, n.children[0], du),
        _ => {}
    }
}

fn expr_def_use(ast: &Ast, id: NodeId, du: &mut StmtDefUse) {
    let n = ast.node(id);
    match n.kind {
        AstKind::Identifier => {
            if let Some(name) = &n.token {
                if name != "this" {
                    du.uses.insert(name.clone());
                }
            }
        }
        AstKind::Assignment => {
            let (target, value) = (n.children[0], n.children[1]);
            expr_def_use(ast, value, du);
            lvalue_inner_uses(ast, target, du);
            if let Some(base) = base_name(ast, target) {
                if n.token.as_deref() != Some("=") {
                    du.uses.insert(base.clone());
                }
                du.defs.insert(base);
            }
        }
        AstKind::UnaryOperation | AstKind::PostfixOperation
            if matches!(n.token.as_deref(), Some("++" | "--")) =>
        {
            let target = n.children[0];
            lvalue_inner_uses(ast, target, du);
            if let Some(base) = base_name(ast, target) {
                du.uses.insert(base.clone());
                du.defs.insert(base);
            }
        }
        _ => {
            for &c in &n.children {
                expr_def_use(ast, c, du);
            }
        }
    }
}

/// Reaching definitions at the entry of every statement in the CFG: the
/// least fixed point of `IN = U OUT(pred)`, `OUT = gen U (IN - kill)`,
/// solved per block and then propagated through each block's statements.
pub fn reaching_definitions(cfg: &CodeGraph, info: &DefUseInfo) -> BTreeMap<NodeId, ReachingSet> {
    let n = cfg.nodes.len();
    let blocks = basic_blocks(cfg);
    let mut stmts_of: Vec<&[NodeId]> = vec![&[]; n];
    for b in &blocks {
        stmts_of[b.id] = &cfg.nodes[b.id].members;
    }
    let preds: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut p: Vec<usize> = cfg.predecessors(i).map(|e| e.src).collect();
            p.sort_unstable();
            p.dedup();
            p
        })
        .collect();

    let transfer = |input: &ReachingSet, stmts: &[NodeId]| -> ReachingSet {
        let mut cur = input.clone();
        for &s in stmts {
            apply_defs(&mut cur, info, DefSite::Stmt(s));
        }
        cur
    };

    let mut out: Vec<ReachingSet> = vec![ReachingSet::new(); n];
    let mut entry_out = ReachingSet::new();
    apply_defs(&mut entry_out, info, DefSite::Entry);
    out[ENTRY] = entry_out;

    let mut changed = true;
    while changed {
        changed = false;
        for b in &blocks {
            let mut input = ReachingSet::new();
            for &p in &preds[b.id] {
                input.extend(out[p].iter().cloned());
            }
            let new_out = transfer(&input, stmts_of[b.id]);
            if new_out != out[b.id] {
                out[b.id] = new_out;
                changed = true;
            }
        }
    }

    let mut result = BTreeMap::new();
    for b in &blocks {
        let mut cur = ReachingSet::new();
        for &p in &preds[b.id] {
            cur.extend(out[p].iter().cloned());
        }
        for &s in stmts_of[b.id] {
            result.insert(s, cur.clone());
            apply_defs(&mut cur, info, DefSite::Stmt(s));
        }
    }
    result
}

/// Kills prior definitions of every variable defined at `site`, then adds
/// `site`'s own.
pub fn apply_defs(set: &mut ReachingSet, info: &DefUseInfo, site: DefSite) {
    let Some(defs) = info.defs_at(site) else { return };
    if defs.is_empty() {
        return;
    }
    set.retain(|(v, _)| !defs.contains(v));
    for v in defs {
        set.insert((v.clone(), site));
    }
}
