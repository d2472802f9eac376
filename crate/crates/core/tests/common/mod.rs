#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;

use magnet::featurize::{featurize_with, AdjacencyMode, FeaturizedBundle, FeaturizedGraph, Vocab};
use magnet::frontend::{parse_source, Ast, AstKind, CodeGraph, EdgeKind, NodeId, View};
use magnet::graphs::{build_cfg, build_dfg, def_use, reaching_definitions, DefSite};
use magnet::numcore::Rng;

/// Branch-only program: assignments and if/else, no loops.
#[derive(Clone, Debug)]
pub enum Stmt {
    Assign { target: usize, uses: Vec<usize> },
    If { cond: usize, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
}

pub const LOCALS: usize = 3;
/// Variable `LOCALS` is the method parameter.
pub const PARAM: usize = LOCALS;

pub fn random_program(rng: &mut Rng, max_stmts: usize) -> Vec<Stmt> {
    let mut budget = 1 + rng.below(max_stmts);
    gen_seq(rng, &mut budget, 0)
}

fn gen_seq(rng: &mut Rng, budget: &mut usize, depth: usize) -> Vec<Stmt> {
    let mut out = Vec::new();
    let len = 1 + rng.below(4);
    for _ in 0..len {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        if depth < 3 && rng.uniform() < 0.35 {
            let cond = rng.below(LOCALS + 1);
            let then = gen_seq(rng, budget, depth + 1);
            let els = (rng.uniform() < 0.5).then(|| gen_seq(rng, budget, depth + 1));
            out.push(Stmt::If { cond, then, els });
        } else {
            let target = rng.below(LOCALS);
            let uses = (0..=LOCALS).filter(|_| rng.uniform() < 0.4).collect();
            out.push(Stmt::Assign { target, uses });
        }
    }
    out
}

pub fn render(prog: &[Stmt], names: &[&str]) -> String {
    fn seq(s: &[Stmt], names: &[&str], out: &mut String) {
        for st in s {
            match st {
                Stmt::Assign { target, uses } => {
                    out.push_str(names[*target]);
                    out.push_str(" = ");
                    for &u in uses {
                        out.push_str(names[u]);
                        out.push_str(" + ");
                    }
                    out.push_str("1; ");
                }
                Stmt::If { cond, then, els } => {
                    out.push_str(&format!("if ({} > 0) {{ ", names[*cond]));
                    seq(then, names, out);
                    out.push_str("} ");
                    if let Some(e) = els {
                        out.push_str("else { ");
                        seq(e, names, out);
                        out.push_str("} ");
                    }
                }
            }
        }
    }
    let mut body = String::new();
    seq(prog, names, &mut body);
    format!("void f(int {}) {{ {body}}}", names[PARAM])
}

pub const NAMES: [&str; 4] = ["a", "b", "c", "p"];

/// Flattened statement: (def, uses) in source order.
fn flatten(prog: &[Stmt], out: &mut Vec<(Option<usize>, Vec<usize>)>) {
    for st in prog {
        match st {
            Stmt::Assign { target, uses } => out.push((Some(*target), uses.clone())),
            Stmt::If { cond, then, els } => {
                out.push((None, vec![*cond]));
                flatten(then, out);
                if let Some(e) = els {
                    flatten(e, out);
                }
            }
        }
    }
}

/// Every execution path through `prog`, as statement indices in source order.
fn paths(prog: &[Stmt], next: &mut usize) -> Vec<Vec<usize>> {
    let mut acc: Vec<Vec<usize>> = vec![vec![]];
    for st in prog {
        let me = *next;
        *next += 1;
        match st {
            Stmt::Assign { .. } => acc.iter_mut().for_each(|p| p.push(me)),
            Stmt::If { then, els, .. } => {
                let t = paths(then, next);
                let e = match els {
                    Some(e) => paths(e, next),
                    None => vec![vec![]],
                };
                let mut grown = Vec::new();
                for p in &acc {
                    for tail in t.iter().chain(e.iter()) {
                        let mut q = p.clone();
                        q.push(me);
                        q.extend(tail);
                        grown.push(q);
                    }
                }
                acc = grown;
            }
        }
    }
    acc
}

/// Definition site in oracle space: `None` is Entry, `Some(i)` is statement i.
pub type Site = Option<usize>;

/// Reaching (var, site) pairs at each statement, by enumerating every path.
pub fn oracle_reaching(prog: &[Stmt]) -> Vec<BTreeSet<(usize, Site)>> {
    let mut flat = Vec::new();
    flatten(prog, &mut flat);
    let mut reach = vec![BTreeSet::new(); flat.len()];
    for path in paths(prog, &mut 0) {
        let mut last: BTreeMap<usize, Site> = BTreeMap::from([(PARAM, None)]);
        for &s in &path {
            reach[s].extend(last.iter().map(|(&v, &d)| (v, d)));
            if let Some(t) = flat[s].0 {
                last.insert(t, Some(s));
            }
        }
    }
    reach
}

pub fn oracle_dfg_edges(prog: &[Stmt]) -> BTreeSet<(Site, usize)> {
    let mut flat = Vec::new();
    flatten(prog, &mut flat);
    let reach = oracle_reaching(prog);
    let mut edges = BTreeSet::new();
    for (s, (_, uses)) in flat.iter().enumerate() {
        for &(v, d) in &reach[s] {
            if uses.contains(&v) {
                edges.insert((d, s));
            }
        }
    }
    edges
}

fn stmt_order(ast: &Ast) -> Vec<NodeId> {
    ast.preorder()
        .into_iter()
        .filter(|&i| matches!(ast.kind(i), AstKind::ExpressionStatement | AstKind::IfStatement))
        .collect()
}

pub type DfgEdges = BTreeSet<(Site, usize)>;

/// Reaching sets and DFG edges computed by the library, mapped into oracle space.
pub fn library_results(src: &str) -> (Vec<BTreeSet<(usize, Site)>>, DfgEdges) {
    let ast = parse_source(src).unwrap();
    let order = stmt_order(&ast);
    let index: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let var = |name: &str| NAMES.iter().position(|&n| n == name).unwrap();
    let site = |d: DefSite| match d {
        DefSite::Entry => None,
        DefSite::Stmt(n) => Some(index[&n]),
    };
    let cfg = build_cfg(&ast).unwrap();
    let info = def_use(&ast);
    let rd = reaching_definitions(&cfg, &info);
    let reach = order
        .iter()
        .map(|n| rd[n].iter().map(|(v, d)| (var(v), site(*d))).collect())
        .collect();
    let dfg = build_dfg(&ast, &cfg, &info);
    let node_site = |id: usize| dfg.nodes[id].stmt_ref.map(|n| index[&n]);
    let edges = dfg
        .edges
        .iter()
        .map(|e| (node_site(e.src), node_site(e.dst).unwrap()))
        .collect();
    (reach, edges)
}

// ---- random featurized graphs ----

pub const KINDS: [&str; 5] = ["A", "B", "C", "D", "BasicBlock"];

pub fn random_graph(rng: &mut Rng, view: View, vocab: &Vocab) -> FeaturizedGraph {
    let n = 3 + rng.below(6);
    let mut g = CodeGraph::new(view);
    for _ in 0..n {
        let kind = KINDS[rng.below(4)];
        let token = (rng.uniform() < 0.5).then(|| format!("t{}", rng.below(12)));
        let id = g.add_node(kind, token, None);
        if view == View::Cfg && rng.uniform() < 0.6 {
            g.nodes[id].kind = "BasicBlock".into();
            g.nodes[id].member_kinds = (0..1 + rng.below(3)).map(|_| KINDS[rng.below(4)].to_string()).collect();
        }
    }
    let kind = match view {
        View::Ast => EdgeKind::Child,
        View::Cfg => EdgeKind::Seq,
        View::Dfg => EdgeKind::DataDep,
    };
    for i in 1..n {
        g.add_edge(rng.below(i), i, kind);
    }
    for _ in 0..rng.below(3) {
        let (a, b) = (rng.below(n), rng.below(n));
        if a != b {
            g.add_edge(a, b, kind);
        }
    }
    featurize_with(&g, vocab, AdjacencyMode::Symmetric)
}

pub fn random_bundle(rng: &mut Rng, vocab: &Vocab) -> FeaturizedBundle {
    FeaturizedBundle {
        ast: random_graph(rng, View::Ast, vocab),
        cfg: random_graph(rng, View::Cfg, vocab),
        dfg: random_graph(rng, View::Dfg, vocab),
    }
}

pub fn permute(g: &FeaturizedGraph, perm: &[usize]) -> FeaturizedGraph {
    // new row i holds old node perm[i]
    let n = perm.len();
    FeaturizedGraph {
        view: g.view,
        kind_indices: perm.iter().map(|&o| g.kind_indices[o]).collect(),
        token_indices: perm.iter().map(|&o| g.token_indices[o]).collect(),
        block_members: perm.iter().map(|&o| g.block_members[o].clone()).collect(),
        adj_norm: Array2::from_shape_fn((n, n), |(i, j)| g.adj_norm[[perm[i], perm[j]]]),
    }
}

pub fn permute_bundle(b: &FeaturizedBundle, rng: &mut Rng) -> FeaturizedBundle {
    let mut one = |g: &FeaturizedGraph| {
        let mut perm: Vec<usize> = (0..g.len()).collect();
        rng.shuffle(&mut perm);
        permute(g, &perm)
    };
    FeaturizedBundle { ast: one(&b.ast), cfg: one(&b.cfg), dfg: one(&b.dfg) }
}
