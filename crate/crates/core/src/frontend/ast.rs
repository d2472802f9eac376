use std::fmt;

use serde::Serialize;

pub type NodeId = usize;

/// Syntactic node kinds of the supported Java subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AstKind {
    CompilationUnit,
    ClassDeclaration,
    MethodDeclaration,
    Parameter,
    Type,
    Block,
    LocalVariableDeclaration,
    VariableDeclarator,
    ExpressionStatement,
    IfStatement,
    WhileStatement,
    ForStatement,
    ForInit,
    ForUpdate,
    SwitchStatement,
    SwitchCase,
    SwitchDefault,
    ReturnStatement,
    BreakStatement,
    ContinueStatement,
    EmptyStatement,
    Assignment,
    BinaryOperation,
    UnaryOperation,
    PostfixOperation,
    ConditionalExpression,
    MethodInvocation,
    FieldAccess,
    ArrayAccess,
    ObjectCreation,
    ArrayCreation,
    ArrayInitializer,
    Literal,
    Identifier,
}

impl AstKind {
    pub fn as_str(self) -> &'static str {
        use AstKind::*;
        match self {
            CompilationUnit => "CompilationUnit",
            ClassDeclaration => "ClassDeclaration",
            MethodDeclaration => "MethodDeclaration",
            Parameter => "Parameter",
            Type => "Type",
            Block => "Block",
            LocalVariableDeclaration => "LocalVariableDeclaration",
            VariableDeclarator => "VariableDeclarator",
            ExpressionStatement => "ExpressionStatement",
            IfStatement => "IfStatement",
            WhileStatement => "WhileStatement",
            ForStatement => "ForStatement",
            ForInit => "ForInit",
            ForUpdate => "ForUpdate",
            SwitchStatement => "SwitchStatement",
            SwitchCase => "SwitchCase",
            SwitchDefault => "SwitchDefault",
            ReturnStatement => "ReturnStatement",
            BreakStatement => "BreakStatement",
            ContinueStatement => "ContinueStatement",
            EmptyStatement => "EmptyStatement",
            Assignment => "Assignment",
            BinaryOperation => "BinaryOperation",
            UnaryOperation => "UnaryOperation",
            PostfixOperation => "PostfixOperation",
            ConditionalExpression => "ConditionalExpression",
            MethodInvocation => "MethodInvocation",
            FieldAccess => "FieldAccess",
            ArrayAccess => "ArrayAccess",
            ObjectCreation => "ObjectCreation",
            ArrayCreation => "ArrayCreation",
            ArrayInitializer => "ArrayInitializer",
            Literal => "Literal",
            Identifier => "Identifier",
        }
    }
}

impl fmt::Display for AstKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: AstKind,
    pub token: Option<String>,
    pub children: Vec<NodeId>,
}

/// A parsed compilation unit. Node ids are dense and assigned in preorder,
/// so the root is always node 0 and children follow source order.
///
/// Child layouts that matter for analysis:
/// - `MethodDeclaration`: `[Type, Parameter*, Block]`, token = method name
/// - `IfStatement`: `[cond, then, else?]`
/// - `WhileStatement`: `[cond, body]`
/// - `ForStatement`: `[ForInit, cond?, ForUpdate, body]`
/// - `SwitchStatement`: `[selector, (SwitchCase | SwitchDefault)*]`
/// - `SwitchCase`: `[label, stmt*]`; `SwitchDefault`: `[stmt*]`
/// - `Assignment`: `[target, value]`, token = operator
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ast {
    pub nodes: Vec<AstNode>,
    pub root: NodeId,
}

impl Ast {
    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    pub fn kind(&self, id: NodeId) -> AstKind {
        self.nodes[id].kind
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Method declarations in source order.
    pub fn methods(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&id| self.kind(id) == AstKind::MethodDeclaration)
            .collect()
    }

    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.children(id).iter().rev());
        }
        out
    }

    /// Rebuilds the tree from an arbitrary arena so ids follow preorder.
    pub(crate) fn from_arena(arena: Vec<AstNode>, root: NodeId) -> Ast {
        let tmp = Ast { nodes: arena, root };
        let order = tmp.preorder();
        let mut remap = vec![usize::MAX; tmp.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let nodes = order
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let n = &tmp.nodes[old];
                AstNode {
                    id: new,
                    kind: n.kind,
                    token: n.token.clone(),
                    children: n.children.iter().map(|c| remap[*c]).collect(),
                }
            })
            .collect();
        Ast { nodes, root: 0 }
    }
}
