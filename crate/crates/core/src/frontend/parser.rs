//! Recursive-descent parser for the Java subset described in
//! `docs/grammar.ebnf`.

use super::ast::{Ast, AstKind, AstNode, NodeId};
use super::lexer::{Token, TokenKind};
use super::FrontendError;

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short",
];
const MODIFIERS: &[&str] = &["final", "private", "protected", "public", "static"];
const REJECTED: &[(&str, &str)] = &[
    ("try", "try/catch"),
    ("catch", "try/catch"),
    ("finally", "try/catch"),
    ("throw", "exceptions"),
    ("throws", "exceptions"),
    ("import", "imports"),
    ("package", "packages"),
    ("extends", "inheritance"),
    ("implements", "inheritance"),
    ("interface", "interfaces"),
    ("do", "do/while loops"),
];
const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=",
];
// Binary precedence levels, loosest first.
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["|"],
    &["^"],
    &["&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["<<", ">>", ">>>"],
    &["+", "-"],
    &["*", "/", "%"],
];

pub fn parse(tokens: &[Token]) -> Result<Ast, FrontendError> {
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        arena: Vec::new(),
    };
    let root = p.compilation_unit()?;
    Ok(Ast::from_arena(p.arena, root))
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    arena: Vec<AstNode>,
}

impl<'t> Parser<'t> {
    fn node(&mut self, kind: AstKind, token: Option<String>, children: Vec<NodeId>) -> NodeId {
        let id = self.arena.len();
        self.arena.push(AstNode {
            id,
            kind,
            token,
            children,
        });
        id
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + k)
    }

    fn is(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text && t.kind != TokenKind::StringLit)
    }

    fn is_at(&self, k: usize, text: &str) -> bool {
        self.peek_at(k)
            .is_some_and(|t| t.text == text && t.kind != TokenKind::StringLit)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.is(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> FrontendError {
        match self.peek() {
            Some(t) => FrontendError::Syntax {
                expected: expected.to_string(),
                found: t.text.clone(),
                line: t.line,
                col: t.col,
            },
            None => {
                let (line, col) = self
                    .toks
                    .last()
                    .map(|t| (t.line, t.col + t.text.chars().count()))
                    .unwrap_or((1, 1));
                FrontendError::Syntax {
                    expected: expected.to_string(),
                    found: "end of input".to_string(),
                    line,
                    col,
                }
            }
        }
    }

    fn expect(&mut self, text: &str) -> Result<(), FrontendError> {
        self.check_rejected()?;
        if self.eat(text) {
            Ok(())
        } else {
            Err(self.error(&format!("`{text}`")))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        self.check_rejected()?;
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            _ => Err(self.error("identifier")),
        }
    }

    /// Fails with an `Unsupported` diagnostic if the next token starts a
    /// construct outside the subset.
    fn check_rejected(&self) -> Result<(), FrontendError> {
        let Some(t) = self.peek() else { return Ok(()) };
        let construct = match t.kind {
            TokenKind::Keyword => REJECTED
                .iter()
                .find(|(k, _)| *k == t.text)
                .map(|(_, c)| *c),
            TokenKind::Operator if t.text == "->" => Some("lambdas"),
            _ => None,
        };
        match construct {
            Some(c) => Err(FrontendError::Unsupported {
                construct: c.to_string(),
                line: t.line,
                col: t.col,
            }),
            None => Ok(()),
        }
    }

    fn unsupported_here(&self, construct: &str) -> FrontendError {
        let (line, col) = self.peek().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        FrontendError::Unsupported {
            construct: construct.to_string(),
            line,
            col,
        }
    }

    // ---- declarations ------------------------------------------------------

    fn compilation_unit(&mut self) -> Result<NodeId, FrontendError> {
        let mut decls = Vec::new();
        let mut saw_class = false;
        while self.peek().is_some() {
            self.check_rejected()?;
            let save = self.pos;
            self.modifiers();
            if self.is("class") {
                self.pos = save;
                decls.push(self.class_decl()?);
                saw_class = true;
            } else {
                self.pos = save;
                decls.push(self.method_decl()?);
            }
        }
        if decls.is_empty() {
            return Err(self.error("method or class declaration"));
        }
        if decls.len() == 1 && !saw_class {
            return Ok(decls[0]);
        }
        Ok(self.node(AstKind::CompilationUnit, None, decls))
    }

    fn modifiers(&mut self) {
        while self.peek().is_some_and(|t| MODIFIERS.contains(&t.text.as_str())) {
            self.pos += 1;
        }
    }

    fn class_decl(&mut self) -> Result<NodeId, FrontendError> {
        self.modifiers();
        self.expect("class")?;
        let name = self.ident()?;
        if self.is("<") {
            return Err(self.unsupported_here("generics"));
        }
        self.expect("{")?;
        let mut methods = Vec::new();
        while !self.is("}") {
            if self.peek().is_none() {
                return Err(self.error("`}`"));
            }
            methods.push(self.method_decl()?);
        }
        self.expect("}")?;
        Ok(self.node(AstKind::ClassDeclaration, Some(name), methods))
    }

    fn method_decl(&mut self) -> Result<NodeId, FrontendError> {
        self.modifiers();
        self.check_rejected()?;
        if self.is("<") {
            return Err(self.unsupported_here("generics"));
        }
        let ret = self.type_node(true)?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut children = vec![ret];
        if !self.is(")") {
            loop {
                self.eat("final");
                let ty = self.type_node(false)?;
                let pname = self.ident()?;
                children.push(self.node(AstKind::Parameter, Some(pname), vec![ty]));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        self.check_rejected()?;
        children.push(self.block()?);
        Ok(self.node(AstKind::MethodDeclaration, Some(name), children))
    }

    fn type_node(&mut self, allow_void: bool) -> Result<NodeId, FrontendError> {
        self.check_rejected()?;
        let t = self.peek().ok_or_else(|| self.error("type"))?;
        let base = match t.kind {
            TokenKind::Keyword
                if PRIMITIVES.contains(&t.text.as_str()) || (allow_void && t.text == "void") =>
            {
                t.text.clone()
            }
            TokenKind::Ident => t.text.clone(),
            _ => return Err(self.error("type")),
        };
        self.pos += 1;
        if self.is("<") {
            return Err(self.unsupported_here("generics"));
        }
        let mut text = base;
        while self.is("[") && self.is_at(1, "]") {
            self.pos += 2;
            text.push_str("[]");
        }
        Ok(self.node(AstKind::Type, Some(text), Vec::new()))
    }

    // ---- statements --------------------------------------------------------

    fn block(&mut self) -> Result<NodeId, FrontendError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is("}") {
            if self.peek().is_none() {
                return Err(self.error("`}`"));
            }
            stmts.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(self.node(AstKind::Block, None, stmts))
    }

    fn starts_local_decl(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        match t.kind {
            TokenKind::Keyword => {
                PRIMITIVES.contains(&t.text.as_str()) || t.text == "final"
            }
            TokenKind::Ident => {
                self.peek_at(1).is_some_and(|n| n.kind == TokenKind::Ident)
                    || (self.is_at(1, "[") && self.is_at(2, "]"))
                    || (self.is_at(1, "<")
                        && self.peek_at(2).is_some_and(|n| n.kind == TokenKind::Ident)
                        && (self.is_at(3, ">") || self.is_at(3, ",")))
            }
            _ => false,
        }
    }

    fn statement(&mut self) -> Result<NodeId, FrontendError> {
        self.check_rejected()?;
        let t = self.peek().ok_or_else(|| self.error("statement"))?;
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => return self.if_stmt(),
                "while" => return self.while_stmt(),
                "for" => return self.for_stmt(),
                "switch" => return self.switch_stmt(),
                "return" => {
                    self.pos += 1;
                    let mut children = Vec::new();
                    if !self.is(";") {
                        children.push(self.expr()?);
                    }
                    self.expect(";")?;
                    return Ok(self.node(AstKind::ReturnStatement, None, children));
                }
                "break" | "continue" => {
                    let kind = if t.text == "break" {
                        AstKind::BreakStatement
                    } else {
                        AstKind::ContinueStatement
                    };
                    self.pos += 1;
                    if self.peek().is_some_and(|t| t.kind == TokenKind::Ident) {
                        return Err(self.unsupported_here("labeled break/continue"));
                    }
                    self.expect(";")?;
                    return Ok(self.node(kind, None, Vec::new()));
                }
                "class" => return Err(self.unsupported_here("nested classes")),
                _ => {}
            }
        }
        if self.is("{") {
            return self.block();
        }
        if self.eat(";") {
            return Ok(self.node(AstKind::EmptyStatement, None, Vec::new()));
        }
        if self.starts_local_decl() {
            let d = self.local_decl()?;
            self.expect(";")?;
            return Ok(d);
        }
        let e = self.expr_statement()?;
        self.expect(";")?;
        Ok(e)
    }

    fn expr_statement(&mut self) -> Result<NodeId, FrontendError> {
        let e = self.expr()?;
        Ok(self.node(AstKind::ExpressionStatement, None, vec![e]))
    }

    fn local_decl(&mut self) -> Result<NodeId, FrontendError> {
        self.eat("final");
        let ty = self.type_node(false)?;
        let mut children = vec![ty];
        loop {
            let name = self.ident()?;
            while self.is("[") && self.is_at(1, "]") {
                self.pos += 2;
            }
            let mut init = Vec::new();
            if self.eat("=") {
                init.push(if self.is("{") {
                    self.array_init()?
                } else {
                    self.expr()?
                });
            }
            children.push(self.node(AstKind::VariableDeclarator, Some(name), init));
            if !self.eat(",") {
                break;
            }
        }
        Ok(self.node(AstKind::LocalVariableDeclaration, None, children))
    }

    fn array_init(&mut self) -> Result<NodeId, FrontendError> {
        self.expect("{")?;
        let mut items = Vec::new();
        while !self.is("}") {
            items.push(if self.is("{") {
                self.array_init()?
            } else {
                self.expr()?
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(self.node(AstKind::ArrayInitializer, None, items))
    }

    fn paren_expr(&mut self) -> Result<NodeId, FrontendError> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn if_stmt(&mut self) -> Result<NodeId, FrontendError> {
        self.pos += 1;
        let cond = self.paren_expr()?;
        let then = self.statement()?;
        let mut children = vec![cond, then];
        if self.eat("else") {
            children.push(self.statement()?);
        }
        Ok(self.node(AstKind::IfStatement, None, children))
    }

    fn while_stmt(&mut self) -> Result<NodeId, FrontendError> {
        self.pos += 1;
        let cond = self.paren_expr()?;
        let body = self.statement()?;
        Ok(self.node(AstKind::WhileStatement, None, vec![cond, body]))
    }

    fn for_stmt(&mut self) -> Result<NodeId, FrontendError> {
        self.pos += 1;
        self.expect("(")?;
        let mut init = Vec::new();
        if !self.is(";") {
            if self.starts_local_decl() {
                init.push(self.local_decl()?);
            } else {
                loop {
                    init.push(self.expr_statement()?);
                    if !self.eat(",") {
                        break;
                    }
                }
            }
        }
        if self.is(":") {
            return Err(self.unsupported_here("enhanced for loops"));
        }
        self.expect(";")?;
        let init = self.node(AstKind::ForInit, None, init);
        let mut children = vec![init];
        if !self.is(";") {
            children.push(self.expr()?);
        }
        self.expect(";")?;
        let mut update = Vec::new();
        if !self.is(")") {
            loop {
                update.push(self.expr_statement()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        children.push(self.node(AstKind::ForUpdate, None, update));
        children.push(self.statement()?);
        Ok(self.node(AstKind::ForStatement, None, children))
    }

    fn switch_stmt(&mut self) -> Result<NodeId, FrontendError> {
        self.pos += 1;
        let selector = self.paren_expr()?;
        self.expect("{")?;
        let mut children = vec![selector];
        let mut saw_default = false;
        while !self.is("}") {
            let (kind, mut arm) = if self.eat("case") {
                let label = self.expr()?;
                (AstKind::SwitchCase, vec![label])
            } else if self.eat("default") {
                if saw_default {
                    return Err(self.error("at most one `default`"));
                }
                saw_default = true;
                (AstKind::SwitchDefault, Vec::new())
            } else {
                return Err(self.error("`case`, `default` or `}`"));
            };
            self.expect(":")?;
            while !(self.is("case") || self.is("default") || self.is("}")) {
                if self.peek().is_none() {
                    return Err(self.error("`}`"));
                }
                arm.push(self.statement()?);
            }
            children.push(self.node(kind, None, arm));
        }
        self.expect("}")?;
        Ok(self.node(AstKind::SwitchStatement, None, children))
    }

    // ---- expressions -------------------------------------------------------

    fn expr(&mut self) -> Result<NodeId, FrontendError> {
        self.check_rejected()?;
        let lhs = self.conditional()?;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && ASSIGN_OPS.contains(&t.text.as_str()) {
                let target = self.kind_of(lhs);
                if !matches!(
                    target,
                    AstKind::Identifier | AstKind::ArrayAccess | AstKind::FieldAccess
                ) {
                    return Err(self.error("assignable expression before assignment"));
                }
                self.pos += 1;
                let rhs = self.expr()?;
                return Ok(self.node(AstKind::Assignment, Some(t.text.clone()), vec![lhs, rhs]));
            }
        }
        self.check_rejected()?;
        Ok(lhs)
    }

    fn kind_of(&self, id: NodeId) -> AstKind {
        self.arena[id].kind
    }

    fn conditional(&mut self) -> Result<NodeId, FrontendError> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.conditional()?;
            return Ok(self.node(AstKind::ConditionalExpression, None, vec![cond, a, b]));
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> Result<NodeId, FrontendError> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(t) = self.peek() {
            if t.kind != TokenKind::Operator || !BINARY_LEVELS[level].contains(&t.text.as_str()) {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = self.node(AstKind::BinaryOperation, Some(t.text.clone()), vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<NodeId, FrontendError> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator
                && matches!(t.text.as_str(), "+" | "-" | "!" | "~" | "++" | "--")
            {
                self.pos += 1;
                let operand = self.unary()?;
                if matches!(t.text.as_str(), "++" | "--")
                    && !matches!(
                        self.kind_of(operand),
                        AstKind::Identifier | AstKind::ArrayAccess | AstKind::FieldAccess
                    )
                {
                    return Err(self.error("assignable operand of increment"));
                }
                return Ok(self.node(AstKind::UnaryOperation, Some(t.text.clone()), vec![operand]));
            }
        }
        self.postfix()
    }

    fn args(&mut self) -> Result<Vec<NodeId>, FrontendError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.is(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(args)
    }

    fn postfix(&mut self) -> Result<NodeId, FrontendError> {
        let mut e = self.primary()?;
        loop {
            if self.eat(".") {
                let name = self.ident()?;
                if self.is("(") {
                    let mut children = vec![e];
                    children.extend(self.args()?);
                    e = self.node(AstKind::MethodInvocation, Some(name), children);
                } else {
                    e = self.node(AstKind::FieldAccess, Some(name), vec![e]);
                }
            } else if self.eat("[") {
                let idx = self.expr()?;
                self.expect("]")?;
                e = self.node(AstKind::ArrayAccess, None, vec![e, idx]);
            } else {
                break;
            }
        }
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "++" | "--") {
                if !matches!(
                    self.kind_of(e),
                    AstKind::Identifier | AstKind::ArrayAccess | AstKind::FieldAccess
                ) {
                    return Err(self.error("assignable operand of increment"));
                }
                self.pos += 1;
                e = self.node(AstKind::PostfixOperation, Some(t.text.clone()), vec![e]);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<NodeId, FrontendError> {
        self.check_rejected()?;
        let t = self.peek().ok_or_else(|| self.error("expression"))?;
        match t.kind {
            TokenKind::IntLit | TokenKind::StringLit => {
                self.pos += 1;
                Ok(self.node(AstKind::Literal, Some(t.text.clone()), Vec::new()))
            }
            TokenKind::Keyword => match t.text.as_str() {
                "true" | "false" | "null" => {
                    self.pos += 1;
                    Ok(self.node(AstKind::Literal, Some(t.text.clone()), Vec::new()))
                }
                "this" => {
                    self.pos += 1;
                    Ok(self.node(AstKind::Identifier, Some("this".into()), Vec::new()))
                }
                "new" => {
                    self.pos += 1;
                    self.creation()
                }
                _ => Err(self.error("expression")),
            },
            TokenKind::Ident => {
                self.pos += 1;
                if self.is("(") {
                    let args = self.args()?;
                    Ok(self.node(AstKind::MethodInvocation, Some(t.text.clone()), args))
                } else {
                    Ok(self.node(AstKind::Identifier, Some(t.text.clone()), Vec::new()))
                }
            }
            TokenKind::Punct if t.text == "(" => {
                if self.peek_at(1).is_some_and(|n| {
                    n.kind == TokenKind::Keyword && PRIMITIVES.contains(&n.text.as_str())
                }) {
                    return Err(self.unsupported_here("casts"));
                }
                self.paren_expr()
            }
            _ => Err(self.error("expression")),
        }
    }

    fn creation(&mut self) -> Result<NodeId, FrontendError> {
        let t = self.peek().ok_or_else(|| self.error("type after `new`"))?;
        let is_type = t.kind == TokenKind::Ident
            || (t.kind == TokenKind::Keyword && PRIMITIVES.contains(&t.text.as_str()));
        if !is_type {
            return Err(self.error("type after `new`"));
        }
        self.pos += 1;
        let name = t.text.clone();
        if self.is("<") {
            return Err(self.unsupported_here("generics"));
        }
        if self.is("(") {
            let args = self.args()?;
            return Ok(self.node(AstKind::ObjectCreation, Some(name), args));
        }
        if !self.is("[") {
            return Err(self.error("`(` or `[`"));
        }
        let ty = self.node(AstKind::Type, Some(name), Vec::new());
        let mut children = vec![ty];
        if self.is_at(1, "]") {
            while self.is("[") && self.is_at(1, "]") {
                self.pos += 2;
            }
            children.push(self.array_init()?);
        } else {
            while self.eat("[") {
                if self.eat("]") {
                    continue;
                }
                children.push(self.expr()?);
                self.expect("]")?;
            }
        }
        Ok(self.node(AstKind::ArrayCreation, None, children))
    }
}
