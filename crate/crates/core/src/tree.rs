//! Uniform labeled tree view of function bodies.
//!
//! Both normalization and CFG lowering work on this shape. A concrete tree keeps source
//! names and spans; an abstracted tree (see [`crate::normalize`]) has the same kinds with
//! wildcard labels.

use crate::frontend::{
    Block, ContractDef, Expr, ExprKind, FunctionDef, ModifierDef, Param, Span, Stmt, StmtKind,
};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    // header
    ParameterList,
    ReturnList,
    Parameter,
    ModifierInvocation,
    // statements
    Block,
    If,
    While,
    DoWhile,
    For,
    Require,
    Assert,
    Revert,
    Throw,
    ExprStmt,
    VarDecl,
    Return,
    Emit,
    Break,
    Continue,
    Placeholder,
    Opaque,
    // expressions
    Identifier,
    StateVariable,
    Literal,
    MsgSender,
    TxOrigin,
    TypeName,
    Member,
    Index,
    Call,
    Transfer,
    LowLevelCall,
    ValueCall,
    Selfdestruct,
    BinaryOp,
    UnaryOp,
    Assign,
    Conditional,
    Tuple,
    New,
    /// Stand-in for an omitted optional part (e.g. a `for` header slot).
    Empty,
}

impl NodeKind {
    pub fn is_header(self) -> bool {
        matches!(self, NodeKind::ParameterList | NodeKind::ReturnList | NodeKind::ModifierInvocation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::ParameterList => "parameter_list",
            NodeKind::ReturnList => "return_list",
            NodeKind::Parameter => "parameter",
            NodeKind::ModifierInvocation => "modifier_invocation",
            NodeKind::Block => "block",
            NodeKind::If => "if",
            NodeKind::While => "while",
            NodeKind::DoWhile => "do_while",
            NodeKind::For => "for",
            NodeKind::Require => "require",
            NodeKind::Assert => "assert",
            NodeKind::Revert => "revert",
            NodeKind::Throw => "throw",
            NodeKind::ExprStmt => "expr_stmt",
            NodeKind::VarDecl => "var_decl",
            NodeKind::Return => "return",
            NodeKind::Emit => "emit",
            NodeKind::Break => "break",
            NodeKind::Continue => "continue",
            NodeKind::Placeholder => "placeholder",
            NodeKind::Opaque => "opaque",
            NodeKind::Identifier => "identifier",
            NodeKind::StateVariable => "state_variable",
            NodeKind::Literal => "literal",
            NodeKind::MsgSender => "msg_sender",
            NodeKind::TxOrigin => "tx_origin",
            NodeKind::TypeName => "type_name",
            NodeKind::Member => "member",
            NodeKind::Index => "index",
            NodeKind::Call => "call",
            NodeKind::Transfer => "transfer",
            NodeKind::LowLevelCall => "low_level_call",
            NodeKind::ValueCall => "value_call",
            NodeKind::Selfdestruct => "selfdestruct",
            NodeKind::BinaryOp => "binary_op",
            NodeKind::UnaryOp => "unary_op",
            NodeKind::Assign => "assign",
            NodeKind::Conditional => "conditional",
            NodeKind::Tuple => "tuple",
            NodeKind::New => "new",
            NodeKind::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledNode {
    pub kind: NodeKind,
    pub label: String,
    pub span: Option<Span>,
    pub children: Vec<LabeledNode>,
}

impl LabeledNode {
    pub fn new(kind: NodeKind, label: &str, span: Option<Span>, children: Vec<LabeledNode>) -> Self {
        LabeledNode { kind, label: label.to_string(), span, children }
    }

    fn leaf(kind: NodeKind, label: &str, span: Span) -> Self {
        LabeledNode::new(kind, label, Some(span), Vec::new())
    }

    fn empty() -> Self {
        LabeledNode::new(NodeKind::Empty, "", None, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a LabeledNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// Names of global objects and functions provided by the language.
pub const BUILTIN_GLOBALS: &[&str] = &[
    "msg", "tx", "block", "now", "this", "super", "abi", "blockhash", "gasleft", "keccak256", "sha3",
    "sha256", "ripemd160", "ecrecover", "addmod", "mulmod", "require", "assert", "revert",
    "selfdestruct", "suicide", "type",
];

/// Member names provided by the language (plus the conventional token transfer names).
pub const BUILTIN_MEMBERS: &[&str] = &[
    "sender", "origin", "value", "data", "sig", "gas", "gasprice", "balance", "length", "push", "pop",
    "transfer", "transferFrom", "send", "call", "callcode", "delegatecall", "timestamp", "number",
    "coinbase", "difficulty", "gaslimit", "blockhash", "encode", "encodePacked", "encodeWithSelector",
    "encodeWithSignature", "decode", "selector",
];

struct Converter<'a> {
    owner: &'a ContractDef,
    locals: HashSet<String>,
}

impl<'a> Converter<'a> {
    fn ident(&self, name: &str, span: Span) -> LabeledNode {
        let kind = if !self.locals.contains(name) && self.owner.state_var(name).is_some() {
            NodeKind::StateVariable
        } else {
            NodeKind::Identifier
        };
        LabeledNode::leaf(kind, name, span)
    }

    fn params(&mut self, kind: NodeKind, label: &str, params: &[Param]) -> LabeledNode {
        let children = params
            .iter()
            .map(|p| {
                if let Some(n) = &p.name {
                    self.locals.insert(n.clone());
                }
                let ty = LabeledNode::leaf(NodeKind::TypeName, &p.ty.text, p.ty.span);
                LabeledNode::new(NodeKind::Parameter, p.name.as_deref().unwrap_or(""), Some(p.span), vec![ty])
            })
            .collect();
        LabeledNode::new(kind, label, None, children)
    }

    fn block(&mut self, b: &Block) -> LabeledNode {
        let children = b.stmts.iter().map(|s| self.stmt(s)).collect();
        LabeledNode::new(NodeKind::Block, "{}", Some(b.span), children)
    }

    fn stmt(&mut self, s: &Stmt) -> LabeledNode {
        let sp = Some(s.span);
        let node = |kind, label: &str, children| LabeledNode::new(kind, label, sp, children);
        match &s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::If { cond, then, els } => {
                let mut ch = vec![self.expr(cond), self.stmt(then)];
                if let Some(e) = els {
                    ch.push(self.stmt(e));
                }
                node(NodeKind::If, "if", ch)
            }
            StmtKind::While { cond, body } => node(NodeKind::While, "while", vec![self.expr(cond), self.stmt(body)]),
            StmtKind::DoWhile { body, cond } => node(NodeKind::DoWhile, "do", vec![self.stmt(body), self.expr(cond)]),
            StmtKind::For { init, cond, update, body } => {
                let i = init.as_ref().map(|s| self.stmt(s)).unwrap_or_else(LabeledNode::empty);
                let c = cond.as_ref().map(|e| self.expr(e)).unwrap_or_else(LabeledNode::empty);
                let u = update.as_ref().map(|e| self.expr(e)).unwrap_or_else(LabeledNode::empty);
                let b = self.stmt(body);
                node(NodeKind::For, "for", vec![i, c, u, b])
            }
            StmtKind::Require { args } => node(NodeKind::Require, "require", self.exprs(args)),
            StmtKind::Assert { cond } => node(NodeKind::Assert, "assert", vec![self.expr(cond)]),
            StmtKind::Revert { args } => node(NodeKind::Revert, "revert", self.exprs(args)),
            StmtKind::Throw => node(NodeKind::Throw, "throw", vec![]),
            StmtKind::Expr(e) => node(NodeKind::ExprStmt, ";", vec![self.expr(e)]),
            StmtKind::VarDecl { vars, init } => {
                let mut ch: Vec<LabeledNode> = vars
                    .iter()
                    .map(|v| match v {
                        Some(v) => {
                            self.locals.insert(v.name.clone());
                            let ty = LabeledNode::leaf(NodeKind::TypeName, &v.ty.text, v.ty.span);
                            LabeledNode::new(NodeKind::Parameter, &v.name, Some(v.span), vec![ty])
                        }
                        None => LabeledNode::empty(),
                    })
                    .collect();
                if let Some(e) = init {
                    ch.push(self.expr(e));
                }
                node(NodeKind::VarDecl, "var", ch)
            }
            StmtKind::Return(e) => node(NodeKind::Return, "return", e.iter().map(|e| self.expr(e)).collect()),
            StmtKind::Emit(e) => node(NodeKind::Emit, "emit", vec![self.expr(e)]),
            StmtKind::Break => node(NodeKind::Break, "break", vec![]),
            StmtKind::Continue => node(NodeKind::Continue, "continue", vec![]),
            StmtKind::Placeholder => node(NodeKind::Placeholder, "_", vec![]),
            StmtKind::Opaque(_) => node(NodeKind::Opaque, "opaque", vec![]),
        }
    }

    fn exprs(&mut self, es: &[Expr]) -> Vec<LabeledNode> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    fn expr(&mut self, e: &Expr) -> LabeledNode {
        let sp = Some(e.span);
        let node = |kind, label: &str, children| LabeledNode::new(kind, label, sp, children);
        match &e.kind {
            ExprKind::Ident(n) => self.ident(n, e.span),
            ExprKind::Literal(_, text) => LabeledNode::leaf(NodeKind::Literal, text, e.span),
            ExprKind::MsgSender => LabeledNode::leaf(NodeKind::MsgSender, "msg.sender", e.span),
            ExprKind::TxOrigin => LabeledNode::leaf(NodeKind::TxOrigin, "tx.origin", e.span),
            ExprKind::ElementaryType(t) => LabeledNode::leaf(NodeKind::TypeName, t, e.span),
            ExprKind::Member { base, member } => node(NodeKind::Member, member, vec![self.expr(base)]),
            ExprKind::Index { base, index } => {
                let i = index.as_ref().map(|i| self.expr(i)).unwrap_or_else(LabeledNode::empty);
                node(NodeKind::Index, "[]", vec![self.expr(base), i])
            }
            ExprKind::Call { callee, args } => {
                let mut ch = vec![self.expr(callee)];
                ch.extend(self.exprs(args));
                node(NodeKind::Call, "()", ch)
            }
            ExprKind::Transfer { target, value } => {
                node(NodeKind::Transfer, "transfer", vec![self.expr(target), self.expr(value)])
            }
            ExprKind::LowLevelCall { kind, target, args } => {
                let mut ch = vec![self.expr(target)];
                ch.extend(self.exprs(args));
                node(NodeKind::LowLevelCall, kind.as_str(), ch)
            }
            ExprKind::ValueCall { callee, value, args } => {
                let mut ch = vec![self.expr(callee), self.expr(value)];
                ch.extend(self.exprs(args));
                node(NodeKind::ValueCall, "value", ch)
            }
            ExprKind::Selfdestruct(a) => node(NodeKind::Selfdestruct, "selfdestruct", vec![self.expr(a)]),
            ExprKind::Binary { op, lhs, rhs } => node(NodeKind::BinaryOp, op, vec![self.expr(lhs), self.expr(rhs)]),
            ExprKind::Unary { op, prefix, operand } => {
                let label = if *prefix { op.clone() } else { format!("post{}", op) };
                node(NodeKind::UnaryOp, &label, vec![self.expr(operand)])
            }
            ExprKind::Assign { op, lhs, rhs } => node(NodeKind::Assign, op, vec![self.expr(lhs), self.expr(rhs)]),
            ExprKind::Conditional { cond, then, els } => {
                node(NodeKind::Conditional, "?:", vec![self.expr(cond), self.expr(then), self.expr(els)])
            }
            ExprKind::Tuple(es) => {
                let ch = es.iter().map(|e| e.as_ref().map(|e| self.expr(e)).unwrap_or_else(LabeledNode::empty)).collect();
                node(NodeKind::Tuple, "()", ch)
            }
            ExprKind::New(t) => node(NodeKind::New, "new", vec![LabeledNode::leaf(NodeKind::TypeName, &t.text, t.span)]),
        }
    }
}

/// Concrete labeled tree of a function. The root is the body block; parameter, return and
/// modifier-invocation nodes precede the statements as leading children.
pub fn function_tree(f: &FunctionDef, owner: &ContractDef) -> LabeledNode {
    let mut cv = Converter { owner, locals: HashSet::new() };
    let mut children = Vec::new();
    if !f.params.is_empty() {
        children.push(cv.params(NodeKind::ParameterList, "params", &f.params));
    }
    if !f.returns.is_empty() {
        children.push(cv.params(NodeKind::ReturnList, "returns", &f.returns));
    }
    for m in &f.modifiers {
        let args = cv.exprs(&m.args);
        children.push(LabeledNode::new(NodeKind::ModifierInvocation, &m.name, Some(m.span), args));
    }
    let span = match &f.body {
        Some(b) => {
            children.extend(b.stmts.iter().map(|s| cv.stmt(s)));
            b.span
        }
        None => f.span,
    };
    LabeledNode::new(NodeKind::Block, "{}", Some(span), children)
}

/// Concrete labeled tree of a modifier body (parameters lead, as for functions).
pub fn modifier_tree(m: &ModifierDef, owner: &ContractDef) -> LabeledNode {
    let mut cv = Converter { owner, locals: HashSet::new() };
    let mut children = Vec::new();
    if !m.params.is_empty() {
        children.push(cv.params(NodeKind::ParameterList, "params", &m.params));
    }
    children.extend(m.body.stmts.iter().map(|s| cv.stmt(s)));
    LabeledNode::new(NodeKind::Block, "{}", Some(m.body.span), children)
}
