//! Syntax tree for parsed Solidity sources.

use super::span::Span;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceUnit {
    pub path: String,
    pub pragma: Option<String>,
    pub contracts: Vec<ContractDef>,
    pub diagnostics: Vec<Diagnostic>,
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractDef> {
        self.contracts.iter().find(|c| c.name == name)
    }
}

/// Non-fatal parser note, rendered as `path:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub span: Span,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.span.line, self.span.column, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Contract,
    Interface,
    Library,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractDef {
    pub kind: ContractKind,
    pub name: String,
    /// Inheritance list as written; bases are not flattened.
    pub bases: Vec<String>,
    pub state_vars: Vec<StateVarDecl>,
    pub functions: Vec<FunctionDef>,
    pub modifiers: Vec<ModifierDef>,
    pub structs: Vec<StructDef>,
    pub enums: Vec<EnumDef>,
    pub events: Vec<String>,
    pub span: Span,
}

impl ContractDef {
    pub fn state_var(&self, name: &str) -> Option<&StateVarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierDef> {
        self.modifiers.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    Pure,
    View,
    Constant,
    Payable,
    NonPayable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeName {
    /// Canonical text, e.g. `uint256`, `mapping(address=>uint256)`, `Deal[]`.
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVarDecl {
    pub ty: TypeName,
    pub name: String,
    pub visibility: Visibility,
    pub constant: bool,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub ty: TypeName,
    pub name: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifierInvocation {
    pub name: String,
    pub args: Vec<Expr>,
    /// Whether a modifier with this name is declared in the unit.
    pub resolved: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionDef {
    pub kind: FunctionKind,
    /// Empty for constructors and fallback/receive functions.
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    pub modifiers: Vec<ModifierInvocation>,
    pub body: Option<Block>,
    pub span: Span,
}

impl FunctionDef {
    /// Name used in reports.
    pub fn display_name(&self) -> &str {
        match self.kind {
            FunctionKind::Function => &self.name,
            FunctionKind::Constructor => "constructor",
            FunctionKind::Fallback => "fallback",
            FunctionKind::Receive => "receive",
        }
    }

    pub fn is_externally_callable(&self) -> bool {
        matches!(self.visibility, Visibility::Public | Visibility::External | Visibility::Default)
            && self.kind != FunctionKind::Constructor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifierDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<Param>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumDef {
    pub name: String,
    pub values: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalVar {
    pub ty: TypeName,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StmtKind {
    Block(Block),
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, update: Option<Expr>, body: Box<Stmt> },
    Require { args: Vec<Expr> },
    Assert { cond: Expr },
    Revert { args: Vec<Expr> },
    Throw,
    Expr(Expr),
    VarDecl { vars: Vec<Option<LocalVar>>, init: Option<Expr> },
    Return(Option<Expr>),
    Emit(Expr),
    Break,
    Continue,
    /// `_;` inside a modifier body.
    Placeholder,
    /// Statement the parser could not classify; kept with its span.
    Opaque(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowLevelKind {
    Call,
    Callcode,
    Delegatecall,
    Send,
}

impl LowLevelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LowLevelKind::Call => "call",
            LowLevelKind::Callcode => "callcode",
            LowLevelKind::Delegatecall => "delegatecall",
            LowLevelKind::Send => "send",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LitKind {
    Number,
    Address,
    Str,
    HexStr,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Ident(String),
    /// Literal with its source text (sub-denominations such as `ether` included).
    Literal(LitKind, String),
    MsgSender,
    TxOrigin,
    /// Elementary type used as an expression, e.g. the callee in `address(x)`.
    ElementaryType(String),
    Member { base: Box<Expr>, member: String },
    Index { base: Box<Expr>, index: Option<Box<Expr>> },
    Call { callee: Box<Expr>, args: Vec<Expr> },
    /// `target.transfer(value)` with exactly one argument.
    Transfer { target: Box<Expr>, value: Box<Expr> },
    /// `target.send(v)`, `target.call(..)`, `target.callcode(..)`, `target.delegatecall(..)`.
    LowLevelCall { kind: LowLevelKind, target: Box<Expr>, args: Vec<Expr> },
    /// `callee.value(v)(args)`; `callee` is the function expression before `.value`.
    ValueCall { callee: Box<Expr>, value: Box<Expr>, args: Vec<Expr> },
    Selfdestruct(Box<Expr>),
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: String, prefix: bool, operand: Box<Expr> },
    Assign { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Conditional { cond: Box<Expr>, then: Box<Expr>, els: Box<Expr> },
    Tuple(Vec<Option<Expr>>),
    New(TypeName),
}

impl Expr {
    /// Direct sub-expressions in source order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Ident(_)
            | ExprKind::Literal(..)
            | ExprKind::MsgSender
            | ExprKind::TxOrigin
            | ExprKind::ElementaryType(_)
            | ExprKind::New(_) => vec![],
            ExprKind::Member { base, .. } => vec![base],
            ExprKind::Index { base, index } => std::iter::once(&**base).chain(index.as_deref()).collect(),
            ExprKind::Call { callee, args } => std::iter::once(&**callee).chain(args).collect(),
            ExprKind::Transfer { target, value } => vec![target, value],
            ExprKind::LowLevelCall { target, args, .. } => std::iter::once(&**target).chain(args).collect(),
            ExprKind::ValueCall { callee, value, args } => [&**callee, &**value].into_iter().chain(args).collect(),
            ExprKind::Selfdestruct(a) => vec![a],
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Conditional { cond, then, els } => vec![cond, then, els],
            ExprKind::Tuple(es) => es.iter().flatten().collect(),
        }
    }

    /// True if `pred` holds for this expression or any sub-expression.
    pub fn any(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }
}
