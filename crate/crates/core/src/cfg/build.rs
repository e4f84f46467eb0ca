//! Lowering of labeled trees into CFGs.

use super::ir::{Builtin, IrInstruction, KeyKind, MoneyVia, Opcode, Operand, LOOP};
use super::{Cfg, CfgNode, Edge, EdgeKind, NodeRole};
use crate::frontend::{ContractDef, FunctionDef, ModifierDef, Span};
use crate::normalize::NormalizedNode;
use crate::tree::{function_tree, modifier_tree, LabeledNode, NodeKind, BUILTIN_GLOBALS};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("unsupported construct: {what}")]
    Unsupported { what: String, span: Option<Span> },
    #[error("function has no body")]
    NoBody,
}

const EXIT: usize = usize::MAX;
const SINK: usize = usize::MAX - 1;

type Pending = (usize, EdgeKind);

struct LoopCtx {
    header: usize,
    breaks: Vec<Pending>,
    continues: Vec<Pending>,
}

struct Builder {
    nodes: Vec<CfgNode>,
    edges: Vec<Edge>,
    temps: u32,
    params: HashSet<String>,
    loops: Vec<LoopCtx>,
    cur: usize,
}

impl Builder {
    fn new_node(&mut self, role: NodeRole, span: Option<Span>, preds: &[Pending]) -> usize {
        let id = self.nodes.len();
        let loops = self.loops.iter().map(|l| l.header).collect();
        self.nodes.push(CfgNode { id, role, instrs: Vec::new(), span, loops });
        for &(from, kind) in preds {
            self.edges.push(Edge { from, to: id, kind });
        }
        self.cur = id;
        id
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.push(Edge { from, to, kind });
    }

    fn emit(&mut self, opcode: Opcode, operands: Vec<Operand>, span: Option<Span>, with_result: bool) -> Operand {
        let result = if with_result {
            self.temps += 1;
            Some(self.temps)
        } else {
            None
        };
        self.nodes[self.cur].instrs.push(IrInstruction { opcode, operands, result, span, receiver: false });
        match result {
            Some(t) => Operand::Temp(t),
            None => Operand::Token("*".into()),
        }
    }

    fn link_sink(&mut self, n: usize) {
        if self.nodes[n].instrs.iter().any(|i| matches!(i.opcode, Opcode::Require | Opcode::Assert)) {
            self.edge(n, SINK, EdgeKind::False);
        }
    }

    fn stmts(&mut self, list: &[LabeledNode], mut preds: Vec<Pending>) -> Result<Vec<Pending>, CfgError> {
        for s in list {
            preds = self.stmt(s, preds)?;
        }
        Ok(preds)
    }

    fn stmt(&mut self, s: &LabeledNode, preds: Vec<Pending>) -> Result<Vec<Pending>, CfgError> {
        if preds.is_empty() {
            // unreachable code after return/revert/break
            return Ok(preds);
        }
        let ch = &s.children;
        match s.kind {
            NodeKind::Block => self.stmts(ch, preds),
            NodeKind::If => {
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                let c = self.expr(&ch[0]);
                self.emit(Opcode::If, vec![c], s.span, false);
                let mut out = self.stmt(&ch[1], vec![(n, EdgeKind::True)])?;
                match ch.get(2) {
                    Some(e) => out.extend(self.stmt(e, vec![(n, EdgeKind::False)])?),
                    None => out.push((n, EdgeKind::False)),
                }
                Ok(out)
            }
            NodeKind::While => {
                let h = self.loop_header(s.span, &preds, Some(&ch[0]));
                let body = self.stmt(&ch[1], vec![(h, EdgeKind::True)])?;
                Ok(self.close_loop(h, body, None))
            }
            NodeKind::For => {
                let preds = if ch[0].kind == NodeKind::Empty { preds } else { self.stmt(&ch[0], preds)? };
                if preds.is_empty() {
                    return Ok(preds);
                }
                let cond = if ch[1].kind == NodeKind::Empty { None } else { Some(&ch[1]) };
                let h = self.loop_header(s.span, &preds, cond);
                let body = self.stmt(&ch[3], vec![(h, EdgeKind::True)])?;
                let update = if ch[2].kind == NodeKind::Empty { None } else { Some(&ch[2]) };
                Ok(self.close_loop(h, body, update))
            }
            NodeKind::DoWhile => {
                let first = self.nodes.len();
                self.loops.push(LoopCtx { header: first, breaks: Vec::new(), continues: Vec::new() });
                let mut body = self.stmt(&ch[0], preds)?;
                let ctx = self.loops.last_mut().unwrap();
                body.append(&mut ctx.continues);
                let c = self.new_node(NodeRole::Statement, ch[1].span.or(s.span), &body);
                let cond = self.expr(&ch[1]);
                self.emit(Opcode::If, vec![Operand::Token(LOOP.into()), cond], ch[1].span, false);
                self.edge(c, first, EdgeKind::LoopBack);
                let ctx = self.loops.pop().unwrap();
                let mut out = vec![(c, EdgeKind::False)];
                out.extend(ctx.breaks);
                Ok(out)
            }
            NodeKind::Require | NodeKind::Assert => {
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                let c = match ch.first() {
                    Some(e) => self.expr(e),
                    None => Operand::Token("*".into()),
                };
                for extra in ch.iter().skip(1) {
                    self.expr(extra);
                }
                let op = if s.kind == NodeKind::Require { Opcode::Require } else { Opcode::Assert };
                self.emit(op, vec![c], s.span, false);
                self.link_sink(n);
                Ok(vec![(n, EdgeKind::Seq)])
            }
            NodeKind::Revert | NodeKind::Throw => {
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                for a in ch {
                    self.expr(a);
                }
                self.emit(Opcode::Revert, vec![], s.span, false);
                self.edge(n, SINK, EdgeKind::Seq);
                Ok(vec![])
            }
            NodeKind::Return => {
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                let ops = ch.first().map(|e| vec![self.expr(e)]).unwrap_or_default();
                self.emit(Opcode::Return, ops, s.span, false);
                self.link_sink(n);
                self.edge(n, EXIT, EdgeKind::Seq);
                Ok(vec![])
            }
            NodeKind::Break | NodeKind::Continue => {
                match self.loops.last_mut() {
                    Some(ctx) if s.kind == NodeKind::Break => ctx.breaks.extend(preds),
                    Some(ctx) => ctx.continues.extend(preds),
                    None => {
                        return Err(CfgError::Unsupported { what: "break/continue outside loop".into(), span: s.span })
                    }
                }
                Ok(vec![])
            }
            NodeKind::VarDecl => {
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                let vars: Vec<Operand> = ch
                    .iter()
                    .filter(|c| matches!(c.kind, NodeKind::Parameter | NodeKind::Empty))
                    .map(|c| if c.kind == NodeKind::Empty { Operand::Token("*".into()) } else { Operand::Local(c.label.clone()) })
                    .collect();
                let init = ch.last().filter(|c| !matches!(c.kind, NodeKind::Parameter | NodeKind::Empty));
                let mut ops = vars;
                match init {
                    Some(e) => {
                        let v = self.expr(e);
                        let op = if ops.len() == 1 && matches!(v, Operand::State { .. }) { Opcode::ReadState } else { Opcode::Decl };
                        ops.push(v);
                        self.emit(op, ops, s.span, false);
                    }
                    None => {
                        self.emit(Opcode::Decl, ops, s.span, false);
                    }
                }
                self.link_sink(n);
                Ok(vec![(n, EdgeKind::Seq)])
            }
            NodeKind::Placeholder => {
                self.new_node(NodeRole::Statement, s.span, &preds);
                self.emit(Opcode::CallUser, vec![Operand::Callee("_".into())], s.span, false);
                Ok(vec![(self.cur, EdgeKind::Seq)])
            }
            NodeKind::Opaque => Err(CfgError::Unsupported { what: "opaque statement".into(), span: s.span }),
            NodeKind::ParameterList | NodeKind::ReturnList | NodeKind::ModifierInvocation => Ok(preds),
            _ => {
                // expression statement, emit, or a bare expression
                let n = self.new_node(NodeRole::Statement, s.span, &preds);
                let e = if matches!(s.kind, NodeKind::ExprStmt | NodeKind::Emit) { &ch[0] } else { s };
                self.expr(e);
                self.link_sink(n);
                Ok(vec![(n, EdgeKind::Seq)])
            }
        }
    }

    fn loop_header(&mut self, span: Option<Span>, preds: &[Pending], cond: Option<&LabeledNode>) -> usize {
        let h = self.nodes.len();
        self.loops.push(LoopCtx { header: h, breaks: Vec::new(), continues: Vec::new() });
        self.new_node(NodeRole::LoopHeader, span, preds);
        let mut ops = vec![Operand::Token(LOOP.into())];
        if let Some(c) = cond {
            ops.push(self.expr(c));
        }
        self.emit(Opcode::If, ops, cond.and_then(|c| c.span).or(span), false);
        h
    }

    fn close_loop(&mut self, h: usize, mut body: Vec<Pending>, update: Option<&LabeledNode>) -> Vec<Pending> {
        body.append(&mut self.loops.last_mut().unwrap().continues);
        match update {
            Some(u) if !body.is_empty() => {
                let n = self.new_node(NodeRole::Statement, u.span, &body);
                self.expr(u);
                self.edge(n, h, EdgeKind::LoopBack);
            }
            _ => {
                for (from, _) in body {
                    self.edge(from, h, EdgeKind::LoopBack);
                }
            }
        }
        let ctx = self.loops.pop().unwrap();
        let mut out = vec![(h, EdgeKind::False)];
        out.extend(ctx.breaks);
        out
    }

    fn key_kind(&self, op: &Operand) -> KeyKind {
        match op {
            Operand::Builtin(b) if b == "msg.sender" => KeyKind::Sender,
            Operand::Literal(_) => KeyKind::Const,
            Operand::Local(n) if self.params.contains(n) => KeyKind::Param,
            Operand::Local(_) => KeyKind::Local,
            Operand::State { .. } => KeyKind::State,
            _ => KeyKind::Other,
        }
    }

    fn write(&mut self, target: Operand, value: Operand, span: Option<Span>) {
        let op = match (&target, &value) {
            (Operand::State { .. }, _) => Opcode::WriteState,
            (_, Operand::State { .. }) => Opcode::ReadState,
            _ => Opcode::Assign,
        };
        self.emit(op, vec![target, value], span, false);
    }

    fn exprs(&mut self, es: &[LabeledNode]) -> Vec<Operand> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    fn expr(&mut self, e: &LabeledNode) -> Operand {
        let ch = &e.children;
        let sp = e.span;
        match e.kind {
            NodeKind::Identifier => {
                if BUILTIN_GLOBALS.contains(&e.label.as_str()) {
                    Operand::Builtin(e.label.clone())
                } else {
                    Operand::Local(e.label.clone())
                }
            }
            NodeKind::StateVariable => Operand::State { name: e.label.clone(), key: None },
            NodeKind::Literal => Operand::Literal(e.label.clone()),
            NodeKind::MsgSender => Operand::Builtin("msg.sender".into()),
            NodeKind::TxOrigin => Operand::Builtin("tx.origin".into()),
            NodeKind::TypeName => Operand::Builtin(e.label.clone()),
            NodeKind::Empty => Operand::Token("*".into()),
            NodeKind::Member => match self.expr(&ch[0]) {
                Operand::Builtin(p) if crate::tree::BUILTIN_MEMBERS.contains(&e.label.as_str()) => {
                    Operand::Builtin(format!("{}.{}", p, e.label))
                }
                other => other,
            },
            NodeKind::Index => {
                let base = self.expr(&ch[0]);
                let idx = self.expr(&ch[1]);
                match base {
                    Operand::State { name, key: None } => {
                        let key = if ch[1].kind == NodeKind::Empty { KeyKind::Other } else { self.key_kind(&idx) };
                        Operand::State { name, key: Some(key) }
                    }
                    other => other,
                }
            }
            NodeKind::Call => {
                let callee = &ch[0];
                let args = &ch[1..];
                match callee.kind {
                    NodeKind::TypeName if args.len() == 1 => self.expr(&args[0]),
                    NodeKind::Identifier => {
                        let mut ops = vec![Operand::Callee(callee.label.clone())];
                        ops.extend(self.exprs(args));
                        self.emit(Opcode::CallUser, ops, sp, true)
                    }
                    NodeKind::Member => {
                        let recv = self.expr(&callee.children[0]);
                        let mut ops = vec![Operand::Callee(callee.label.clone()), recv];
                        ops.extend(self.exprs(args));
                        let t = self.emit(Opcode::CallUser, ops, sp, true);
                        self.nodes[self.cur].instrs.last_mut().unwrap().receiver = true;
                        t
                    }
                    _ => {
                        let c = self.expr(callee);
                        let mut ops = vec![Operand::Callee("*CALL*".into()), c];
                        ops.extend(self.exprs(args));
                        self.emit(Opcode::CallUser, ops, sp, true)
                    }
                }
            }
            NodeKind::Transfer => {
                let d = self.expr(&ch[0]);
                let v = self.expr(&ch[1]);
                let t = self.emit(Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Transfer)), vec![d, v], sp, true);
                // transfer reverts on failure, i.e. behaves like require(send(..))
                self.emit(Opcode::Require, vec![t.clone()], sp, false);
                t
            }
            NodeKind::LowLevelCall => {
                let d = self.expr(&ch[0]);
                let args = self.exprs(&ch[1..]);
                match e.label.as_str() {
                    "send" => {
                        let v = args.into_iter().next().unwrap_or(Operand::Token("*".into()));
                        self.emit(Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Send)), vec![d, v], sp, true)
                    }
                    kind => {
                        let b = match kind {
                            "callcode" => Builtin::Callcode,
                            "delegatecall" => Builtin::Delegatecall,
                            _ => Builtin::Call,
                        };
                        self.emit(Opcode::CallBuiltin(b), vec![d], sp, true)
                    }
                }
            }
            NodeKind::ValueCall => {
                let callee = &ch[0];
                let (d, via) = if callee.kind == NodeKind::Member {
                    let via = if callee.label == "call" { MoneyVia::CallValue } else { MoneyVia::Value };
                    (self.expr(&callee.children[0]), via)
                } else {
                    (self.expr(callee), MoneyVia::Value)
                };
                let v = self.expr(&ch[1]);
                self.exprs(&ch[2..]);
                self.emit(Opcode::CallBuiltin(Builtin::MoneySend(via)), vec![d, v], sp, true)
            }
            NodeKind::Selfdestruct => {
                let d = self.expr(&ch[0]);
                self.emit(Opcode::CallBuiltin(Builtin::Selfdestruct), vec![d], sp, false)
            }
            NodeKind::BinaryOp => {
                let l = self.expr(&ch[0]);
                let r = self.expr(&ch[1]);
                self.emit(Opcode::Binop, vec![Operand::Op(e.label.clone()), l, r], sp, true)
            }
            NodeKind::UnaryOp => {
                let x = self.expr(&ch[0]);
                let t = self.emit(Opcode::Binop, vec![Operand::Op(e.label.clone()), x.clone()], sp, true);
                if matches!(e.label.as_str(), "++" | "--" | "post++" | "post--" | "delete") {
                    self.write(x, t.clone(), sp);
                }
                t
            }
            NodeKind::Assign => {
                let r = self.expr(&ch[1]);
                if ch[0].kind == NodeKind::Tuple {
                    for part in &ch[0].children {
                        if part.kind != NodeKind::Empty {
                            let target = self.expr(part);
                            self.write(target, r.clone(), sp);
                        }
                    }
                    return r;
                }
                let target = self.expr(&ch[0]);
                let value = if e.label == "=" {
                    r
                } else {
                    let op = e.label.trim_end_matches('=').to_string();
                    self.emit(Opcode::Binop, vec![Operand::Op(op), target.clone(), r], sp, true)
                };
                self.write(target.clone(), value, sp);
                target
            }
            NodeKind::Conditional => {
                let mut ops = vec![Operand::Op("?:".into())];
                ops.extend(self.exprs(ch));
                self.emit(Opcode::Binop, ops, sp, true)
            }
            NodeKind::Tuple => {
                let mut parts = self.exprs(ch);
                if parts.len() == 1 {
                    parts.pop().unwrap()
                } else {
                    Operand::Token("*".into())
                }
            }
            NodeKind::New => self.emit(Opcode::CallUser, vec![Operand::Callee("new".into())], sp, true),
            _ => Operand::Token("*".into()),
        }
    }
}

/// Lower a labeled tree whose root holds header nodes followed by statements.
pub fn build_cfg(root: &LabeledNode, origin: &str) -> Result<Cfg, CfgError> {
    let mut b = Builder { nodes: Vec::new(), edges: Vec::new(), temps: 0, params: HashSet::new(), loops: Vec::new(), cur: 0 };
    for h in root.children.iter().filter(|c| c.kind == NodeKind::ParameterList) {
        for p in &h.children {
            b.params.insert(p.label.clone());
        }
    }
    let entry = b.new_node(NodeRole::Entry, root.span, &[]);
    let out = b.stmts(&root.children, vec![(entry, EdgeKind::Seq)])?;
    for (from, kind) in out {
        b.edge(from, EXIT, kind);
    }
    let mut exit = None;
    let mut sink = None;
    if b.edges.iter().any(|e| e.to == EXIT) {
        exit = Some(b.new_node(NodeRole::Exit, None, &[]));
        b.nodes.last_mut().unwrap().loops.clear();
    }
    if b.edges.iter().any(|e| e.to == SINK) {
        sink = Some(b.new_node(NodeRole::RevertSink, None, &[]));
        b.nodes.last_mut().unwrap().loops.clear();
    }
    for e in &mut b.edges {
        if e.to == EXIT {
            e.to = exit.unwrap();
        } else if e.to == SINK {
            e.to = sink.unwrap();
        }
    }
    Ok(Cfg { origin: origin.to_string(), nodes: b.nodes, edges: b.edges, entry, exit, revert_sink: sink })
}

pub fn function_cfg(f: &FunctionDef, owner: &ContractDef) -> Result<Cfg, CfgError> {
    if f.body.is_none() {
        return Err(CfgError::NoBody);
    }
    build_cfg(&function_tree(f, owner), &format!("{}.{}", owner.name, f.display_name()))
}

pub fn modifier_cfg(m: &ModifierDef, owner: &ContractDef) -> Result<Cfg, CfgError> {
    build_cfg(&modifier_tree(m, owner), &format!("{}.{}", owner.name, m.name))
}

/// CFG of a normalized tree such as an AVS body.
pub fn tree_cfg(root: &NormalizedNode, origin: &str) -> Result<Cfg, CfgError> {
    build_cfg(&LabeledNode::from(root), origin)
}
