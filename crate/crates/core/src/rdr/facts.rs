//! Per-function and per-contract facts the rules and defense checks query.

use crate::cfg::{flatten, function_cfg, modifier_cfg, Builtin, Cfg, CfgError, EdgeKind, IrInstruction, IrSequence, MoneyVia, NodeRole, Opcode, Operand};
use crate::frontend::{ContractDef, Expr, ExprKind, FunctionDef, FunctionKind, LitKind, ModifierDef, SourceUnit, Visibility};
use std::collections::{BTreeSet, HashMap, HashSet};

/// Instruction position: CFG node and index inside the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loc {
    pub node: usize,
    pub idx: usize,
}

/// A CFG with the derived relations the checks need.
#[derive(Debug, Clone)]
pub struct Facts {
    pub cfg: Cfg,
    pub seq: IrSequence,
    /// Location of each item of `seq`.
    pub locs: Vec<Loc>,
    reach: Vec<Vec<bool>>,
    /// Reachability including loop-back edges.
    reach_any: Vec<Vec<bool>>,
    dom: Vec<Vec<bool>>,
    temp_defs: HashMap<u32, Loc>,
}

fn reachability(cfg: &Cfg, with_back_edges: bool) -> Vec<Vec<bool>> {
    let n = cfg.nodes.len();
    let mut reach = vec![vec![false; n]; n];
    for (s, row) in reach.iter_mut().enumerate() {
        let mut stack: Vec<usize> = cfg.successors(s, with_back_edges);
        while let Some(v) = stack.pop() {
            if !row[v] {
                row[v] = true;
                stack.extend(cfg.successors(v, with_back_edges));
            }
        }
    }
    reach
}

impl Facts {
    pub fn new(cfg: Cfg) -> Facts {
        let seq = flatten(&cfg);
        let mut locs = Vec::with_capacity(seq.len());
        let mut last: Option<(usize, usize)> = None;
        for &n in &seq.nodes {
            let idx = match last {
                Some((p, i)) if p == n => i + 1,
                _ => 0,
            };
            locs.push(Loc { node: n, idx });
            last = Some((n, idx));
        }
        let reach = reachability(&cfg, false);
        let reach_any = reachability(&cfg, true);
        let dom = cfg.dominators();
        let mut temp_defs = HashMap::new();
        for node in &cfg.nodes {
            for (idx, i) in node.instrs.iter().enumerate() {
                if let Some(t) = i.result {
                    temp_defs.insert(t, Loc { node: node.id, idx });
                }
            }
        }
        Facts { cfg, seq, locs, reach, reach_any, dom, temp_defs }
    }

    pub fn instr(&self, l: Loc) -> &IrInstruction {
        &self.cfg.nodes[l.node].instrs[l.idx]
    }

    /// All instructions in node order.
    pub fn instrs(&self) -> impl Iterator<Item = (Loc, &IrInstruction)> {
        self.cfg
            .nodes
            .iter()
            .flat_map(|n| n.instrs.iter().enumerate().map(move |(idx, i)| (Loc { node: n.id, idx }, i)))
    }

    /// `a` executes before `b` on some loop-free path, or `b` follows a loop containing `a`.
    pub fn precedes(&self, a: Loc, b: Loc) -> bool {
        if a.node == b.node {
            return a.idx < b.idx;
        }
        if self.reach[a.node][b.node] {
            return true;
        }
        let inner = &self.cfg.nodes[b.node].loops;
        self.reach_any[a.node][b.node] && self.cfg.nodes[a.node].loops.iter().any(|h| !inner.contains(h))
    }

    /// Node `a` dominates node `b`.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        self.dom[b][a]
    }

    pub fn in_loop(&self, l: Loc) -> bool {
        !self.cfg.nodes[l.node].loops.is_empty()
    }

    pub fn def_of(&self, t: u32) -> Option<&IrInstruction> {
        self.temp_defs.get(&t).map(|&l| self.instr(l))
    }

    /// Operands reachable from `op` through the temporaries of arithmetic and comparison
    /// instructions, together with those instructions.
    pub fn expand<'a>(&'a self, op: &'a Operand) -> (Vec<&'a Operand>, Vec<&'a IrInstruction>) {
        let mut leaves = Vec::new();
        let mut binops = Vec::new();
        let mut stack = vec![op];
        while let Some(o) = stack.pop() {
            if let Operand::Temp(t) = o {
                if let Some(d) = self.def_of(*t) {
                    if d.opcode == Opcode::Binop {
                        binops.push(d);
                        stack.extend(d.operands.iter().skip(1));
                        continue;
                    }
                }
            }
            leaves.push(o);
        }
        (leaves, binops)
    }

    /// Conditions (`REQUIRE`, `ASSERT`, `IF`) with their tested operand.
    pub fn conditions(&self) -> impl Iterator<Item = (Loc, &IrInstruction, Option<&Operand>)> {
        self.instrs().filter(|(_, i)| i.opcode.is_condition()).map(|(l, i)| {
            let loop_tag = matches!(i.operands.first(), Some(Operand::Token(t)) if t == crate::cfg::ir::LOOP);
            let c = if loop_tag { i.operands.get(1) } else { i.operands.first() };
            (l, i, c)
        })
    }

    pub fn is_loop_header(&self, node: usize) -> bool {
        self.cfg.nodes[node].role == NodeRole::LoopHeader
            || self.cfg.nodes[node].instrs.iter().any(|i| {
                i.opcode == Opcode::If && matches!(i.operands.first(), Some(Operand::Token(t)) if t == crate::cfg::ir::LOOP)
            })
    }

    /// Successor reached over an edge of `kind`.
    pub fn branch(&self, node: usize, kind: EdgeKind) -> Option<usize> {
        self.cfg.edges.iter().find(|e| e.from == node && e.kind == kind).map(|e| e.to)
    }

    pub fn reverts(&self, node: usize) -> bool {
        self.cfg.nodes[node].instrs.iter().any(|i| i.opcode == Opcode::Revert)
    }

    /// Conditions that every execution reaching `a` has passed: earlier conditions in
    /// the same node, dominating require/assert nodes, and dominating `if` nodes whose
    /// taken branch dominates `a`. Loop headers are excluded.
    pub fn guards(&self, a: Loc) -> Vec<Loc> {
        let mut out = Vec::new();
        for (l, i, _) in self.conditions() {
            if self.is_loop_header(l.node) {
                continue;
            }
            let ok = if l.node == a.node {
                l.idx < a.idx && i.opcode != Opcode::If
            } else if !self.dominates(l.node, a.node) {
                false
            } else if i.opcode == Opcode::If {
                [EdgeKind::True, EdgeKind::False]
                    .iter()
                    .filter_map(|&k| self.branch(l.node, k))
                    .any(|s| self.dominates(s, a.node))
            } else {
                true
            };
            if ok {
                out.push(l);
            }
        }
        out
    }

    /// Whether the value of temporary `t` reaches a condition or a return, directly or
    /// through arithmetic, local variables or negation.
    pub fn result_checked(&self, t: u32) -> bool {
        self.result_reaches(t, |op| matches!(op, Opcode::Require | Opcode::Assert | Opcode::If | Opcode::Return))
    }

    /// Whether the value of temporary `t` flows into an instruction whose opcode satisfies `sink`.
    pub fn result_reaches(&self, t: u32, sink: impl Fn(Opcode) -> bool) -> bool {
        let mut temps: HashSet<u32> = HashSet::from([t]);
        let mut locals: HashSet<String> = HashSet::new();
        let uses = |o: &Operand, temps: &HashSet<u32>, locals: &HashSet<String>| match o {
            Operand::Temp(x) => temps.contains(x),
            Operand::Local(n) => locals.contains(n),
            _ => false,
        };
        let instrs: Vec<(Loc, &IrInstruction)> = self.instrs().collect();
        let mut changed = true;
        while changed {
            changed = false;
            for (_, i) in &instrs {
                let hit = i.operands.iter().any(|o| uses(o, &temps, &locals));
                if !hit {
                    continue;
                }
                if sink(i.opcode) {
                    return true;
                }
                match i.opcode {
                    Opcode::Binop => {
                        if let Some(r) = i.result {
                            changed |= temps.insert(r);
                        }
                    }
                    Opcode::Decl | Opcode::Assign => {
                        let n = i.operands.len();
                        if n >= 2 && uses(&i.operands[n - 1], &temps, &locals) {
                            for o in &i.operands[..n - 1] {
                                if let Operand::Local(name) = o {
                                    changed |= locals.insert(name.clone());
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        false
    }
}

/// Money-transfer or external call classification of an instruction.
pub fn is_moneysend(i: &IrInstruction) -> bool {
    i.money_via().is_some()
}

/// External calls that can re-enter: value-carrying calls other than `send`/`transfer`,
/// raw calls, and token-style `transfer`/`transferFrom` on a receiver.
pub fn is_external_call(i: &IrInstruction) -> bool {
    match i.opcode {
        Opcode::CallBuiltin(Builtin::MoneySend(v)) => matches!(v, MoneyVia::Value | MoneyVia::CallValue),
        Opcode::CallBuiltin(Builtin::Call | Builtin::Callcode | Builtin::Delegatecall) => true,
        Opcode::CallUser => {
            i.receiver
                && matches!(i.operands.first(), Some(Operand::Callee(n)) if n == "transfer" || n == "transferFrom")
                && !matches!(i.operands.get(1), Some(Operand::Builtin(b)) if b == "this" || b == "super")
        }
        _ => false,
    }
}

/// Low-level calls whose boolean result should be checked.
pub fn is_low_level_call(i: &IrInstruction) -> bool {
    matches!(
        i.opcode,
        Opcode::CallBuiltin(Builtin::MoneySend(MoneyVia::Send | MoneyVia::CallValue))
            | Opcode::CallBuiltin(Builtin::Call | Builtin::Callcode | Builtin::Delegatecall)
    )
}

pub fn is_selfdestruct(i: &IrInstruction) -> bool {
    i.opcode == Opcode::CallBuiltin(Builtin::Selfdestruct)
}

/// Destination (payee or callee) operand of a call-like instruction.
pub fn destination(i: &IrInstruction) -> Option<&Operand> {
    match i.opcode {
        Opcode::CallBuiltin(_) => i.operands.first(),
        Opcode::CallUser if i.receiver => i.operands.get(1),
        _ => None,
    }
}

fn has_address_literal(e: &Expr) -> bool {
    e.any(&|x| matches!(x.kind, ExprKind::Literal(LitKind::Address, _)))
}

/// One function with its own facts and the facts of the modifiers applied to it.
#[derive(Debug)]
pub struct FnCtx<'a> {
    pub function: &'a FunctionDef,
    pub facts: Facts,
    /// Applied modifiers that resolve to a definition, with their facts.
    pub modifiers: Vec<(&'a ModifierDef, Facts)>,
}

/// Contract-wide facts.
#[derive(Debug)]
pub struct ContractCtx<'a> {
    pub unit: &'a SourceUnit,
    pub contract: &'a ContractDef,
    /// One entry per function of the contract, `None` for bodiless functions.
    pub functions: Vec<Option<Result<FnCtx<'a>, CfgError>>>,
    pub owner_like: BTreeSet<String>,
    /// Values written to each state variable across all function bodies.
    pub state_writes: HashMap<String, Vec<Operand>>,
    /// Functions reachable from an externally callable one via internal calls.
    pub reachable: HashSet<usize>,
}

fn find_modifier<'a>(unit: &'a SourceUnit, owner: &'a ContractDef, name: &str) -> Option<(&'a ModifierDef, &'a ContractDef)> {
    if let Some(m) = owner.modifier(name) {
        return Some((m, owner));
    }
    let mut bases: Vec<&str> = owner.bases.iter().map(|s| s.as_str()).collect();
    let mut seen = HashSet::new();
    while let Some(b) = bases.pop() {
        if !seen.insert(b) {
            continue;
        }
        if let Some(c) = unit.contract(b) {
            if let Some(m) = c.modifier(name) {
                return Some((m, c));
            }
            bases.extend(c.bases.iter().map(|s| s.as_str()));
        }
    }
    None
}

impl<'a> ContractCtx<'a> {
    pub fn new(unit: &'a SourceUnit, contract: &'a ContractDef) -> ContractCtx<'a> {
        let functions: Vec<Option<Result<FnCtx<'a>, CfgError>>> = contract
            .functions
            .iter()
            .map(|f| {
                f.body.as_ref()?;
                Some(function_cfg(f, contract).map(|cfg| {
                    let modifiers = f
                        .modifiers
                        .iter()
                        .filter_map(|mi| find_modifier(unit, contract, &mi.name))
                        .filter_map(|(m, owner)| modifier_cfg(m, owner).ok().map(|c| (m, Facts::new(c))))
                        .collect();
                    FnCtx { function: f, facts: Facts::new(cfg), modifiers }
                }))
            })
            .collect();

        let mut state_writes: HashMap<String, Vec<Operand>> = HashMap::new();
        let mut ctor_sender_writes = HashSet::new();
        for (f, ctx) in contract.functions.iter().zip(&functions) {
            let Some(Ok(ctx)) = ctx else { continue };
            for (_, i) in ctx.facts.instrs() {
                if i.opcode == Opcode::WriteState {
                    if let (Some(name), Some(v)) = (i.operands[0].state_name(), i.operands.get(1)) {
                        state_writes.entry(name.to_string()).or_default().push(v.clone());
                        if f.kind == FunctionKind::Constructor && v.is_builtin("msg.sender") {
                            ctor_sender_writes.insert(name.to_string());
                        }
                    }
                }
            }
        }
        let owner_like = contract
            .state_vars
            .iter()
            .filter(|v| v.ty.text.starts_with("address"))
            .filter(|v| {
                let l = v.name.to_ascii_lowercase();
                l.contains("owner") || l.contains("admin") || ctor_sender_writes.contains(&v.name)
            })
            .map(|v| v.name.clone())
            .collect();

        // internal call graph closure from the externally callable functions
        let index: HashMap<&str, usize> =
            contract.functions.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
        let mut reachable = HashSet::new();
        let mut stack: Vec<usize> = contract
            .functions
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_externally_callable() || f.kind == FunctionKind::Constructor)
            .map(|(i, _)| i)
            .collect();
        while let Some(i) = stack.pop() {
            if !reachable.insert(i) {
                continue;
            }
            if let Some(Some(Ok(ctx))) = functions.get(i) {
                for (_, ins) in ctx.facts.instrs() {
                    if ins.opcode == Opcode::CallUser && !ins.receiver {
                        if let Some(Operand::Callee(n)) = ins.operands.first() {
                            if let Some(&j) = index.get(n.as_str()) {
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        ContractCtx { unit, contract, functions, owner_like, state_writes, reachable }
    }

    /// The state variable is initialized with an address constant and never assigned a
    /// non-constant value.
    pub fn hard_coded_state(&self, name: &str) -> bool {
        let Some(decl) = self.contract.state_var(name) else { return false };
        let init_const = decl.init.as_ref().is_some_and(has_address_literal);
        let writes_const = self
            .state_writes
            .get(name)
            .is_none_or(|ws| ws.iter().all(|w| matches!(w, Operand::Literal(t) if crate::normalize::is_address_literal(t))));
        (init_const || decl.constant && decl.init.is_some()) && writes_const
    }

    pub fn is_bool_state(&self, name: &str) -> bool {
        self.contract.state_var(name).is_some_and(|v| v.ty.text == "bool")
    }

    pub fn is_private(&self, f: &FunctionDef) -> bool {
        matches!(f.visibility, Visibility::Private | Visibility::Internal)
    }
}

/// `op` compares `msg.sender` with a state variable (or a `msg.sender`-keyed mapping entry).
pub fn identity_test(facts: &Facts, cond: &Operand, owner_like: Option<&BTreeSet<String>>) -> Option<&'static str> {
    let (leaves, binops) = facts.expand(cond);
    for b in binops {
        let (Some(Operand::Op(op)), Some(l), Some(r)) = (b.operands.first(), b.operands.get(1), b.operands.get(2)) else {
            continue;
        };
        if op != "==" && op != "!=" {
            continue;
        }
        let pair = |x: &Operand, y: &Operand| {
            x.is_builtin("msg.sender")
                && match y {
                    Operand::State { name, .. } => owner_like.is_none_or(|o| o.contains(name)),
                    _ => false,
                }
        };
        if pair(l, r) || pair(r, l) {
            return Some(if op == "==" { "==" } else { "!=" });
        }
    }
    if owner_like.is_none()
        && leaves.iter().any(|o| matches!(o, Operand::State { key: Some(crate::cfg::KeyKind::Sender), .. }))
    {
        return Some("==");
    }
    None
}

/// A modifier body rejects callers that fail an identity check: a require/assert on the
/// check, an `if (msg.sender != x)` with a reverting branch, or an `if (msg.sender == x)`
/// guarding the placeholder.
pub fn modifier_checks_identity(facts: &Facts) -> bool {
    facts.conditions().any(|(l, i, c)| {
        let Some(c) = c else { return false };
        match (i.opcode, identity_test(facts, c, None)) {
            (Opcode::Require | Opcode::Assert, Some("==")) => true,
            (Opcode::If, Some("!=")) => facts.branch(l.node, EdgeKind::True).is_some_and(|t| facts.reverts(t)),
            (Opcode::If, Some("==")) => facts.branch(l.node, EdgeKind::True).is_some_and(|t| {
                facts.cfg.nodes[t]
                    .instrs
                    .iter()
                    .any(|x| matches!(x.operands.first(), Some(Operand::Callee(n)) if n == "_"))
            }),
            _ => false,
        }
    })
}
