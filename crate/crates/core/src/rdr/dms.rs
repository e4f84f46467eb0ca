//! Defense-mechanism checks. A mechanism holds for a candidate when it holds for every
//! anchor of the candidate.

use super::facts::{destination, identity_test, is_moneysend, modifier_checks_identity, ContractCtx, Facts, FnCtx, Loc};
use super::{Anchor, Candidate};
use crate::cfg::{EdgeKind, KeyKind, MoneyVia, Opcode, Operand};
use crate::normalize::is_address_literal;
use crate::vuln::DmId;

pub fn holds(dm: DmId, c: &Candidate, ctx: &ContractCtx<'_>, f: &FnCtx<'_>) -> bool {
    match dm {
        DmId::Dm3 => private_or_guarded_by_modifier(ctx, c.function, f),
        DmId::Dm10 => {
            modifier_guard(f) || all_anchors(c, f, |facts, a| !facts.guards(a).is_empty())
        }
        DmId::Dm1 => all_anchors(c, f, |facts, a| owner_check(ctx, facts, a)),
        DmId::Dm2 => all_anchors(c, f, |facts, a| hard_coded_destination(ctx, facts, a)),
        DmId::Dm4 => all_anchors(c, f, |facts, a| execution_lock(ctx, facts, a)),
        DmId::Dm5 => all_anchors(c, f, updates_before),
        DmId::Dm6 => all_anchors(c, f, non_reverting_in_loop),
        DmId::Dm7 => all_anchors(c, f, single_account_in_loop),
        DmId::Dm8 => all_anchors(c, f, origin_is_sender_check),
        DmId::Dm9 => all_anchors(c, f, |facts, a| {
            facts.instr(a).result.is_some_and(|t| facts.result_checked(t))
        }),
    }
}

fn all_anchors(c: &Candidate, f: &FnCtx<'_>, pred: impl Fn(&Facts, Loc) -> bool) -> bool {
    !c.anchors.is_empty()
        && c.anchors.iter().all(|&Anchor { scope, loc }| {
            let facts = if scope == 0 { &f.facts } else { &f.modifiers[scope - 1].1 };
            pred(facts, loc)
        })
}

fn modifier_guard(f: &FnCtx<'_>) -> bool {
    f.modifiers.iter().any(|(_, m)| modifier_checks_identity(m))
}

/// DM1: a dominating check of `msg.sender` against an owner-like state variable.
fn owner_check(ctx: &ContractCtx<'_>, facts: &Facts, a: Loc) -> bool {
    facts.guards(a).into_iter().any(|g| {
        let i = facts.instr(g);
        let Some(cond) = i.operands.first() else { return false };
        match (i.opcode, identity_test(facts, cond, Some(&ctx.owner_like))) {
            (Opcode::Require | Opcode::Assert, Some("==")) => true,
            (Opcode::If, Some("==")) => facts.branch(g.node, EdgeKind::True).is_some_and(|t| facts.dominates(t, a.node)),
            (Opcode::If, Some("!=")) => facts.branch(g.node, EdgeKind::True).is_some_and(|t| facts.reverts(t)),
            _ => false,
        }
    })
}

fn hard_coded(ctx: &ContractCtx<'_>, facts: &Facts, op: &Operand, depth: usize) -> bool {
    match op {
        Operand::Literal(t) => is_address_literal(t),
        Operand::State { name, key: None } => ctx.hard_coded_state(name),
        Operand::Local(name) if depth > 0 => {
            let mut values = facts.instrs().filter_map(|(_, i)| match i.opcode {
                Opcode::Decl | Opcode::Assign | Opcode::ReadState
                    if i.operands.len() >= 2 && i.operands[..i.operands.len() - 1].contains(op) =>
                {
                    i.operands.last()
                }
                _ => None,
            });
            let first = values.next();
            first.is_some_and(|v| hard_coded(ctx, facts, v, depth - 1)) && values.all(|v| hard_coded(ctx, facts, v, depth - 1))
        }
        _ => false,
    }
}

/// DM2: the payee or callee is a hard-coded address.
fn hard_coded_destination(ctx: &ContractCtx<'_>, facts: &Facts, a: Loc) -> bool {
    destination(facts.instr(a)).is_some_and(|d| hard_coded(ctx, facts, d, 2))
}

/// DM3: not reachable from outside, or protected by an identity-checking modifier.
fn private_or_guarded_by_modifier(ctx: &ContractCtx<'_>, fi: usize, f: &FnCtx<'_>) -> bool {
    (ctx.is_private(f.function) && !ctx.reachable.contains(&fi)) || modifier_guard(f)
}

/// DM4: a boolean state lock tested before the call, set before it and reset after it.
fn execution_lock(ctx: &ContractCtx<'_>, facts: &Facts, a: Loc) -> bool {
    let tested: Vec<String> = facts
        .guards(a)
        .into_iter()
        .filter_map(|g| facts.instr(g).operands.first().map(|c| facts.expand(c).0))
        .flatten()
        .filter_map(|o| o.state_name().map(str::to_string))
        .filter(|n| ctx.is_bool_state(n))
        .collect();
    tested.iter().any(|lock| {
        let writes: Vec<(Loc, &str)> = facts
            .instrs()
            .filter(|(_, i)| i.opcode == Opcode::WriteState && i.operands[0].state_name() == Some(lock.as_str()))
            .filter_map(|(l, i)| match i.operands.get(1) {
                Some(Operand::Literal(v)) if v == "true" || v == "false" => Some((l, v.as_str())),
                _ => None,
            })
            .collect();
        writes.iter().any(|&(s, v)| {
            facts.precedes(s, a) && writes.iter().any(|&(r, w)| w != v && facts.precedes(a, r))
        })
    })
}

/// DM5: every state write of the function happens before the call, on a scalar or on a
/// caller- or constant-keyed entry.
fn updates_before(facts: &Facts, a: Loc) -> bool {
    let writes: Vec<(Loc, &Operand)> = facts
        .instrs()
        .filter(|(_, i)| i.opcode == Opcode::WriteState)
        .map(|(l, i)| (l, &i.operands[0]))
        .collect();
    !writes.is_empty()
        && writes.iter().all(|&(w, target)| {
            facts.precedes(w, a)
                && matches!(target, Operand::State { key: None | Some(KeyKind::Sender) | Some(KeyKind::Const), .. })
        })
}

/// DM6: a payment in a loop whose failure does not revert the transaction.
fn non_reverting_in_loop(facts: &Facts, a: Loc) -> bool {
    let i = facts.instr(a);
    facts.in_loop(a)
        && matches!(i.money_via(), Some(MoneyVia::Send | MoneyVia::CallValue))
        && !i.result.is_some_and(|t| facts.result_reaches(t, |op| matches!(op, Opcode::Require | Opcode::Assert)))
}

fn bound_to_sender(facts: &Facts, op: &Operand) -> bool {
    match op {
        Operand::Builtin(b) => b == "msg.sender",
        Operand::Local(_) => {
            let mut values = facts.instrs().filter_map(|(_, i)| match i.opcode {
                Opcode::Decl | Opcode::Assign if i.operands.len() >= 2 && i.operands[..i.operands.len() - 1].contains(op) => {
                    i.operands.last()
                }
                _ => None,
            });
            let first = values.next();
            first.is_some_and(|v| v.is_builtin("msg.sender")) && values.all(|v| v.is_builtin("msg.sender"))
        }
        _ => false,
    }
}

/// DM7: every payment in the loop goes to the caller.
fn single_account_in_loop(facts: &Facts, a: Loc) -> bool {
    if !facts.in_loop(a) {
        return false;
    }
    let loops = &facts.cfg.nodes[a.node].loops;
    facts
        .instrs()
        .filter(|(l, i)| is_moneysend(i) && facts.cfg.nodes[l.node].loops.iter().any(|h| loops.contains(h)))
        .all(|(_, i)| destination(i).is_some_and(|d| bound_to_sender(facts, d)))
}

/// DM8: `tx.origin` is only compared with `msg.sender`.
fn origin_is_sender_check(facts: &Facts, a: Loc) -> bool {
    let i = facts.instr(a);
    let loop_tag = matches!(i.operands.first(), Some(Operand::Token(t)) if t == crate::cfg::ir::LOOP);
    let Some(cond) = (if loop_tag { i.operands.get(1) } else { i.operands.first() }) else { return false };
    facts.expand(cond).1.iter().any(|b| {
        let ops = &b.operands;
        matches!(ops.first(), Some(Operand::Op(o)) if o == "==" || o == "!=")
            && ops.len() == 3
            && ((ops[1].is_builtin("tx.origin") && ops[2].is_builtin("msg.sender"))
                || (ops[2].is_builtin("tx.origin") && ops[1].is_builtin("msg.sender")))
    })
}
