//! Base detection rules, one per vulnerability type.

use super::facts::{destination, is_external_call, is_low_level_call, is_moneysend, is_selfdestruct, ContractCtx, Facts, FnCtx, Loc};
use super::{anchor_spans, Anchor, Candidate, Source};
use crate::cfg::{Opcode, Operand};
use crate::vuln::{RuleId, VulnType};
use std::collections::BTreeSet;

fn candidate(vt: VulnType, rule: RuleId, fi: usize, f: &FnCtx<'_>, anchors: BTreeSet<Anchor>) -> Candidate {
    let spans = anchor_spans(f, &anchors);
    Candidate { vuln_type: vt, function: fi, anchors, spans, source: Source::Rule, fired_rule: Some(rule), matched_avs: None }
}

fn mentions_tx_origin(facts: &Facts, cond: &Operand) -> bool {
    facts.expand(cond).0.iter().any(|o| o.is_builtin("tx.origin"))
}

/// Instruction at `l` is the kind of operation a finding of type `vt` is about.
pub fn is_sink(vt: VulnType, facts: &Facts, l: Loc) -> bool {
    let i = facts.instr(l);
    match vt {
        VulnType::Reentrancy => is_external_call(i),
        VulnType::UnexpectedRevert => is_moneysend(i),
        VulnType::UncheckedLowLevelCall => is_low_level_call(i),
        VulnType::SelfdestructAbuse => is_selfdestruct(i),
        VulnType::TxOriginAbuse => {
            i.opcode.is_condition()
                && facts.conditions().any(|(c, _, op)| c == l && op.is_some_and(|op| mentions_tx_origin(facts, op)))
        }
    }
}

/// Money sent to a state address that is later overwritten with `msg.sender`, or money
/// sent inside a loop.
pub fn rule_unexpected_revert(fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    let facts = &f.facts;
    let mut out = Vec::new();
    for (l, i) in facts.instrs() {
        if !is_moneysend(i) {
            continue;
        }
        let reassigned = match destination(i).and_then(|d| d.state_name()) {
            Some(name) => facts
                .instrs()
                .filter(|(w, x)| {
                    x.opcode == Opcode::WriteState
                        && x.operands[0].state_name() == Some(name)
                        && x.operands.get(1).is_some_and(|v| v.is_builtin("msg.sender"))
                        && facts.precedes(l, *w)
                })
                .map(|(w, _)| w)
                .collect(),
            None => Vec::new(),
        };
        if reassigned.is_empty() && !facts.in_loop(l) {
            continue;
        }
        let mut c = candidate(VulnType::UnexpectedRevert, RuleId::UnexpectedRevert, fi, f, BTreeSet::from([Anchor::at(l)]));
        for w in reassigned {
            if let Some(sp) = facts.instr(w).span {
                c.spans.insert(sp);
            }
        }
        out.push(c);
    }
    out
}

/// A state variable accessed before an external call and written after it.
pub fn rule_reentrancy(fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    let facts = &f.facts;
    let mut out = Vec::new();
    for (c, i) in facts.instrs() {
        if !is_external_call(i) {
            continue;
        }
        let written_after: BTreeSet<&str> = facts
            .instrs()
            .filter(|(w, x)| x.opcode == Opcode::WriteState && facts.precedes(c, *w))
            .filter_map(|(_, x)| x.operands[0].state_name())
            .collect();
        let hit = facts.instrs().any(|(x, ins)| {
            facts.precedes(x, c) && ins.operands.iter().any(|o| o.state_name().is_some_and(|n| written_after.contains(n)))
        });
        if hit {
            out.push(candidate(VulnType::Reentrancy, RuleId::ReentrancySlither, fi, f, BTreeSet::from([Anchor::at(c)])));
        }
    }
    out
}

/// `tx.origin` inside a control-flow condition of the function or of an applied modifier.
pub fn rule_tx_origin(fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    let scopes = std::iter::once(&f.facts).chain(f.modifiers.iter().map(|(_, m)| m));
    let mut anchors = BTreeSet::new();
    for (scope, facts) in scopes.enumerate() {
        for (l, _, op) in facts.conditions() {
            if op.is_some_and(|op| mentions_tx_origin(facts, op)) {
                anchors.insert(Anchor { scope, loc: l });
            }
        }
    }
    if anchors.is_empty() {
        return Vec::new();
    }
    vec![candidate(VulnType::TxOriginAbuse, RuleId::TxOriginSmartCheck, fi, f, anchors)]
}

/// `send`, `call`, `callcode`, `delegatecall` (and `call.value`) whose result is never tested.
pub fn rule_unchecked_llc(fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    let facts = &f.facts;
    facts
        .instrs()
        .filter(|(_, i)| is_low_level_call(i))
        .filter(|(_, i)| i.result.is_none_or(|t| !facts.result_checked(t)))
        .map(|(l, _)| candidate(VulnType::UncheckedLowLevelCall, RuleId::UncheckedLlc, fi, f, BTreeSet::from([Anchor::at(l)])))
        .collect()
}

pub fn rule_selfdestruct(fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    f.facts
        .instrs()
        .filter(|(_, i)| is_selfdestruct(i))
        .map(|(l, _)| candidate(VulnType::SelfdestructAbuse, RuleId::Selfdestruct, fi, f, BTreeSet::from([Anchor::at(l)])))
        .collect()
}

pub fn all_rules(_ctx: &ContractCtx<'_>, fi: usize, f: &FnCtx<'_>) -> Vec<Candidate> {
    let mut out = rule_reentrancy(fi, f);
    out.extend(rule_tx_origin(fi, f));
    out.extend(rule_unchecked_llc(fi, f));
    out.extend(rule_unexpected_revert(fi, f));
    out.extend(rule_selfdestruct(fi, f));
    out
}
