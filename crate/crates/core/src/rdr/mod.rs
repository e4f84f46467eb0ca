//! Detection engine: base rules per vulnerability type, signature-match candidates,
//! and the defense-mechanism filters that suppress them.

pub mod dms;
pub mod facts;
pub mod rules;

use crate::frontend::{Span, SourceUnit};
use crate::matcher::{match_keyed, MatchConfig};
use crate::store::AvsStore;
use crate::vuln::{DmId, RuleId, VulnType};
use facts::{ContractCtx, FnCtx, Loc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Rule,
    Avs,
    Both,
}

impl Source {
    fn join(self, other: Source) -> Source {
        if self == other {
            self
        } else {
            Source::Both
        }
    }
}

/// Evidence location: `scope` 0 is the function itself, `k > 0` the k-th resolved
/// modifier applied to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Anchor {
    pub scope: usize,
    pub loc: Loc,
}

impl Anchor {
    pub fn at(loc: Loc) -> Anchor {
        Anchor { scope: 0, loc }
    }
}

/// A finding before defense checks, tied to a function of a contract context.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub vuln_type: VulnType,
    pub function: usize,
    pub anchors: BTreeSet<Anchor>,
    pub spans: BTreeSet<Span>,
    pub source: Source,
    pub fired_rule: Option<RuleId>,
    pub matched_avs: Option<String>,
}

impl Candidate {
    fn overlaps(&self, other: &Candidate) -> bool {
        self.anchors.intersection(&other.anchors).next().is_some()
            || self.spans.iter().any(|a| other.spans.iter().any(|b| a.overlaps(b)))
    }

    fn absorb(&mut self, other: Candidate) {
        self.anchors.extend(other.anchors);
        self.spans.extend(other.spans);
        self.source = self.source.join(other.source);
        self.fired_rule = match (self.fired_rule, other.fired_rule) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.matched_avs = match (self.matched_avs.take(), other.matched_avs) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub vuln_type: VulnType,
    pub contract: String,
    pub function: String,
    pub spans: Vec<Span>,
    pub source: Source,
    pub fired_rule: Option<RuleId>,
    pub matched_avs: Option<String>,
    /// Defense mechanisms found; empty means the finding is reported.
    pub suppressed_by: Vec<DmId>,
}

impl Finding {
    pub fn reported(&self) -> bool {
        self.suppressed_by.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    #[default]
    Both,
    RulesOnly,
    AvsOnly,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanOptions {
    pub matching: MatchConfig,
    pub mode: ScanMode,
    pub disabled_dms: BTreeSet<DmId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub findings: Vec<Finding>,
    pub warnings: Vec<String>,
}

fn warn_at(path: &str, span: Option<Span>, msg: &str) -> String {
    match span {
        Some(s) => format!("{}:{}:{}: {}", path, s.line, s.column, msg),
        None => format!("{}: {}", path, msg),
    }
}

/// Evidence spans of the instructions at `anchors`, falling back to node spans.
fn anchor_spans(f: &FnCtx<'_>, anchors: &BTreeSet<Anchor>) -> BTreeSet<Span> {
    anchors
        .iter()
        .filter_map(|a| {
            let facts = if a.scope == 0 { &f.facts } else { &f.modifiers[a.scope - 1].1 };
            facts.instr(a.loc).span.or(facts.cfg.nodes[a.loc.node].span)
        })
        .collect()
}

/// Signature-match candidates of one contract.
pub fn avs_candidates(ctx: &ContractCtx<'_>, store: &AvsStore, cfg: &MatchConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (fi, f) in ctx.functions.iter().enumerate() {
        let Some(Ok(f)) = f else { continue };
        let target = crate::matcher::KeyedSeq::of(&f.facts.seq);
        if target.is_empty() {
            continue;
        }
        for (avs, keys) in store.iter_keyed() {
            let r = match_keyed(avs, keys, &target, cfg);
            if !r.matched {
                continue;
            }
            let sinks: BTreeSet<Anchor> = r
                .matched_span
                .iter()
                .map(|&j| f.facts.locs[j])
                .filter(|&l| rules::is_sink(avs.vuln_type, &f.facts, l))
                .map(Anchor::at)
                .collect();
            if sinks.is_empty() {
                continue;
            }
            let mut spans = anchor_spans(f, &sinks);
            spans.extend(r.matched_span.iter().filter_map(|&j| f.facts.seq.items[j].span));
            out.push(Candidate {
                vuln_type: avs.vuln_type,
                function: fi,
                anchors: sinks,
                spans,
                source: Source::Avs,
                fired_rule: None,
                matched_avs: Some(avs.id.clone()),
            });
        }
    }
    out
}

/// Merge candidates of the same function and type whose evidence overlaps.
pub fn merge(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    cands.sort_by_key(|a| (a.function, a.vuln_type));
    let mut out: Vec<Candidate> = Vec::new();
    for c in cands {
        let mut c = c;
        // absorb every existing group this candidate touches, transitively
        loop {
            let hit = out
                .iter()
                .rposition(|o| o.function == c.function && o.vuln_type == c.vuln_type && o.overlaps(&c));
            match hit {
                Some(i) => {
                    let o = out.remove(i);
                    let mut merged = o;
                    merged.absorb(c);
                    c = merged;
                }
                None => break,
            }
        }
        out.push(c);
    }
    out
}

/// Base-rule and signature candidates of a contract, merged.
pub fn candidates(ctx: &ContractCtx<'_>, store: &AvsStore, opts: &ScanOptions) -> Vec<Candidate> {
    let mut cands = Vec::new();
    if opts.mode != ScanMode::AvsOnly {
        for (fi, f) in ctx.functions.iter().enumerate() {
            if let Some(Ok(f)) = f {
                cands.extend(rules::all_rules(ctx, fi, f));
            }
        }
    }
    if opts.mode != ScanMode::RulesOnly && !store.is_empty() {
        cands.extend(avs_candidates(ctx, store, &opts.matching));
    }
    merge(cands)
}

/// Evaluate the defense mechanisms wired to the candidate's type.
pub fn apply_dms(c: &Candidate, ctx: &ContractCtx<'_>, disabled: &BTreeSet<DmId>) -> Finding {
    let f = match &ctx.functions[c.function] {
        Some(Ok(f)) => f,
        _ => unreachable!("candidates only come from lowered functions"),
    };
    let suppressed_by = c
        .vuln_type
        .wired_dms()
        .iter()
        .copied()
        .filter(|d| !disabled.contains(d))
        .filter(|&d| dms::holds(d, c, ctx, f))
        .collect();
    Finding {
        vuln_type: c.vuln_type,
        contract: ctx.contract.name.clone(),
        function: f.function.display_name().to_string(),
        spans: if c.spans.is_empty() { vec![f.function.span] } else { c.spans.iter().copied().collect() },
        source: c.source,
        fired_rule: c.fired_rule,
        matched_avs: c.matched_avs.clone(),
        suppressed_by,
    }
}

/// Scan every contract of a parsed unit.
pub fn scan(unit: &SourceUnit, store: &AvsStore, opts: &ScanOptions) -> FileReport {
    let mut findings = Vec::new();
    let mut warnings: Vec<String> = unit.diagnostics.iter().map(|d| d.to_string()).collect();
    for contract in &unit.contracts {
        let ctx = ContractCtx::new(unit, contract);
        for (f, r) in contract.functions.iter().zip(&ctx.functions) {
            if let Some(Err(e)) = r {
                let msg = format!("skipped {}.{}: {}", contract.name, f.display_name(), e);
                let span = match e {
                    crate::cfg::CfgError::Unsupported { span, .. } => span.or(Some(f.span)),
                    _ => Some(f.span),
                };
                warnings.push(warn_at(&unit.path, span, &msg));
            }
        }
        for c in candidates(&ctx, store, opts) {
            findings.push(apply_dms(&c, &ctx, &opts.disabled_dms));
        }
    }
    findings.sort_by(|a, b| {
        (&a.contract, &a.function, a.vuln_type, &a.spans).cmp(&(&b.contract, &b.function, b.vuln_type, &b.spans))
    });
    FileReport { path: unit.path.clone(), findings, warnings }
}
