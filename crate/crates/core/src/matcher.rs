//! Signature matching over flattened IR sequences: direct LCS, sliding-window LCS and
//! ordered inclusion.

use crate::avs::AvsSignature;
use crate::cfg::IrSequence;
use crate::frontend::SourceUnit;
use crate::lcs::{embed, lcs_pairs};
use crate::rdr::facts::ContractCtx;
use crate::rdr::{apply_dms, avs_candidates, merge, Finding};
use crate::store::AvsStore;
use crate::vuln::DmId;
use std::collections::BTreeSet;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ETA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("eta must be in (0, 1], got {0}")]
    Eta(f64),
    #[error("itv must be at least 1")]
    Itv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub eta: f64,
    /// Window step; `None` means half the signature length.
    pub itv: Option<usize>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { eta: DEFAULT_ETA, itv: None }
    }
}

impl MatchConfig {
    pub fn new(eta: f64, itv: Option<usize>) -> Result<Self, ConfigError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ConfigError::Eta(eta));
        }
        if itv == Some(0) {
            return Err(ConfigError::Itv);
        }
        Ok(MatchConfig { eta, itv })
    }

    /// Window width for a signature of `n` items: `ceil(n / eta)`.
    pub fn window(&self, n: usize) -> usize {
        ((n as f64 / self.eta) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step(&self, n: usize) -> usize {
        self.itv.unwrap_or((n / 2).max(1))
    }

    fn reaches(&self, common: usize, n: usize) -> bool {
        common as f64 + 1e-9 >= self.eta * n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Lcs,
    WindowedLcs,
    Inclusion,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: bool,
    pub method: MatchMethod,
    pub similarity: f64,
    /// Target item indices covered by the successful path (strictly increasing).
    pub matched_span: Vec<usize>,
    pub avs_id: String,
}

/// Interned matching keys of a sequence. Items compare equal iff their normalized forms
/// have the same opcode and operands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedSeq {
    pub keys: Vec<String>,
}

impl KeyedSeq {
    pub fn of(seq: &IrSequence) -> KeyedSeq {
        KeyedSeq { keys: seq.items.iter().map(|i| i.normalized().key()).collect() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// `|LCS(s1, s2)| / |s1|` and the `s2` indices of one maximal common subsequence.
pub fn lcs_similarity(s1: &IrSequence, s2: &IrSequence) -> (f64, Vec<usize>) {
    keyed_similarity(&KeyedSeq::of(s1).keys, &KeyedSeq::of(s2).keys)
}

fn keyed_similarity(a: &[String], b: &[String]) -> (f64, Vec<usize>) {
    if a.is_empty() {
        return (0.0, Vec::new());
    }
    let pairs = lcs_pairs(a, b);
    (pairs.len() as f64 / a.len() as f64, pairs.into_iter().map(|(_, j)| j).collect())
}

/// True iff `s1` is a (not necessarily contiguous) subsequence of `s2`.
pub fn is_included_by_order(s1: &IrSequence, s2: &IrSequence) -> bool {
    embed(&KeyedSeq::of(s1).keys, &KeyedSeq::of(s2).keys).is_some()
}

/// Decide whether `target` contains the signature sequence `sig`.
pub fn match_keys(sig: &[String], target: &[String], cfg: &MatchConfig) -> (MatchMethod, f64, Vec<usize>) {
    let n = sig.len();
    if n == 0 {
        return (MatchMethod::None, 0.0, Vec::new());
    }
    let width = cfg.window(n);
    let (method, best, span) = if target.len() <= width {
        let (s, span) = keyed_similarity(sig, target);
        (MatchMethod::Lcs, s, span)
    } else {
        let step = cfg.step(n);
        let last = target.len() - width;
        let mut starts: Vec<usize> = (0..=last).step_by(step).collect();
        if *starts.last().unwrap() != last {
            starts.push(last);
        }
        let mut best = (-1.0, Vec::new());
        for s in starts {
            let (sim, span) = keyed_similarity(sig, &target[s..s + width]);
            if sim > best.0 {
                best = (sim, span.into_iter().map(|j| j + s).collect());
            }
        }
        (MatchMethod::WindowedLcs, best.0, best.1)
    };
    if cfg.reaches(span.len(), n) {
        return (method, best, span);
    }
    match embed(sig, target) {
        Some(span) => (MatchMethod::Inclusion, best, span),
        None => (MatchMethod::None, best, Vec::new()),
    }
}

pub fn match_avs(avs: &AvsSignature, target: &IrSequence, cfg: &MatchConfig) -> MatchResult {
    match_keyed(avs, &KeyedSeq::of(&avs.ir_signature), &KeyedSeq::of(target), cfg)
}

/// [`match_avs`] over pre-computed keys.
pub fn match_keyed(avs: &AvsSignature, sig: &KeyedSeq, target: &KeyedSeq, cfg: &MatchConfig) -> MatchResult {
    let (method, similarity, matched_span) = match_keys(&sig.keys, &target.keys, cfg);
    MatchResult {
        matched: method != MatchMethod::None,
        method,
        similarity: similarity.clamp(0.0, 1.0),
        matched_span,
        avs_id: avs.id.clone(),
    }
}

/// Signature-match candidates of every function in `unit`, before defense checks.
pub fn scan_with_avs(store: &AvsStore, unit: &SourceUnit, cfg: &MatchConfig) -> Vec<Finding> {
    let all: BTreeSet<DmId> = DmId::ALL.iter().copied().collect();
    let mut out = Vec::new();
    for contract in &unit.contracts {
        let ctx = ContractCtx::new(unit, contract);
        for c in merge(avs_candidates(&ctx, store, cfg)) {
            out.push(apply_dms(&c, &ctx, &all));
        }
    }
    out
}
