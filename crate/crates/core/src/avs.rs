//! Abstract vulnerability signatures: progressive alignment of clustered segments and
//! extraction of their common core.

use crate::cfg::{flatten, tree_cfg, CfgError, IrSequence};
use crate::cluster::DistanceMatrix;
use crate::frontend::Span;
use crate::lcs::lcs_pairs;
use crate::normalize::{tree_fingerprint, NormalizedAstSegment, NormalizedNode, SegmentOrigin};
use crate::ted::tree_edit_distance;
use crate::tree::NodeKind;
use crate::vuln::VulnType;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AvsError {
    #[error("alignment needs at least two instances, got {0}")]
    TooFewInstances(usize),
    #[error("segment {0} has no statements")]
    DegenerateCluster(String),
    #[error("cluster has no statement common to all instances")]
    EmptyCore,
    #[error("statement index {index} out of range ({len} statements)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("curation must keep at least one statement")]
    EmptyKeep,
    #[error("signature body cannot be lowered: {0}")]
    Cfg(#[from] CfgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    Common,
    Gap,
}

/// One column of a multi-instance statement alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSlot {
    pub status: SlotStatus,
    /// Normalized token string of the statement occupying this column.
    pub token: String,
    /// Statement index in each instance (cluster order), `None` where the instance has a gap.
    pub positions: Vec<Option<usize>>,
    /// Source span of the statement in each instance.
    pub spans: Vec<Option<Span>>,
}

/// Result of [`progressive_align`] with the order in which instances were folded in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub slots: Vec<AlignmentSlot>,
    /// Cluster indices in fold order; the first two form the seed pair.
    pub order: Vec<usize>,
    /// Number of pairwise alignment passes performed.
    pub passes: usize,
}

impl Alignment {
    pub fn common(&self) -> impl Iterator<Item = &AlignmentSlot> {
        self.slots.iter().filter(|s| s.status == SlotStatus::Common)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvsSignature {
    pub id: String,
    pub vuln_type: VulnType,
    pub body: NormalizedAstSegment,
    pub ir_signature: IrSequence,
    pub provenance: Vec<SegmentOrigin>,
    pub curated: bool,
    pub min_core_statements: usize,
}

impl AvsSignature {
    /// Assemble a signature from a body tree, deriving id and IR sequence.
    pub fn from_body(
        vt: VulnType,
        root: NormalizedNode,
        statement_spans: Vec<Span>,
        provenance: Vec<SegmentOrigin>,
        curated: bool,
    ) -> Result<AvsSignature, AvsError> {
        let n_stmts = root.statements().count();
        if n_stmts == 0 {
            return Err(AvsError::EmptyCore);
        }
        let id = format!("{}-{}", vt.slug(), &tree_fingerprint(&root)[..12]);
        let cfg = tree_cfg(&root, &id)?;
        let mut ir = flatten(&cfg).normalized();
        for i in &mut ir.items {
            i.result = None;
            i.span = None;
        }
        let body = NormalizedAstSegment {
            origin: SegmentOrigin { path: "avs".into(), contract: vt.slug().into(), function: id.clone(), span: Span::default() },
            node_count: root.size(),
            root,
            statement_spans,
        };
        Ok(AvsSignature { id, vuln_type: vt, body, ir_signature: ir, provenance, curated, min_core_statements: n_stmts })
    }

    pub fn statement_count(&self) -> usize {
        self.body.root.statements().count()
    }
}

fn distance(dm: &DistanceMatrix, a: &NormalizedAstSegment, b: &NormalizedAstSegment) -> u32 {
    dm.between(&a.id(), &b.id()).unwrap_or_else(|| tree_edit_distance(&a.root, &b.root))
}

fn consensus_tree(headers: &[NormalizedNode], stmts: Vec<NormalizedNode>) -> NormalizedNode {
    let mut children = headers.to_vec();
    children.extend(stmts);
    NormalizedNode { kind: NodeKind::Block, label: "{}".into(), children }
}

struct Folding<'a> {
    cluster: &'a [NormalizedAstSegment],
    tokens: Vec<Vec<String>>,
    stmts: Vec<Vec<&'a NormalizedNode>>,
    slots: Vec<AlignmentSlot>,
}

impl<'a> Folding<'a> {
    fn slot(&self, status: SlotStatus, inst: usize, pos: usize) -> AlignmentSlot {
        let n = self.cluster.len();
        let mut s = AlignmentSlot { status, token: self.tokens[inst][pos].clone(), positions: vec![None; n], spans: vec![None; n] };
        s.positions[inst] = Some(pos);
        s.spans[inst] = self.cluster[inst].statement_spans.get(pos).copied();
        s
    }

    fn set(&self, slot: &mut AlignmentSlot, inst: usize, pos: usize) {
        slot.positions[inst] = Some(pos);
        slot.spans[inst] = self.cluster[inst].statement_spans.get(pos).copied();
    }
}

/// Progressive statement-level alignment of a cluster. The pair with the least tree edit
/// distance is aligned first; the remaining instances are folded in one at a time, always
/// taking the one closest to the current consensus.
pub fn progressive_align(cluster: &[NormalizedAstSegment], dm: &DistanceMatrix) -> Result<Alignment, AvsError> {
    let n = cluster.len();
    if n < 2 {
        return Err(AvsError::TooFewInstances(n));
    }
    if let Some(s) = cluster.iter().find(|s| s.root.statements().next().is_none()) {
        return Err(AvsError::DegenerateCluster(s.id()));
    }
    let ids: Vec<String> = cluster.iter().map(|s| s.id()).collect();
    let mut best: Option<(u32, &str, &str, usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(dm, &cluster[i], &cluster[j]);
            let (a, b) = if ids[i] <= ids[j] { (i, j) } else { (j, i) };
            let cand = (d, ids[a].as_str(), ids[b].as_str(), a, b);
            if best.as_ref().is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                best = Some(cand);
            }
        }
    }
    let (_, _, _, first, second) = best.unwrap();

    let mut f = Folding {
        cluster,
        tokens: cluster.iter().map(|s| s.statement_tokens()).collect(),
        stmts: cluster.iter().map(|s| s.root.statements().collect()).collect(),
        slots: Vec::new(),
    };
    f.slots = (0..f.tokens[first].len()).map(|p| f.slot(SlotStatus::Common, first, p)).collect();
    let mut order = vec![first, second];
    let mut passes = 0;
    let mut pending: Vec<usize> = (0..n).filter(|&i| i != first && i != second).collect();
    let mut k = second;
    loop {
        align_into(&mut f, k);
        passes += 1;
        if pending.is_empty() {
            break;
        }
        let headers: Vec<NormalizedNode> = cluster[first].root.headers().cloned().collect();
        let consensus = consensus_tree(&headers, common_statements(&f, first));
        let (pos, _) = pending
            .iter()
            .enumerate()
            .map(|(p, &i)| (p, (tree_edit_distance(&consensus, &cluster[i].root), ids[i].as_str())))
            .min_by(|a, b| a.1.cmp(&b.1))
            .unwrap();
        k = pending.remove(pos);
        order.push(k);
    }
    Ok(Alignment { slots: f.slots, order, passes })
}

fn common_statements(f: &Folding<'_>, inst: usize) -> Vec<NormalizedNode> {
    f.slots
        .iter()
        .filter(|s| s.status == SlotStatus::Common)
        .map(|s| f.stmts[inst][s.positions[inst].unwrap()].clone())
        .collect()
}

/// One alignment pass: instance `k` against the common slots. Unmatched common slots
/// become gaps, unmatched statements of `k` are inserted as gap slots in place.
fn align_into(f: &mut Folding<'_>, k: usize) {
    let common_idx: Vec<usize> = (0..f.slots.len()).filter(|&i| f.slots[i].status == SlotStatus::Common).collect();
    let pairs = {
        let common_tokens: Vec<&str> = common_idx.iter().map(|&i| f.slots[i].token.as_str()).collect();
        let inst_tokens: Vec<&str> = f.tokens[k].iter().map(|s| s.as_str()).collect();
        lcs_pairs(&common_tokens, &inst_tokens)
    };
    let mut matched = vec![None; f.slots.len()];
    for (c, j) in pairs {
        matched[common_idx[c]] = Some(j);
    }
    let old = std::mem::take(&mut f.slots);
    let mut next_j = 0;
    for (i, mut slot) in old.into_iter().enumerate() {
        match matched[i] {
            Some(j) => {
                for g in next_j..j {
                    let s = f.slot(SlotStatus::Gap, k, g);
                    f.slots.push(s);
                }
                f.set(&mut slot, k, j);
                next_j = j + 1;
            }
            None => slot.status = SlotStatus::Gap,
        }
        f.slots.push(slot);
    }
    for g in next_j..f.tokens[k].len() {
        let s = f.slot(SlotStatus::Gap, k, g);
        f.slots.push(s);
    }
}

/// Headers present (by token string) in every instance, in the order of the first.
fn common_headers(cluster: &[NormalizedAstSegment]) -> Vec<NormalizedNode> {
    let mut acc: Vec<NormalizedNode> = cluster[0].root.headers().cloned().collect();
    for s in &cluster[1..] {
        let a: Vec<String> = acc.iter().map(|h| h.token_string()).collect();
        let b: Vec<String> = s.root.headers().map(|h| h.token_string()).collect();
        let keep: Vec<usize> = lcs_pairs(&a, &b).into_iter().map(|(i, _)| i).collect();
        acc = keep.into_iter().map(|i| acc[i].clone()).collect();
    }
    acc
}

/// Derive the signature of a cluster: the statements common to every instance, in order.
/// A singleton cluster yields its only instance.
pub fn extract_avs(cluster: &[NormalizedAstSegment], dm: &DistanceMatrix, vt: VulnType) -> Result<AvsSignature, AvsError> {
    if cluster.is_empty() {
        return Err(AvsError::TooFewInstances(0));
    }
    if let Some(s) = cluster.iter().find(|s| s.root.statements().next().is_none()) {
        return Err(AvsError::DegenerateCluster(s.id()));
    }
    let mut provenance: Vec<SegmentOrigin> = cluster.iter().map(|s| s.origin.clone()).collect();
    provenance.sort_by_key(|o| o.id());
    if cluster.len() == 1 {
        let s = &cluster[0];
        return AvsSignature::from_body(vt, s.root.clone(), s.statement_spans.clone(), provenance, false);
    }
    let al = progressive_align(cluster, dm)?;
    let anchor = al.order[0];
    let stmts: Vec<&NormalizedNode> = cluster[anchor].root.statements().collect();
    let mut body = Vec::new();
    let mut spans = Vec::new();
    for slot in al.common() {
        let p = slot.positions[anchor].unwrap();
        body.push(stmts[p].clone());
        if let Some(sp) = slot.spans[anchor] {
            spans.push(sp);
        }
    }
    if body.is_empty() {
        return Err(AvsError::EmptyCore);
    }
    let root = consensus_tree(&common_headers(cluster), body);
    AvsSignature::from_body(vt, root, spans, provenance, false)
}

/// Reduce a signature to the statements at `keep` (indices into its body statements).
pub fn curate_avs(avs: &AvsSignature, keep: &[usize]) -> Result<AvsSignature, AvsError> {
    if keep.is_empty() {
        return Err(AvsError::EmptyKeep);
    }
    let stmts: Vec<&NormalizedNode> = avs.body.root.statements().collect();
    let mut idx = keep.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&bad) = idx.iter().find(|&&i| i >= stmts.len()) {
        return Err(AvsError::IndexOutOfRange { index: bad, len: stmts.len() });
    }
    if idx.len() == stmts.len() {
        return Ok(avs.clone());
    }
    let headers: Vec<NormalizedNode> = avs.body.root.headers().cloned().collect();
    let root = consensus_tree(&headers, idx.iter().map(|&i| stmts[i].clone()).collect());
    let spans = if avs.body.statement_spans.len() == stmts.len() {
        idx.iter().map(|&i| avs.body.statement_spans[i]).collect()
    } else {
        Vec::new()
    };
    AvsSignature::from_body(avs.vuln_type, root, spans, avs.provenance.clone(), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::pairwise_distances;
    use crate::frontend::parse_source;
    use crate::normalize::normalize_function;

    fn segs(src: &str) -> Vec<NormalizedAstSegment> {
        let unit = parse_source(src, "t.sol").unwrap();
        let c = &unit.contracts[0];
        c.functions.iter().map(|f| normalize_function("t.sol", f, c)).collect()
    }

    #[test]
    fn identical_segments_are_all_common() {
        let s = segs("contract C { uint a; function f(uint x) { a = x; a += 1; } function g(uint y) { a = y; a += 1; } }");
        let dm = pairwise_distances(&s).unwrap();
        let al = progressive_align(&s, &dm).unwrap();
        assert_eq!(al.slots.len(), 2);
        assert!(al.slots.iter().all(|x| x.status == SlotStatus::Common));
        assert_eq!(al.passes, 1);
    }

    #[test]
    fn disjoint_segments_have_empty_core() {
        let s = segs("contract C { uint a; function f() { a = 1; } function g() { revert(); } }");
        let dm = pairwise_distances(&s).unwrap();
        assert_eq!(extract_avs(&s, &dm, VulnType::Reentrancy).unwrap_err(), AvsError::EmptyCore);
    }

    #[test]
    fn gap_statements_are_dropped() {
        let s = segs(
            "contract C { uint a; uint b; function f() { a = 1; b = a; a = 2; } function g() { a = 1; a = 2; b = 0; } }",
        );
        let dm = pairwise_distances(&s).unwrap();
        let avs = extract_avs(&s, &dm, VulnType::Reentrancy).unwrap();
        assert_eq!(avs.statement_count(), 2);
        assert_eq!(avs.provenance.len(), 2);
        let al = progressive_align(&s, &dm).unwrap();
        assert_eq!(al.slots.iter().filter(|x| x.status == SlotStatus::Gap).count(), 2);
    }

    #[test]
    fn singleton_is_its_own_signature() {
        let s = segs("contract C { uint a; function f() { a = 1; a = 2; } }");
        let dm = pairwise_distances(&s).unwrap();
        let avs = extract_avs(&s, &dm, VulnType::Reentrancy).unwrap();
        assert_eq!(avs.body.root, s[0].root);
        assert!(avs.id.starts_with("reentrancy-"));
        assert_eq!(avs.ir_signature.len(), 2);
    }

    #[test]
    fn curation() {
        let s = segs("contract C { uint a; function f() { a = 1; a = 2; a = 3; } }");
        let dm = pairwise_distances(&s).unwrap();
        let avs = extract_avs(&s, &dm, VulnType::Reentrancy).unwrap();
        assert_eq!(curate_avs(&avs, &[0, 1, 2]).unwrap(), avs);
        let c = curate_avs(&avs, &[2, 0]).unwrap();
        assert_eq!(c.statement_count(), 2);
        assert!(c.curated);
        assert_ne!(c.id, avs.id);
        assert_eq!(curate_avs(&avs, &[]).unwrap_err(), AvsError::EmptyKeep);
        assert_eq!(curate_avs(&avs, &[3]).unwrap_err(), AvsError::IndexOutOfRange { index: 3, len: 3 });
    }
}
