mod common;

use avscan_core::avs::{curate_avs, extract_avs, progressive_align, AvsError};
use avscan_core::bundled::bundled;
use avscan_core::cluster::pairwise_distances;
use avscan_core::learn::{learn, select_segments, DEFAULT_CUTOFF};
use avscan_core::normalize::NormalizedAstSegment;
use avscan_core::vuln::VulnType;
use common::*;

fn trio() -> Vec<NormalizedAstSegment> {
    ["cb09", "cb10", "cb11"]
        .iter()
        .flat_map(|p| select_segments(&fixture(p), VulnType::Reentrancy).0)
        .collect()
}

#[test]
fn core_is_common_to_every_instance_in_order() {
    let segs = trio();
    let dm = pairwise_distances(&segs).unwrap();
    let al = progressive_align(&segs, &dm).unwrap();
    assert_eq!(al.passes, segs.len() - 1);
    assert_eq!(al.order.len(), segs.len());
    let core: Vec<String> = al.common().map(|s| s.token.clone()).collect();
    assert!(!core.is_empty());
    for (i, s) in segs.iter().enumerate() {
        let toks = s.statement_tokens();
        assert!(is_subsequence(&core, &toks));
        let pos: Vec<usize> = al.common().map(|slot| slot.positions[i].unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "positions must increase");
        for (slot, p) in al.common().zip(&pos) {
            assert_eq!(slot.token, toks[*p]);
        }
    }
    let avs = extract_avs(&segs, &dm, VulnType::Reentrancy).unwrap();
    assert_eq!(avs.statement_count(), core.len());
    assert_eq!(avs.provenance.len(), 3);
}

#[test]
fn extraction_ignores_input_order() {
    let segs = trio();
    let dm = pairwise_distances(&segs).unwrap();
    let a = extract_avs(&segs, &dm, VulnType::Reentrancy).unwrap();
    let rev: Vec<_> = segs.iter().rev().cloned().collect();
    let b = extract_avs(&rev, &pairwise_distances(&rev).unwrap(), VulnType::Reentrancy).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn learned_trio_matches_the_bundled_seed() {
    let units: Vec<_> = ["cb03", "cb09", "cb10", "cb11"].iter().map(|p| fixture(p)).collect();
    let out = learn(&units, VulnType::Reentrancy, DEFAULT_CUTOFF);
    assert_eq!(out.signatures.len(), 2);
    assert_eq!(out.clusters.len(), 2);
    let trio_sig = out.signatures.iter().find(|s| s.provenance.len() == 3).unwrap();
    assert!(bundled().get(&trio_sig.id).is_some(), "{} not bundled", trio_sig.id);
}

#[test]
fn curation_keeps_selected_statements() {
    let segs: Vec<_> = select_segments(&fixture("cb01"), VulnType::UnexpectedRevert).0;
    let dm = pairwise_distances(&segs).unwrap();
    let full = extract_avs(&segs, &dm, VulnType::UnexpectedRevert).unwrap();
    assert_eq!(full.statement_count(), 4);
    let cur = curate_avs(&full, &[3, 1, 2, 1]).unwrap();
    assert!(cur.curated);
    assert_eq!(cur.statement_count(), 3);
    assert_ne!(cur.id, full.id);
    assert!(cur.ir_signature.len() < full.ir_signature.len());
    assert_eq!(curate_avs(&full, &[]), Err(AvsError::EmptyKeep));
    assert!(matches!(curate_avs(&full, &[9]), Err(AvsError::IndexOutOfRange { index: 9, len: 4 })));
}

#[test]
fn disjoint_cluster_has_no_core() {
    use avscan_core::frontend::parse_source;
    use avscan_core::normalize::normalize_function;
    let unit = parse_source("contract C { uint a; address o; function f() { a = 1; } function g() { o.transfer(2); } }", "d.sol").unwrap();
    let c = &unit.contracts[0];
    let segs: Vec<_> = c.functions.iter().map(|f| normalize_function("d.sol", f, c)).collect();
    let dm = pairwise_distances(&segs).unwrap();
    assert_eq!(extract_avs(&segs, &dm, VulnType::Reentrancy), Err(AvsError::EmptyCore));
}
