mod common;

use avscan_core::cfg::{flatten, function_cfg, IrSequence};
use avscan_core::frontend::SourceUnit;
use avscan_core::learn::{select_segments, single_cluster};
use avscan_core::matcher::{match_avs, match_keys, MatchConfig, MatchMethod};
use avscan_core::vuln::VulnType;
use common::*;
use proptest::prelude::*;
use std::time::Instant;

fn ir_of(unit: &SourceUnit, function: &str) -> IrSequence {
    let (c, f) = unit
        .contracts
        .iter()
        .flat_map(|c| c.functions.iter().map(move |f| (c, f)))
        .find(|(_, f)| f.display_name() == function)
        .expect("function exists");
    flatten(&function_cfg(f, c).unwrap())
}

#[test]
fn curated_auction_signature_needs_inclusion_for_potato() {
    let segs = select_segments(&fixture("cb01"), VulnType::UnexpectedRevert).0;
    let avs = single_cluster(&segs, VulnType::UnexpectedRevert, Some(&[1, 2, 3])).unwrap();
    let target = ir_of(&fixture("cb02"), "placeBid");
    let r = match_avs(&avs, &target, &MatchConfig::default());
    assert!(r.matched);
    assert_eq!(r.method, MatchMethod::Inclusion, "sigma {}", r.similarity);
    assert!(r.similarity < 0.7);
    assert_eq!(r.matched_span.len(), avs.ir_signature.len());
}

#[test]
fn dividend_pool_signature_matches_sibling_by_lcs() {
    let segs = select_segments(&fixture("cb09"), VulnType::Reentrancy).0;
    let avs = single_cluster(&segs, VulnType::Reentrancy, None).unwrap();
    let target = ir_of(&fixture("cb10"), "claim");
    let r = match_avs(&avs, &target, &MatchConfig::default());
    eprintln!("sigma = {} via {:?}", r.similarity, r.method);
    assert!(r.matched);
    assert_eq!(r.method, MatchMethod::Lcs);
    assert!((r.similarity - 0.75).abs() <= 0.05, "sigma {}", r.similarity);
}

fn keys(v: &[u8]) -> Vec<String> {
    v.iter().map(|b| format!("K{b}")).collect()
}

proptest! {
    #![proptest_config(pt_config(512))]
    #[test]
    fn lowering_eta_never_loses_a_match(
        sig in prop::collection::vec(0u8..5, 1..12),
        target in prop::collection::vec(0u8..5, 0..60),
        hi in 0.3f64..=1.0,
        drop in 0.0f64..0.5,
    ) {
        let lo = (hi - drop).max(0.05);
        let (s, t) = (keys(&sig), keys(&target));
        let at_hi = match_keys(&s, &t, &MatchConfig::new(hi, None).unwrap()).0 != MatchMethod::None;
        let at_lo = match_keys(&s, &t, &MatchConfig::new(lo, None).unwrap()).0 != MatchMethod::None;
        prop_assert!(!at_hi || at_lo);
    }

    #[test]
    fn planted_signature_is_always_found(
        sig in prop::collection::vec(0u8..6, 1..10),
        noise in prop::collection::vec(0u8..6, 0..80),
        at in any::<prop::sample::Index>(),
    ) {
        let mut target = noise.clone();
        let i = at.index(target.len() + 1);
        target.splice(i..i, sig.iter().copied());
        let (m, sigma, span) = match_keys(&keys(&sig), &keys(&target), &MatchConfig::default());
        prop_assert_ne!(m, MatchMethod::None);
        prop_assert!(sigma > 0.999);
        prop_assert_eq!(span.len(), sig.len());
    }
}

#[test]
fn long_targets_are_fast() {
    let sig: Vec<String> = (0..50).map(|i| format!("S{}", i % 7)).collect();
    let target: Vec<String> = (0..1000).map(|i| format!("S{}", (i * 31) % 11)).collect();
    let t = Instant::now();
    let (m, _, _) = match_keys(&sig, &target, &MatchConfig::default());
    let dt = t.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "{dt:?}");
    assert_ne!(m, MatchMethod::Lcs);
}
