//! Learning signatures from labeled sources: select the functions that contain a sink of
//! the labeled type, cluster them by tree edit distance and extract one AVS per cluster.

use crate::avs::{curate_avs, extract_avs, AvsSignature};
use crate::cfg::function_cfg;
use crate::cluster::{cluster, pairwise_distances, DistanceMatrix};
use crate::frontend::SourceUnit;
use crate::normalize::{normalize_function, NormalizedAstSegment};
use crate::rdr::facts::Facts;
use crate::rdr::rules::is_sink;
use crate::vuln::VulnType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CUTOFF: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learned {
    pub signatures: Vec<AvsSignature>,
    pub distances: DistanceMatrix,
    /// Segment ids per cluster, in cluster order.
    pub clusters: Vec<Vec<String>>,
    pub diagnostics: Vec<String>,
}

/// Normalized segments of the functions in `unit` containing a `vt` sink.
pub fn select_segments(unit: &SourceUnit, vt: VulnType) -> (Vec<NormalizedAstSegment>, Vec<String>) {
    let mut segs = Vec::new();
    let mut diags = Vec::new();
    for c in &unit.contracts {
        for f in c.functions.iter().filter(|f| f.body.is_some()) {
            let cfg = match function_cfg(f, c) {
                Ok(cfg) => cfg,
                Err(e) => {
                    diags.push(format!("{}: skipped {}.{}: {}", unit.path, c.name, f.display_name(), e));
                    continue;
                }
            };
            let facts = Facts::new(cfg);
            if facts.instrs().any(|(l, _)| is_sink(vt, &facts, l)) {
                segs.push(normalize_function(&unit.path, f, c));
            }
        }
    }
    (segs, diags)
}

/// Cluster `segs` at `cutoff` and extract a signature from each cluster.
pub fn learn_segments(segs: Vec<NormalizedAstSegment>, vt: VulnType, cutoff: u32) -> Learned {
    let mut diagnostics = Vec::new();
    let mut segs = segs;
    segs.sort_by_key(|s| s.id());
    segs.dedup_by_key(|s| s.id());
    if segs.is_empty() {
        let distances = DistanceMatrix::new(Vec::new(), Vec::new()).expect("empty matrix");
        return Learned { signatures: Vec::new(), distances, clusters: Vec::new(), diagnostics };
    }
    let dm = pairwise_distances(&segs).expect("segment ids are unique");
    let clusters = cluster(&dm, cutoff);
    let results: Vec<_> = clusters
        .par_iter()
        .map(|ids| {
            let members: Vec<NormalizedAstSegment> =
                ids.iter().map(|id| segs[dm.index_of(id).unwrap()].clone()).collect();
            extract_avs(&members, &dm, vt).map_err(|e| format!("cluster {{{}}}: {}", ids.join(", "), e))
        })
        .collect();
    let mut signatures = Vec::new();
    for r in results {
        match r {
            Ok(s) => signatures.push(s),
            Err(e) => diagnostics.push(e),
        }
    }
    signatures.sort_by(|a, b| a.id.cmp(&b.id));
    signatures.dedup_by(|a, b| a.id == b.id);
    Learned { signatures, distances: dm, clusters, diagnostics }
}

/// Full pipeline over parsed units.
pub fn learn(units: &[SourceUnit], vt: VulnType, cutoff: u32) -> Learned {
    let mut segs = Vec::new();
    let mut diags = Vec::new();
    for u in units {
        diags.extend(u.diagnostics.iter().map(|d| d.to_string()));
        let (s, d) = select_segments(u, vt);
        segs.extend(s);
        diags.extend(d);
    }
    let mut out = learn_segments(segs, vt, cutoff);
    diags.append(&mut out.diagnostics);
    out.diagnostics = diags;
    out
}

/// Signature of the given segments taken as a single cluster, optionally curated.
pub fn single_cluster(segs: &[NormalizedAstSegment], vt: VulnType, keep: Option<&[usize]>) -> Result<AvsSignature, crate::avs::AvsError> {
    let dm = pairwise_distances(segs).map_err(|e| crate::avs::AvsError::DegenerateCluster(e.to_string()))?;
    let avs = extract_avs(segs, &dm, vt)?;
    match keep {
        Some(k) => curate_avs(&avs, k),
        None => Ok(avs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    const SRC: &str = "contract C { mapping(address => uint) bal; uint n;
        function a() public { uint x = bal[msg.sender]; require(msg.sender.call.value(x)()); bal[msg.sender] = 0; }
        function b() public { uint y = bal[msg.sender]; require(msg.sender.call.value(y)()); bal[msg.sender] = 0; }
        function helper() public { n += 1; } }";

    #[test]
    fn only_sink_functions_are_selected() {
        let unit = parse_source(SRC, "t.sol").unwrap();
        let (segs, diags) = select_segments(&unit, VulnType::Reentrancy);
        assert!(diags.is_empty());
        assert_eq!(segs.iter().map(|s| s.origin.function.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(select_segments(&unit, VulnType::SelfdestructAbuse).0.is_empty());
    }

    #[test]
    fn renamed_twins_give_one_signature() {
        let unit = parse_source(SRC, "t.sol").unwrap();
        let out = learn(&[unit], VulnType::Reentrancy, DEFAULT_CUTOFF);
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.signatures.len(), 1);
        assert_eq!(out.signatures[0].provenance.len(), 2);
        assert_eq!(out.signatures[0].statement_count(), 3);
    }

    #[test]
    fn nothing_to_learn() {
        let out = learn_segments(Vec::new(), VulnType::Reentrancy, DEFAULT_CUTOFF);
        assert!(out.signatures.is_empty() && out.clusters.is_empty());
    }
}
