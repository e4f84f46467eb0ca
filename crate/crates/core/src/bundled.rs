//! The default signature store, built from the annotated sources in `avs-seeds/`.
//!
//! A seed file is split into sections, each starting with a directive line
//! `// avs: <type> [keep=i,j,...]`. The functions of a section that contain a sink of the
//! given type form one cluster and yield one signature; `keep` curates it.

use crate::avs::AvsSignature;
use crate::frontend::parse_source;
use crate::learn::{select_segments, single_cluster};
use crate::store::AvsStore;
use crate::vuln::VulnType;
use std::sync::OnceLock;

pub const SEED_FILES: &[(&str, &str)] = &[
    ("reentrancy.sol", include_str!("../avs-seeds/reentrancy.sol")),
    ("tx-origin.sol", include_str!("../avs-seeds/tx-origin.sol")),
    ("unchecked-llc.sol", include_str!("../avs-seeds/unchecked-llc.sol")),
    ("unexpected-revert.sol", include_str!("../avs-seeds/unexpected-revert.sol")),
    ("selfdestruct.sol", include_str!("../avs-seeds/selfdestruct.sol")),
];

const DIRECTIVE: &str = "// avs:";

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("{path}: bad directive {line:?}")]
    Directive { path: String, line: String },
    #[error("{path}: {message}")]
    Build { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    /// `avs-seeds/<file>#<section>`
    pub path: String,
    pub vuln_type: VulnType,
    pub keep: Option<Vec<usize>>,
    /// Section text, padded with blank lines so that spans match the seed file.
    pub source: String,
}

pub fn parse_seeds(file: &str, text: &str) -> Result<Vec<Seed>, SeedError> {
    let lines: Vec<&str> = text.lines().collect();
    let starts: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].starts_with(DIRECTIVE)).collect();
    let mut out = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(lines.len());
        let path = format!("avs-seeds/{}#{}", file, k + 1);
        let bad = || SeedError::Directive { path: path.clone(), line: lines[s].to_string() };
        let mut words = lines[s][DIRECTIVE.len()..].split_whitespace();
        let vuln_type: VulnType = words.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let mut keep = None;
        for w in words {
            let list = w.strip_prefix("keep=").ok_or_else(bad)?;
            let idx: Result<Vec<usize>, _> = list.split(',').map(str::parse).collect();
            keep = Some(idx.map_err(|_| bad())?);
        }
        let mut source = "\n".repeat(s + 1);
        for l in &lines[s + 1..end] {
            source.push_str(l);
            source.push('\n');
        }
        out.push(Seed { path, vuln_type, keep, source });
    }
    Ok(out)
}

pub fn seed_signature(seed: &Seed) -> Result<AvsSignature, SeedError> {
    let fail = |message: String| SeedError::Build { path: seed.path.clone(), message };
    let unit = parse_source(&seed.source, &seed.path).map_err(|e| fail(e.to_string()))?;
    let (segs, diags) = select_segments(&unit, seed.vuln_type);
    if let Some(d) = diags.first() {
        return Err(fail(d.clone()));
    }
    if segs.is_empty() {
        return Err(fail(format!("no function with a {} sink", seed.vuln_type)));
    }
    single_cluster(&segs, seed.vuln_type, seed.keep.as_deref()).map_err(|e| fail(e.to_string()))
}

pub fn build_bundled() -> Result<AvsStore, SeedError> {
    let mut sigs = Vec::new();
    for (file, text) in SEED_FILES {
        for seed in parse_seeds(file, text)? {
            sigs.push(seed_signature(&seed)?);
        }
    }
    AvsStore::new(sigs).map_err(|e| SeedError::Build { path: "avs-seeds".into(), message: e.to_string() })
}

/// The bundled store, built once per process.
pub fn bundled() -> &'static AvsStore {
    static STORE: OnceLock<AvsStore> = OnceLock::new();
    STORE.get_or_init(|| build_bundled().expect("bundled seeds build"))
}
