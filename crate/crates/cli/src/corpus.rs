//! Source discovery and corpus indexing.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

fn is_sol(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "sol")
}

/// Expand files and directories into a sorted, deduplicated list of `.sol` files.
pub fn collect_sources(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if !p.exists() {
            bail!("{}: no such file or directory", p.display());
        }
        if p.is_dir() {
            for e in WalkDir::new(p).sort_by_file_name() {
                let e = e.with_context(|| format!("walking {}", p.display()))?;
                if e.file_type().is_file() && is_sol(e.path()) {
                    out.push(e.into_path());
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub path: PathBuf,
    pub size: u64,
    /// sha256 of the file contents.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub files: Vec<CorpusFile>,
    /// Account (top-level directory name, or file stem for top-level files) to file indices,
    /// files ordered by name.
    pub accounts: BTreeMap<String, Vec<usize>>,
}

impl CorpusIndex {
    pub fn build(root: &Path) -> Result<CorpusIndex> {
        if !root.is_dir() {
            bail!("{}: not a directory", root.display());
        }
        let mut files = Vec::new();
        let mut accounts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for path in collect_sources(&[root.to_path_buf()])? {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let mut comps = rel.components();
            let first = comps.next().map(|c| c.as_os_str().to_string_lossy().to_string()).unwrap_or_default();
            let account = if comps.next().is_some() {
                first
            } else {
                rel.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or(first)
            };
            accounts.entry(account).or_default().push(files.len());
            files.push(CorpusFile { size: bytes.len() as u64, fingerprint: hex::encode(Sha256::digest(&bytes)), path });
        }
        for idx in accounts.values_mut() {
            idx.sort_by(|&a, &b| files[a].path.file_name().cmp(&files[b].path.file_name()));
        }
        Ok(CorpusIndex { root: root.to_path_buf(), files, accounts })
    }
}
