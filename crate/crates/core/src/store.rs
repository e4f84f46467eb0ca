//! AVS store: a directory of `<id>.avs.json` files.

use crate::avs::AvsSignature;
use crate::matcher::KeyedSeq;
use crate::vuln::VulnType;
use std::path::{Path, PathBuf};

pub const EXTENSION: &str = ".avs.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: empty IR signature")]
    EmptySignature { path: PathBuf },
    #[error("duplicate AVS id {0}")]
    Duplicate(String),
}

/// Signatures sorted by id, with their matching keys precomputed.
#[derive(Debug, Clone, Default)]
pub struct AvsStore {
    sigs: Vec<AvsSignature>,
    keys: Vec<KeyedSeq>,
}

impl AvsStore {
    pub fn new(mut sigs: Vec<AvsSignature>) -> Result<AvsStore, StoreError> {
        sigs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = sigs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(StoreError::Duplicate(w[0].id.clone()));
        }
        let keys = sigs.iter().map(|s| KeyedSeq::of(&s.ir_signature)).collect();
        Ok(AvsStore { sigs, keys })
    }

    pub fn len(&self) -> usize {
        self.sigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigs.is_empty()
    }

    pub fn signatures(&self) -> &[AvsSignature] {
        &self.sigs
    }

    pub fn get(&self, id: &str) -> Option<&AvsSignature> {
        self.sigs.binary_search_by(|s| s.id.as_str().cmp(id)).ok().map(|i| &self.sigs[i])
    }

    pub fn iter_keyed(&self) -> impl Iterator<Item = (&AvsSignature, &KeyedSeq)> {
        self.sigs.iter().zip(&self.keys)
    }

    pub fn count(&self, vt: VulnType) -> usize {
        self.sigs.iter().filter(|s| s.vuln_type == vt).count()
    }

    /// Load every `*.avs.json` file of `dir`.
    pub fn load_dir(dir: &Path) -> Result<AvsStore, StoreError> {
        let io = |source| StoreError::Io { path: dir.to_path_buf(), source };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(EXTENSION)))
            .collect();
        paths.sort();
        let mut sigs = Vec::with_capacity(paths.len());
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|source| StoreError::Io { path: path.clone(), source })?;
            let sig: AvsSignature =
                serde_json::from_str(&text).map_err(|source| StoreError::Json { path: path.clone(), source })?;
            if sig.ir_signature.items.is_empty() {
                return Err(StoreError::EmptySignature { path });
            }
            sigs.push(sig);
        }
        AvsStore::new(sigs)
    }

    /// Write one file per signature; returns the written paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
        std::fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.to_path_buf(), source })?;
        let mut out = Vec::new();
        for sig in &self.sigs {
            let path = dir.join(format!("{}{}", sig.id, EXTENSION));
            std::fs::write(&path, to_json(sig)).map_err(|source| StoreError::Io { path: path.clone(), source })?;
            out.push(path);
        }
        Ok(out)
    }
}

pub fn to_json(sig: &AvsSignature) -> String {
    let mut s = serde_json::to_string_pretty(sig).expect("AVS serializes");
    s.push('\n');
    s
}
