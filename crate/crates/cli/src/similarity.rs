//! File-similarity profiling: per-account concatenated sources compared by normalized
//! token-trigram Jaccard similarity.

use crate::corpus::CorpusIndex;
use avscan_core::frontend::lexer::{tokenize, TokenKind};
use avscan_core::tree::{BUILTIN_GLOBALS, BUILTIN_MEMBERS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

const KEYWORDS: &[&str] = &[
    "pragma", "solidity", "import", "contract", "interface", "library", "is", "function", "modifier", "event",
    "struct", "enum", "mapping", "returns", "return", "public", "private", "internal", "external", "view",
    "pure", "constant", "payable", "memory", "storage", "calldata", "if", "else", "while", "for", "do",
    "break", "continue", "throw", "emit", "new", "delete", "var", "true", "false", "address", "bool",
    "string", "bytes", "uint", "int", "uint8", "uint256", "int256", "bytes32", "bytes20", "ether", "wei",
    "finney", "szabo", "seconds", "minutes", "hours", "days", "weeks", "years", "constructor", "fallback",
    "anonymous", "indexed", "using", "assembly",
];

/// Normalized token stream: identifiers that are not keywords or builtins become `ID`,
/// literals become `LIT`, comments are dropped.
pub fn normalized_tokens(src: &str, path: &str) -> Result<Vec<String>, String> {
    let toks = tokenize(src, path).map_err(|e| e.to_string())?;
    Ok(toks
        .into_iter()
        .filter_map(|t| match t.kind {
            TokenKind::Comment | TokenKind::Eof => None,
            TokenKind::Number | TokenKind::Str | TokenKind::HexStr => Some("LIT".to_string()),
            TokenKind::Ident => {
                let keep = KEYWORDS.contains(&t.text.as_str())
                    || BUILTIN_GLOBALS.contains(&t.text.as_str())
                    || BUILTIN_MEMBERS.contains(&t.text.as_str());
                Some(if keep { t.text } else { "ID".to_string() })
            }
            TokenKind::Punct => Some(t.text),
        })
        .collect())
}

pub fn trigrams(tokens: &[String]) -> HashSet<[&str; 3]> {
    tokens.windows(3).map(|w| [w[0].as_str(), w[1].as_str(), w[2].as_str()]).collect()
}

/// Jaccard index of two trigram sets; two empty sets are identical.
pub fn jaccard(a: &HashSet<[&str; 3]>, b: &HashSet<[&str; 3]>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|t| b.contains(*t)).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lower: u32,
    pub upper: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHistogram {
    /// `[0,10), [10,20), ..., [90,100)` and a last bucket for exactly 100%.
    pub buckets: Vec<Bucket>,
    pub total: usize,
    /// Maximum similarity (percent) of each account file.
    pub maxima: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

pub fn bucket_of(pct: f64) -> usize {
    if pct >= 100.0 - 1e-9 {
        10
    } else {
        ((pct / 10.0).floor() as usize).min(9)
    }
}

pub fn histogram(maxima: BTreeMap<String, f64>, warnings: Vec<String>) -> SimilarityHistogram {
    let mut buckets: Vec<Bucket> =
        (0..10).map(|i| Bucket { lower: i * 10, upper: i * 10 + 10, count: 0 }).collect();
    buckets.push(Bucket { lower: 100, upper: 100, count: 0 });
    for &m in maxima.values() {
        buckets[bucket_of(m)].count += 1;
    }
    SimilarityHistogram { buckets, total: maxima.len(), maxima, warnings }
}

/// Per-account maxima over the corpus. Accounts whose files cannot be read or lexed are
/// skipped with a warning.
pub fn profile(index: &CorpusIndex) -> SimilarityHistogram {
    let mut warnings = Vec::new();
    let mut streams: Vec<(String, Vec<String>)> = Vec::new();
    'acc: for (account, files) in &index.accounts {
        let mut toks = Vec::new();
        for &i in files {
            let path = &index.files[i].path;
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    warnings.push(format!("{}: skipped account {}: {}", path.display(), account, e));
                    continue 'acc;
                }
            };
            match normalized_tokens(&text, &path.display().to_string()) {
                Ok(t) => toks.extend(t),
                Err(e) => {
                    warnings.push(format!("skipped account {}: {}", account, e));
                    continue 'acc;
                }
            }
        }
        streams.push((account.clone(), toks));
    }
    let grams: Vec<HashSet<[&str; 3]>> = streams.iter().map(|(_, t)| trigrams(t)).collect();
    let maxima: Vec<f64> = (0..grams.len())
        .into_par_iter()
        .map(|i| {
            (0..grams.len())
                .filter(|&j| j != i)
                .map(|j| jaccard(&grams[i], &grams[j]) * 100.0)
                .fold(0.0, f64::max)
        })
        .collect();
    let maxima = streams.iter().map(|(a, _)| a.clone()).zip(maxima).collect();
    histogram(maxima, warnings)
}
