//! Subcommand implementations. Each returns the text to print and the exit status.

use crate::config::{Format, Settings};
use crate::corpus::{collect_sources, CorpusIndex};
use crate::similarity::profile;
use anyhow::{bail, Result};
use avscan_core::bundled::bundled;
use avscan_core::cfg::{flatten, function_cfg};
use avscan_core::cluster::DistanceMatrix;
use avscan_core::frontend::{parse_source, SourceUnit};
use avscan_core::learn::learn;
use avscan_core::matcher::{match_keyed, KeyedSeq, MatchConfig, MatchResult};
use avscan_core::normalize::normalize_function;
use avscan_core::rdr::{scan, FileReport, ScanOptions};
use avscan_core::report::{Report, ReportConfig};
use avscan_core::store::AvsStore;
use avscan_core::vuln::{DmId, VulnType};
use rayon::prelude::*;
use serde::Serialize;
use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String, code: i32) -> Self {
        Outcome { stdout, code }
    }
}

/// `all`, or a comma-separated list such as `DM3,dm5,7`.
pub fn parse_dms(items: &[String]) -> Result<BTreeSet<DmId>> {
    let mut out = BTreeSet::new();
    for item in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("all") {
            out.extend(DmId::ALL);
        } else {
            out.insert(item.parse::<DmId>().map_err(|e| anyhow::anyhow!("{}", e))?);
        }
    }
    Ok(out)
}

pub fn load_store(dir: Option<&Path>) -> Result<(Cow<'static, AvsStore>, String)> {
    match dir {
        Some(d) => {
            let store = AvsStore::load_dir(d)?;
            Ok((Cow::Owned(store), d.display().to_string()))
        }
        None => Ok((Cow::Borrowed(bundled()), "bundled".to_string())),
    }
}

pub fn scan_options(s: &Settings) -> Result<ScanOptions> {
    Ok(ScanOptions {
        matching: MatchConfig::new(s.eta, s.itv)?,
        mode: s.mode,
        disabled_dms: parse_dms(&s.disable_dm)?,
    })
}

enum Parsed {
    Unit(SourceUnit),
    Failed(String),
}

fn parse_file(path: &Path) -> Parsed {
    let name = path.display().to_string();
    match std::fs::read_to_string(path) {
        Ok(text) => match parse_source(&text, &name) {
            Ok(u) => Parsed::Unit(u),
            Err(e) => Parsed::Failed(e.to_string()),
        },
        Err(e) => Parsed::Failed(format!("{}: {}", name, e)),
    }
}

pub fn scan_files(files: &[PathBuf], store: &AvsStore, opts: &ScanOptions) -> Vec<FileReport> {
    files
        .par_iter()
        .map(|p| match parse_file(p) {
            Parsed::Unit(u) => scan(&u, store, opts),
            Parsed::Failed(w) => FileReport { path: p.display().to_string(), findings: Vec::new(), warnings: vec![w] },
        })
        .collect()
}

pub fn cmd_scan(paths: &[PathBuf], s: &Settings) -> Result<Outcome> {
    let opts = scan_options(s)?;
    let files = collect_sources(paths)?;
    let (store, store_name) = load_store(s.avs_dir.as_deref())?;
    let report = Report::new(ReportConfig::new(&opts, &store_name, store.len()), scan_files(&files, &store, &opts));
    let code = if report.reported().next().is_some() { EXIT_FINDINGS } else { EXIT_CLEAN };
    let stdout = match s.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    Ok(Outcome::ok(stdout, code))
}

#[derive(Serialize)]
struct LearnSummary {
    vuln_type: VulnType,
    cutoff: u32,
    distances: DistanceMatrix,
    clusters: Vec<Vec<String>>,
    signatures: Vec<String>,
    written: Vec<String>,
    diagnostics: Vec<String>,
}

pub fn cmd_learn(paths: &[PathBuf], vt: VulnType, cutoff: u32, out: &Path) -> Result<Outcome> {
    let files = collect_sources(paths)?;
    let mut units = Vec::new();
    let mut diagnostics = Vec::new();
    for p in &files {
        match parse_file(p) {
            Parsed::Unit(u) => units.push(u),
            Parsed::Failed(w) => diagnostics.push(w),
        }
    }
    let learned = learn(&units, vt, cutoff);
    diagnostics.extend(learned.diagnostics);
    let store = AvsStore::new(learned.signatures)?;
    let written = if store.is_empty() { Vec::new() } else { store.write_dir(out)? };
    if store.is_empty() {
        diagnostics.push(format!("no signature learned for {}", vt));
    }
    let summary = LearnSummary {
        vuln_type: vt,
        cutoff,
        distances: learned.distances,
        clusters: learned.clusters,
        signatures: store.signatures().iter().map(|s| s.id.clone()).collect(),
        written: written.iter().map(|p| p.display().to_string()).collect(),
        diagnostics,
    };
    let mut stdout = serde_json::to_string_pretty(&summary)?;
    stdout.push('\n');
    Ok(Outcome::ok(stdout, if store.is_empty() { EXIT_FATAL } else { EXIT_CLEAN }))
}

#[derive(Serialize)]
struct FunctionMatches {
    contract: String,
    function: String,
    matches: Vec<MatchResult>,
}

#[derive(Serialize)]
struct FileMatches {
    path: String,
    functions: Vec<FunctionMatches>,
    warnings: Vec<String>,
}

pub fn cmd_match(paths: &[PathBuf], s: &Settings) -> Result<Outcome> {
    let cfg = MatchConfig::new(s.eta, s.itv)?;
    let files = collect_sources(paths)?;
    let (store, _) = load_store(s.avs_dir.as_deref())?;
    let results: Vec<FileMatches> = files
        .par_iter()
        .map(|p| {
            let mut fm = FileMatches { path: p.display().to_string(), functions: Vec::new(), warnings: Vec::new() };
            let unit = match parse_file(p) {
                Parsed::Unit(u) => u,
                Parsed::Failed(w) => {
                    fm.warnings.push(w);
                    return fm;
                }
            };
            fm.warnings.extend(unit.diagnostics.iter().map(|d| d.to_string()));
            for c in &unit.contracts {
                for f in c.functions.iter().filter(|f| f.body.is_some()) {
                    let target = match function_cfg(f, c) {
                        Ok(cfg) => KeyedSeq::of(&flatten(&cfg)),
                        Err(e) => {
                            fm.warnings.push(format!("skipped {}.{}: {}", c.name, f.display_name(), e));
                            continue;
                        }
                    };
                    let matches: Vec<MatchResult> = store
                        .iter_keyed()
                        .map(|(avs, keys)| match_keyed(avs, keys, &target, &cfg))
                        .filter(|r| r.matched)
                        .collect();
                    if !matches.is_empty() {
                        fm.functions.push(FunctionMatches {
                            contract: c.name.clone(),
                            function: f.display_name().to_string(),
                            matches,
                        });
                    }
                }
            }
            fm
        })
        .collect();
    let any = results.iter().any(|f| !f.functions.is_empty());
    let stdout = match s.format {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&results)?;
            t.push('\n');
            t
        }
        Format::Text => {
            let mut t = String::new();
            for f in &results {
                for func in &f.functions {
                    for m in &func.matches {
                        let _ = writeln!(
                            t,
                            "{} {}.{} {} {:?} sigma={:.3}",
                            f.path, func.contract, func.function, m.avs_id, m.method, m.similarity
                        );
                    }
                }
                for w in &f.warnings {
                    let _ = writeln!(t, "{} warning: {}", f.path, w);
                }
            }
            t
        }
    };
    Ok(Outcome::ok(stdout, if any { EXIT_FINDINGS } else { EXIT_CLEAN }))
}

pub fn cmd_similarity(root: &Path, format: Format) -> Result<Outcome> {
    let index = CorpusIndex::build(root)?;
    let h = profile(&index);
    let stdout = match format {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&h)?;
            t.push('\n');
            t
        }
        Format::Text => {
            let mut t = String::new();
            for b in &h.buckets {
                let label = if b.lower == b.upper { format!("{}%", b.lower) } else { format!("{}-{}%", b.lower, b.upper) };
                let pct = if h.total == 0 { 0.0 } else { 100.0 * b.count as f64 / h.total as f64 };
                let _ = writeln!(t, "{:>8} {:>6} {:>6.1}%", label, b.count, pct);
            }
            let _ = writeln!(t, "{} files", h.total);
            for w in &h.warnings {
                let _ = writeln!(t, "warning: {}", w);
            }
            t
        }
    };
    Ok(Outcome::ok(stdout, EXIT_CLEAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DumpWhat {
    /// Normalized AST segments (JSON)
    Ast,
    /// Normalized, flattened IR keys
    Ir,
    /// CFG in Graphviz dot syntax
    Cfg,
}

pub fn cmd_dump(path: &Path, what: DumpWhat, function: Option<&str>) -> Result<Outcome> {
    let unit = match parse_file(path) {
        Parsed::Unit(u) => u,
        Parsed::Failed(w) => bail!("{}", w),
    };
    let mut out = String::new();
    let mut hit = false;
    for c in &unit.contracts {
        for f in c.functions.iter().filter(|f| f.body.is_some()) {
            let name = f.display_name();
            if function.is_some_and(|want| want != name && want != format!("{}.{}", c.name, name)) {
                continue;
            }
            hit = true;
            match what {
                DumpWhat::Ast => {
                    let seg = normalize_function(&unit.path, f, c);
                    out.push_str(&serde_json::to_string_pretty(&seg)?);
                    out.push('\n');
                }
                DumpWhat::Ir | DumpWhat::Cfg => {
                    let cfg = match function_cfg(f, c) {
                        Ok(cfg) => cfg,
                        Err(e) => {
                            let mark = if what == DumpWhat::Cfg { "//" } else { "#" };
                            let _ = writeln!(out, "{} {}.{} skipped: {}", mark, c.name, name, e);
                            continue;
                        }
                    };
                    if what == DumpWhat::Cfg {
                        out.push_str(&cfg.to_dot());
                    } else {
                        let _ = writeln!(out, "# {}.{}", c.name, name);
                        for k in flatten(&cfg).normalized().keys() {
                            let _ = writeln!(out, "{}", k);
                        }
                    }
                }
            }
        }
    }
    if !hit {
        bail!("no matching function with a body in {}", path.display());
    }
    Ok(Outcome::ok(out, EXIT_CLEAN))
}
