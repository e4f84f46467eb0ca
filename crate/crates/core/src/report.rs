//! Scan report and its renderings.

use crate::rdr::{FileReport, Finding, ScanMode, ScanOptions};
use crate::vuln::DmId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub eta: f64,
    pub itv: Option<usize>,
    pub mode: ScanMode,
    pub disabled_dms: BTreeSet<DmId>,
    /// `bundled` or the store directory.
    pub avs_store: String,
    pub avs_count: usize,
}

impl ReportConfig {
    pub fn new(opts: &ScanOptions, avs_store: &str, avs_count: usize) -> Self {
        ReportConfig {
            eta: opts.matching.eta,
            itv: opts.matching.itv,
            mode: opts.mode,
            disabled_dms: opts.disabled_dms.clone(),
            avs_store: avs_store.to_string(),
            avs_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ReportConfig,
    pub files: Vec<FileReport>,
}

impl Report {
    pub fn new(config: ReportConfig, mut files: Vec<FileReport>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Report { schema_version: SCHEMA_VERSION, tool_version: TOOL_VERSION.to_string(), config, files }
    }

    pub fn findings(&self) -> impl Iterator<Item = (&FileReport, &Finding)> {
        self.files.iter().flat_map(|f| f.findings.iter().map(move |x| (f, x)))
    }

    pub fn reported(&self) -> impl Iterator<Item = (&FileReport, &Finding)> {
        self.findings().filter(|(_, f)| f.reported())
    }

    pub fn suppressed(&self) -> impl Iterator<Item = (&FileReport, &Finding)> {
        self.findings().filter(|(_, f)| !f.reported())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for file in &self.files {
            if file.findings.is_empty() && file.warnings.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{}", file.path);
            for f in file.findings.iter().filter(|f| f.reported()) {
                let _ = writeln!(out, "  reported    {}", finding_line(f));
            }
            for f in file.findings.iter().filter(|f| !f.reported()) {
                let dms: Vec<String> = f.suppressed_by.iter().map(|d| d.to_string()).collect();
                let _ = writeln!(out, "  suppressed  {}  by {}", finding_line(f), dms.join(","));
            }
            for w in &file.warnings {
                let _ = writeln!(out, "  warning     {}", w);
            }
        }
        let _ = writeln!(
            out,
            "{} reported, {} suppressed, {} files",
            self.reported().count(),
            self.suppressed().count(),
            self.files.len()
        );
        out
    }
}

fn finding_line(f: &Finding) -> String {
    let at = f.spans.first().map(|s| format!("{}:{}", s.line, s.column)).unwrap_or_default();
    let mut via = Vec::new();
    if let Some(r) = f.fired_rule {
        via.push(format!("rule {}", serde_json::to_value(r).unwrap().as_str().unwrap_or_default()));
    }
    if let Some(a) = &f.matched_avs {
        via.push(format!("avs {}", a));
    }
    format!("{:<18} {}.{} at {}  ({})", f.vuln_type.slug(), f.contract, f.function, at, via.join(", "))
}
