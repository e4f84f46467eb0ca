//! Acceptance checks. Prints one PASS/FAIL line per criterion and fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use avscan_core::bundled::bundled;
use avscan_core::cfg::{flatten, function_cfg, IrSequence};
use avscan_core::cluster::{cluster, pairwise_distances};
use avscan_core::frontend::{enumerate_functions, parse_source, SourceUnit};
use avscan_core::learn::{select_segments, single_cluster};
use avscan_core::matcher::{match_avs, MatchConfig, MatchMethod};
use avscan_core::normalize::normalize_function;
use avscan_core::rdr::{scan, FileReport, ScanOptions};
use avscan_core::report::Report;
use avscan_core::vuln::{DmId, VulnType};
use common::*;
use rand::{rngs::StdRng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

const FIXTURE_BUDGET: Duration = Duration::from_secs(5);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const CORPUS_BUDGET: Duration = Duration::from_secs(120);
const SIGMA_CB10: f64 = 0.75;
const SIGMA_TOLERANCE: f64 = 0.05;
const RENAME_TRIALS: usize = 120;
const SYNTHETIC_DM: usize = 50;
const SYNTHETIC_PERF: usize = 1000;
const SYNTHETIC_LINES: usize = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn avscan(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_avscan")).args(args).output().expect("avscan runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn tag(path: &str) -> String {
    Path::new(path).file_name().unwrap().to_string_lossy()[..4].to_string()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_fidelity() -> Outcome {
    use VulnType::*;
    let dir = fixture_dir();
    let t = Instant::now();
    let (code, out) = avscan(&["scan", "--format", "json", dir.to_str().unwrap()]);
    let dt = t.elapsed();
    let report: Report = serde_json::from_str(&out).map_err(|e| format!("bad report JSON: {e}"))?;
    let reported: BTreeSet<(String, VulnType)> = report.reported().map(|(f, x)| (tag(&f.path), x.vuln_type)).collect();
    let suppressed: BTreeSet<(String, VulnType, Vec<DmId>)> =
        report.suppressed().map(|(f, x)| (tag(&f.path), x.vuln_type, x.suppressed_by.clone())).collect();
    let named: BTreeSet<(String, VulnType)> =
        [("cb01", UnexpectedRevert), ("cb02", UnexpectedRevert), ("cb12", Reentrancy)].into_iter().map(|(a, b)| (a.into(), b)).collect();
    let extra: BTreeSet<(String, VulnType)> =
        [("cb06", UncheckedLowLevelCall), ("cb09", Reentrancy), ("cb10", Reentrancy), ("cb11", Reentrancy)]
            .into_iter()
            .map(|(a, b)| (a.into(), b))
            .collect();
    let want_sup: BTreeSet<(String, VulnType, Vec<DmId>)> = [
        ("cb03", Reentrancy, DmId::Dm3),
        ("cb04", Reentrancy, DmId::Dm2),
        ("cb05", Reentrancy, DmId::Dm4),
        ("cb06", UnexpectedRevert, DmId::Dm6),
        ("cb07", UnexpectedRevert, DmId::Dm7),
        ("cb08", SelfdestructAbuse, DmId::Dm10),
    ]
    .into_iter()
    .map(|(a, b, d)| (a.into(), b, vec![d]))
    .collect();
    let in_scope: BTreeSet<_> = reported.iter().filter(|k| !extra.contains(k)).cloned().collect();
    check(in_scope == named, || format!("reported {in_scope:?}, expected {named:?}"))?;
    check(suppressed == want_sup, || format!("suppressed {suppressed:?}, expected {want_sup:?}"))?;
    check(code == 1, || format!("exit code {code}, expected 1"))?;
    check(dt < FIXTURE_BUDGET, || format!("took {dt:?}"))?;
    let extras: Vec<String> = reported.intersection(&extra).map(|(f, v)| format!("{f}:{v}")).collect();
    Ok(format!("3 named reports, 6 exact suppressions, {dt:.2?}; additional reports [{}]", extras.join(", ")))
}

fn clustering() -> Outcome {
    let segs: Vec<_> = ["cb03", "cb09", "cb10", "cb11"]
        .iter()
        .map(|p| select_segments(&fixture(p), VulnType::Reentrancy).0.remove(0))
        .collect();
    let id: Vec<String> = segs.iter().map(|s| s.id()).collect();
    let dm = pairwise_distances(&segs).unwrap();
    let d = |i: usize, j: usize| dm.between(&id[i], &id[j]).unwrap();
    let (d9_11, d9_10, d10_11) = (d(1, 3), d(1, 2), d(2, 3));
    let to3 = d(0, 1).min(d(0, 2)).min(d(0, 3));
    check(d9_11 < d9_10 && d9_10 < d10_11 && d10_11 < to3, || {
        format!("ordering broken: d(9,11)={d9_11} d(9,10)={d9_10} d(10,11)={d10_11} min d(3,.)={to3}")
    })?;
    let got: BTreeSet<BTreeSet<String>> = cluster(&dm, 50).into_iter().map(|g| g.into_iter().collect()).collect();
    let want: BTreeSet<BTreeSet<String>> =
        [[1usize, 2, 3].iter().map(|&i| id[i].clone()).collect(), BTreeSet::from([id[0].clone()])].into_iter().collect();
    check(got == want, || format!("clusters {got:?}"))?;
    Ok(format!("{{CB9,CB10,CB11}} {{CB3}}; d(9,11)={d9_11} < d(9,10)={d9_10} < d(10,11)={d10_11} < min d(CB3,.)={to3}"))
}

fn ir_of(unit: &SourceUnit, function: &str) -> IrSequence {
    let (c, f) = enumerate_functions(unit).into_iter().find(|(_, f)| f.display_name() == function).unwrap();
    flatten(&function_cfg(f, c).unwrap())
}

fn matching_paths() -> Outcome {
    let cfg = MatchConfig::new(0.7, None).unwrap();
    let cb1 = select_segments(&fixture("cb01"), VulnType::UnexpectedRevert).0;
    let avs1 = single_cluster(&cb1, VulnType::UnexpectedRevert, Some(&[1, 2, 3])).map_err(|e| e.to_string())?;
    let r1 = match_avs(&avs1, &ir_of(&fixture("cb02"), "placeBid"), &cfg);
    check(r1.matched && r1.method == MatchMethod::Inclusion, || format!("CB1 -> CB2: {:?} sigma {:.3}", r1.method, r1.similarity))?;
    let cb9 = select_segments(&fixture("cb09"), VulnType::Reentrancy).0;
    let avs9 = single_cluster(&cb9, VulnType::Reentrancy, None).map_err(|e| e.to_string())?;
    let r2 = match_avs(&avs9, &ir_of(&fixture("cb10"), "claim"), &cfg);
    check(r2.matched && r2.method == MatchMethod::Lcs && (r2.similarity - SIGMA_CB10).abs() <= SIGMA_TOLERANCE, || {
        format!("CB9 -> CB10: {:?} sigma {:.3}", r2.method, r2.similarity)
    })?;
    Ok(format!(
        "CB1->CB2 inclusion (lcs sigma {:.3} < 0.7); CB9->CB10 direct lcs sigma {:.3} (target {SIGMA_CB10} +/- {SIGMA_TOLERANCE})",
        r1.similarity, r2.similarity
    ))
}

fn oracles() -> Outcome {
    let t = Instant::now();
    ted_trials(1000, 101)?;
    lcs_trials(1000, 102)?;
    cfg_trials(200, 103)?;
    let dt = t.elapsed();
    check(dt < ORACLE_BUDGET, || format!("took {dt:?}"))?;
    Ok(format!("1000 TED, 1000 LCS, 200 CFG trials, zero mismatches, {dt:.2?}"))
}

/// Findings with contract and function names mapped through `back`.
fn findings_json(r: &FileReport, back: &BTreeMap<String, String>) -> String {
    let mut fs = r.findings.clone();
    for f in &mut fs {
        for name in [&mut f.contract, &mut f.function] {
            if let Some(orig) = back.get(name.as_str()) {
                *name = orig.clone();
            }
        }
    }
    serde_json::to_string(&fs).unwrap()
}

fn normalization() -> Outcome {
    let mut rng = StdRng::seed_from_u64(105);
    let sources = fixtures();
    let opts = ScanOptions::default();
    let shapes = |u: &SourceUnit| -> Vec<String> {
        enumerate_functions(u)
            .into_iter()
            .map(|(c, f)| {
                let s = normalize_function(&u.path, f, c);
                serde_json::to_string(&(&s.root, s.node_count, &s.statement_spans)).unwrap()
            })
            .collect()
    };
    for trial in 0..RENAME_TRIALS {
        let (name, src) = &sources[trial % sources.len()];
        let base = parse_source(src, name).unwrap();
        let (renamed, map) = rename_source(&mut rng, src);
        let unit = parse_source(&renamed, name).map_err(|e| format!("trial {trial}: {e}"))?;
        check(shapes(&base) == shapes(&unit), || format!("trial {trial} ({name}): segments differ"))?;
        let back: BTreeMap<String, String> = map.into_iter().map(|(a, b)| (b, a)).collect();
        let before = findings_json(&scan(&base, bundled(), &opts), &BTreeMap::new());
        let after = findings_json(&scan(&unit, bundled(), &opts), &back);
        check(before == after, || format!("trial {trial} ({name}): findings differ\n{before}\n{after}"))?;
    }
    Ok(format!("{RENAME_TRIALS} rename/literal trials over {} fixtures, segments and findings identical", sources.len()))
}

fn reported_keys(r: &FileReport) -> BTreeSet<(String, String, VulnType)> {
    r.findings.iter().filter(|f| f.reported()).map(|f| (f.contract.clone(), f.function.clone(), f.vuln_type)).collect()
}

fn monotonicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(106);
    let mut sources = fixtures();
    sources.extend((0..SYNTHETIC_DM).map(|i| (format!("synth{i}.sol"), synthetic_contract(&mut rng, i, SYNTHETIC_LINES))));
    let off = ScanOptions { disabled_dms: DmId::ALL.into_iter().collect(), ..Default::default() };
    let (mut added, mut extra) = (0, 0);
    for (name, src) in &sources {
        let unit = parse_source(src, name).unwrap();
        let (a, b) = (scan(&unit, bundled(), &ScanOptions::default()), scan(&unit, bundled(), &off));
        let (ra, rb) = (reported_keys(&a), reported_keys(&b));
        check(ra.is_subset(&rb), || format!("{name}: enabling DMs added {:?}", ra.difference(&rb).collect::<Vec<_>>()))?;
        added += ra.len();
        extra += rb.len() - ra.len();
    }
    Ok(format!("{} sources; {added} reports with DMs, {extra} more without", sources.len()))
}

fn performance() -> Outcome {
    let mut rng = StdRng::seed_from_u64(107);
    let corpus: Vec<String> = (0..SYNTHETIC_PERF).map(|i| synthetic_contract(&mut rng, i, SYNTHETIC_LINES)).collect();
    let lines: usize = corpus.iter().map(|s| s.lines().count()).sum();
    let store = bundled();
    check(store.len() == 42, || format!("store has {} signatures", store.len()))?;
    let opts = ScanOptions::default();
    let t = Instant::now();
    let mut findings = 0;
    for (i, src) in corpus.iter().enumerate() {
        let unit = parse_source(src, &format!("s{i}.sol")).map_err(|e| e.to_string())?;
        findings += scan(&unit, store, &opts).findings.len();
    }
    let dt = t.elapsed();
    check(dt < CORPUS_BUDGET, || format!("took {dt:?}"))?;
    Ok(format!("{SYNTHETIC_PERF} contracts ({} lines avg), 42 signatures, one thread: {dt:.2?}, {findings} findings", lines / SYNTHETIC_PERF))
}

fn determinism() -> Outcome {
    let dir = fixture_dir();
    let fx = dir.to_str().unwrap();
    let (a, b) = (avscan(&["scan", "--format", "json", fx]), avscan(&["scan", "--format", "json", fx]));
    check(a == b, || "scan output differs between runs".into())?;
    let out = tempfile::tempdir().unwrap();
    let learn_args: Vec<String> = ["cb03_reg_documents.sol", "cb09_dividend_pool.sol", "cb10_dividend_pool.sol", "cb11_dividend_pool.sol"]
        .iter()
        .map(|f| dir.join(f).to_string_lossy().into_owned())
        .collect();
    let run = || {
        let mut args = vec!["learn", "--vuln-type", "reentrancy", "--out", out.path().to_str().unwrap()];
        args.extend(learn_args.iter().map(String::as_str));
        let (code, stdout) = avscan(&args);
        let mut files = BTreeMap::new();
        for e in std::fs::read_dir(out.path()).unwrap() {
            let p = e.unwrap().path();
            files.insert(p.clone(), std::fs::read(&p).unwrap());
        }
        (code, stdout, files)
    };
    let (l1, l2) = (run(), run());
    check(l1.0 == 0, || format!("learn exit {}", l1.0))?;
    check(l1 == l2, || "learn output differs between runs".into())?;
    Ok(format!("scan JSON {} bytes, learn JSON {} bytes + {} signature files identical across runs", a.1.len(), l1.1.len(), l1.2.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("fixture fidelity", fixture_fidelity),
        ("clustering grouping", clustering),
        ("matching paths", matching_paths),
        ("oracle equivalence", oracles),
        ("normalization invariance", normalization),
        ("DM monotonicity", monotonicity),
        ("performance guard", performance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {}: {}", i + 1, name, detail),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {}: {}", i + 1, name, detail);
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
