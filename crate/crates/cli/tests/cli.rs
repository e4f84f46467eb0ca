use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avscan")).current_dir(dir).args(args).output().unwrap()
}

fn run(args: &[&str]) -> Output {
    run_in(&std::env::temp_dir(), args)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn counts(report: &Value) -> (usize, usize) {
    let all: Vec<&Value> = report["files"].as_array().unwrap().iter().flat_map(|f| f["findings"].as_array().unwrap()).collect();
    let sup = all.iter().filter(|f| !f["suppressed_by"].as_array().unwrap().is_empty()).count();
    (all.len() - sup, sup)
}

#[test]
fn scan_fixtures() {
    let dir = fixtures();
    let o = run(&["scan", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["config"]["avs_count"], 42);
    assert_eq!(r["files"].as_array().unwrap().len(), 12);
    assert_eq!(counts(&r), (7, 6));
    let text = run(&["scan", "--format", "text", dir.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("7 reported, 6 suppressed, 12 files"));
}

#[test]
fn disabling_all_defenses_reports_everything() {
    let o = run(&["scan", "--disable-dm", "all", fixtures().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(counts(&json(&o)), (13, 0));
    let o = run(&["scan", "--disable-dm", "DM3,DM2", fixtures().to_str().unwrap()]);
    assert_eq!(counts(&json(&o)), (9, 4));
}

#[test]
fn clean_and_fatal_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("ok.sol"), "contract A { uint x; function f() public { x = 1; } }").unwrap();
    let o = run(&["scan", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(counts(&json(&o)), (0, 0));

    let o = run(&["scan", "/nonexistent/contracts"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("avscan:"));

    assert_eq!(run(&["scan", "--rules-only", "--avs-only", "x.sol"]).status.code(), Some(2));
    assert_eq!(run(&["scan", "--eta", "0", tmp.path().to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["scan", "--disable-dm", "DM11", tmp.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unparseable_files_become_warnings() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.sol"), "contract {").unwrap();
    fs::copy(fixture("cb01_auction.sol"), tmp.path().join("cb01.sol")).unwrap();
    let o = run(&["scan", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    let bad = r["files"].as_array().unwrap().iter().find(|f| f["path"].as_str().unwrap().ends_with("bad.sol")).unwrap();
    assert_eq!(bad["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn learn_then_scan_with_learned_store() {
    let out = tempfile::tempdir().unwrap();
    let store = out.path().join("store");
    let files = ["cb03_reg_documents.sol", "cb09_dividend_pool.sol", "cb10_dividend_pool.sol", "cb11_dividend_pool.sol"].map(fixture);
    let mut args = vec!["learn", "--vuln-type", "reentrancy", "--out", store.to_str().unwrap()];
    args.extend(files.iter().map(String::as_str));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o);
    assert_eq!(summary["signatures"].as_array().unwrap().len(), 2);
    assert_eq!(summary["clusters"].as_array().unwrap().len(), 2);
    assert_eq!(summary["distances"]["labels"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_dir(&store).unwrap().count(), 2);

    let o = run(&["scan", "--avs-only", "--avs-dir", store.to_str().unwrap(), &files[1], &files[2], &files[3]]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    assert_eq!(counts(&r), (3, 0));
    assert_eq!(r["config"]["avs_count"], 2);
}

#[test]
fn learn_without_usable_input_fails() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.sol"), "contract {").unwrap();
    let o = run(&["learn", "--vuln-type", "reentrancy", "--out", tmp.path().join("s").to_str().unwrap(), tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!json(&o)["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn match_reports_methods() {
    let o = run(&["match", "--format", "text", &fixture("cb02_auction_potato.sol")]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("placeBid") && text.contains("Inclusion"), "{text}");
    let o = run(&["match", &fixture("cb08_deed.sol")]);
    let v = json(&o);
    assert!(v.as_array().unwrap().iter().all(|f| f["functions"].as_array().is_some()));
}

fn write_account(root: &Path, account: &str, files: &[(&str, String)]) {
    fs::create_dir_all(root.join(account)).unwrap();
    for (name, text) in files {
        fs::write(root.join(account).join(name), text).unwrap();
    }
}

const PALETTE: &[&str] = &["a = a + 1; ", "if (a > b) { b = a; } ", "while (b < 10) { b++; } ", "require(msg.sender == owner); "];
const OTHER: &[&str] = &["delete m[tx.origin]; ", "emit E(block.number); ", "selfdestruct(owner); ", "for (;;) { break; } ", "msg.sender.transfer(this.balance); "];

fn distinct_function(palette: &[&str], k: usize) -> String {
    let mut body = String::new();
    for i in 0..=k {
        body.push_str(palette[(i * (k + 1)) % palette.len()]);
    }
    format!("function f{k}(uint a, uint b) public {{ {body}}}\n")
}

#[test]
fn similarity_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let contract = |range: std::ops::Range<usize>, extra: usize| {
        let fns: String = range.map(|k| distinct_function(PALETTE, k)).collect();
        let extra: String = (0..extra).map(|k| distinct_function(OTHER, 4 + k)).collect();
        format!("contract C {{ address owner; {fns}{extra}}}\n")
    };
    write_account(root, "alice", &[("a.sol", contract(0..10, 0))]);
    write_account(root, "alice_copy", &[("b.sol", contract(0..10, 0).replace("owner", "boss"))]);
    write_account(root, "partial", &[("p.sol", contract(0..8, 2))]);
    write_account(root, "odd", &[("o.sol", "library L { event E(bytes32 indexed h); }\n".to_string())]);
    let o = run(&["similarity", root.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let h = json(&o);
    assert_eq!(h["total"], 4);
    let m = &h["maxima"];
    assert_eq!(m["alice"], 100.0);
    assert_eq!(m["alice_copy"], 100.0);
    assert!(m["odd"].as_f64().unwrap() < 10.0, "{m}");
    let partial = m["partial"].as_f64().unwrap();
    assert!((50.0..100.0).contains(&partial), "{partial}");
    let buckets = h["buckets"].as_array().unwrap();
    assert_eq!(buckets.len(), 11);
    assert_eq!(buckets[10]["count"], 2);
    assert_eq!(buckets[0]["count"], 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("avscan.toml"), "format = \"text\"\ndisable_dm = [\"all\"]\n").unwrap();
    let fx = fixtures();
    let o = run_in(tmp.path(), &["scan", fx.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("13 reported, 0 suppressed"));
    let o = run_in(tmp.path(), &["scan", "--format", "json", "--disable-dm", "DM1", fx.to_str().unwrap()]);
    assert_eq!(counts(&json(&o)), (7, 6));

    let other = tmp.path().join("strict.toml");
    fs::write(&other, "eta = 1.0\nmode = \"rules-only\"\n").unwrap();
    let o = run_in(tmp.path(), &["scan", "--config", other.to_str().unwrap(), fx.to_str().unwrap()]);
    let r = json(&o);
    assert_eq!(r["config"]["eta"], 1.0);
    assert_eq!(r["config"]["mode"], "rules-only");

    fs::write(&other, "etaa = 1.0\n").unwrap();
    let o = run_in(tmp.path(), &["scan", "--config", other.to_str().unwrap(), fx.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_views() {
    let f = fixture("cb01_auction.sol");
    let ir = run(&["dump", &f]);
    assert_eq!(ir.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ir.stdout);
    assert!(text.starts_with("# Auction.bid\n") && text.contains("CALL_BUILTIN(moneysend)"), "{text}");
    let dot = run(&["dump", "--what", "cfg", "--function", "Auction.bid", &f]);
    assert!(String::from_utf8_lossy(&dot.stdout).starts_with("digraph"));
    let ast = run(&["dump", "--what", "ast", &f]);
    assert_eq!(json(&ast)["root"]["kind"], "block");
    assert_eq!(run(&["dump", "--function", "nope", &f]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_identical() {
    let fx = fixtures();
    let a = run(&["scan", fx.to_str().unwrap()]);
    let b = run(&["scan", "--jobs", "1", fx.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
}
