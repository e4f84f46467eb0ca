//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use avscan_core::cfg::Cfg;
use avscan_core::cfg::EdgeKind;
use avscan_core::frontend::{parse_source, SourceUnit};
use avscan_core::normalize::NormalizedNode;
use avscan_core::tree::NodeKind;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

pub fn fixture_dir() -> PathBuf {
    // also compiled into the cli crate's tests
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("fixtures");
    if own.is_dir() {
        own
    } else {
        here.join("../core/fixtures")
    }
}

/// `(file name, source)` of every fixture, sorted by name.
pub fn fixtures() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sol"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn fixture(prefix: &str) -> SourceUnit {
    let (name, src) = fixtures().into_iter().find(|(n, _)| n.starts_with(prefix)).expect("fixture exists");
    parse_source(&src, &name).unwrap()
}

// ---- tree edit distance ----

struct Flat {
    labels: Vec<(NodeKind, String)>,
    /// Preorder index ranges: node i's subtree is `i..end[i]`.
    end: Vec<usize>,
}

fn flat(root: &NormalizedNode) -> Flat {
    fn go(n: &NormalizedNode, f: &mut Flat) {
        let i = f.labels.len();
        f.labels.push((n.kind, n.label.clone()));
        f.end.push(0);
        for c in &n.children {
            go(c, f);
        }
        f.end[i] = f.labels.len();
    }
    let mut f = Flat { labels: Vec::new(), end: Vec::new() };
    go(root, &mut f);
    f
}

impl Flat {
    fn ancestor(&self, a: usize, b: usize) -> bool {
        a < b && b < self.end[a]
    }
    fn left_of(&self, a: usize, b: usize) -> bool {
        a < b && !self.ancestor(a, b)
    }
}

/// Minimum cost over all valid edit mappings, by exhaustive enumeration.
pub fn brute_ted(a: &NormalizedNode, b: &NormalizedNode) -> u32 {
    let (fa, fb) = (flat(a), flat(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut best = (n + m) as u32;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut used = vec![false; m];
    fn rec(i: usize, fa: &Flat, fb: &Flat, pairs: &mut Vec<(usize, usize)>, used: &mut [bool], best: &mut u32) {
        let (n, m) = (fa.labels.len(), fb.labels.len());
        if i == n {
            let relabel = pairs.iter().filter(|&&(x, y)| fa.labels[x] != fb.labels[y]).count();
            let cost = (n + m - 2 * pairs.len() + relabel) as u32;
            *best = (*best).min(cost);
            return;
        }
        rec(i + 1, fa, fb, pairs, used, best);
        for j in 0..m {
            if used[j] {
                continue;
            }
            let ok = pairs.iter().all(|&(x, y)| {
                fa.ancestor(x, i) == fb.ancestor(y, j) && fa.left_of(x, i) == fb.left_of(y, j)
            });
            if ok {
                used[j] = true;
                pairs.push((i, j));
                rec(i + 1, fa, fb, pairs, used, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    rec(0, &fa, &fb, &mut pairs, &mut used, &mut best);
    best
}

const TREE_KINDS: &[NodeKind] = &[NodeKind::Block, NodeKind::Identifier, NodeKind::Literal];
const TREE_LABELS: &[&str] = &["*", "a", "b"];

/// Random ordered tree with `size` nodes over a small label alphabet.
pub fn random_tree(rng: &mut StdRng, size: usize) -> NormalizedNode {
    let node = |rng: &mut StdRng| NormalizedNode {
        kind: *TREE_KINDS.choose(rng).unwrap(),
        label: TREE_LABELS.choose(rng).unwrap().to_string(),
        children: Vec::new(),
    };
    let mut root = node(rng);
    for _ in 1..size {
        // descend to a random node and append a child
        let mut cur = &mut root;
        while !cur.children.is_empty() && rng.gen_bool(0.5) {
            let k = rng.gen_range(0..cur.children.len());
            cur = &mut cur.children[k];
        }
        let at = rng.gen_range(0..=cur.children.len());
        cur.children.insert(at, node(rng));
    }
    root
}

// ---- sequences ----

pub fn dp_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

pub fn lcs3<T: PartialEq>(a: &[T], b: &[T], c: &[T]) -> usize {
    let (x, y, z) = (a.len(), b.len(), c.len());
    let mut t = vec![vec![vec![0usize; z + 1]; y + 1]; x + 1];
    for i in 1..=x {
        for j in 1..=y {
            for k in 1..=z {
                t[i][j][k] = if a[i - 1] == b[j - 1] && b[j - 1] == c[k - 1] {
                    t[i - 1][j - 1][k - 1] + 1
                } else {
                    t[i - 1][j][k].max(t[i][j - 1][k]).max(t[i][j][k - 1])
                };
            }
        }
    }
    t[x][y][z]
}

pub fn is_subsequence<T: PartialEq>(needle: &[T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == x))
}

pub fn random_seq(rng: &mut StdRng, max_len: usize, alphabet: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| ((b'a' + rng.gen_range(0..alphabet) as u8) as char).to_string()).collect()
}

// ---- control flow ----

/// Level-by-level BFS over the non-back edges, successors in ascending id order.
pub fn reference_bfs(cfg: &Cfg) -> Vec<usize> {
    let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in cfg.edges.iter().filter(|e| e.kind != EdgeKind::LoopBack) {
        succ.entry(e.from).or_default().insert(e.to);
    }
    let mut seen = BTreeSet::from([cfg.entry]);
    let mut order = Vec::new();
    let mut level = VecDeque::from([cfg.entry]);
    while !level.is_empty() {
        let mut next = VecDeque::new();
        for n in level {
            order.push(n);
            for &s in succ.get(&n).into_iter().flatten() {
                if seen.insert(s) {
                    next.push_back(s);
                }
            }
        }
        level = next;
    }
    order
}

fn random_stmts(rng: &mut StdRng, depth: u32, in_loop: bool, out: &mut String) {
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        let pick = if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..7) };
        match pick {
            0 => out.push_str("a = a + 1; "),
            1 => out.push_str("total += b; "),
            2 if in_loop && rng.gen_bool(0.3) => out.push_str("break; "),
            2 => out.push_str("require(a > 0); "),
            3 => {
                out.push_str("if (a > b) { ");
                random_stmts(rng, depth - 1, in_loop, out);
                out.push_str("} ");
                if rng.gen_bool(0.5) {
                    out.push_str("else { ");
                    random_stmts(rng, depth - 1, in_loop, out);
                    out.push_str("} ");
                }
            }
            4 => {
                out.push_str("while (b < 10) { b += 1; ");
                random_stmts(rng, depth - 1, true, out);
                out.push_str("} ");
            }
            5 => {
                out.push_str("for (uint i = 0; i < a; i++) { ");
                random_stmts(rng, depth - 1, true, out);
                out.push_str("} ");
            }
            _ => out.push_str("if (b == 0) { return; } "),
        }
    }
}

/// Source of a contract whose only function has a random structured body.
pub fn random_function_source(rng: &mut StdRng) -> String {
    let mut body = String::new();
    random_stmts(rng, 2, false, &mut body);
    format!("contract R {{ uint total; function f(uint a, uint b) public {{ {} }} }}", body)
}

// ---- renaming ----

const KEEP: &[&str] = &[
    "pragma", "solidity", "import", "contract", "interface", "library", "is", "function", "modifier", "event",
    "struct", "enum", "mapping", "returns", "return", "public", "private", "internal", "external", "view",
    "pure", "constant", "payable", "memory", "storage", "calldata", "if", "else", "while", "for", "do",
    "break", "continue", "throw", "emit", "new", "delete", "var", "true", "false", "ether", "wei",
    "finney", "szabo", "seconds", "minutes", "hours", "days", "weeks", "years", "constructor", "fallback",
    "anonymous", "indexed", "using", "assembly", "_", "length", "now",
];

fn keep_ident(s: &str) -> bool {
    KEEP.contains(&s)
        || avscan_core::tree::BUILTIN_GLOBALS.contains(&s)
        || avscan_core::tree::BUILTIN_MEMBERS.contains(&s)
        || avscan_core::frontend::parser::is_elementary_type(s)
}

/// Same-length replacement; an `owner`/`admin` marker inside the name is kept.
fn fresh_name(rng: &mut StdRng, old: &str, taken: &BTreeSet<String>) -> Option<String> {
    let lower = old.to_ascii_lowercase();
    let marker = ["owner", "admin"].iter().find_map(|m| lower.find(m).map(|at| (at, m.len())));
    for _ in 0..20 {
        let name: String = old
            .char_indices()
            .map(|(i, c)| match marker {
                Some((at, len)) if i >= at && i < at + len => c,
                _ if i == 0 => (b'a' + rng.gen_range(0..26)) as char,
                _ => *b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789".choose(rng).unwrap() as char,
            })
            .collect();
        if name != old && !taken.contains(&name) && !keep_ident(&name) {
            return Some(name);
        }
    }
    None
}

fn fresh_literal(rng: &mut StdRng, text: &str) -> String {
    if let Some(hex) = text.strip_prefix("0x") {
        let digits: String = hex.chars().map(|_| *b"0123456789abcdef".choose(rng).unwrap() as char).collect();
        return format!("0x{}", digits);
    }
    text.chars()
        .enumerate()
        .map(|(i, c)| if !c.is_ascii_digit() { c } else if i == 0 && text.len() > 1 { (b'1' + rng.gen_range(0..9)) as char } else { (b'0' + rng.gen_range(0..10)) as char })
        .collect()
}

/// Consistently rename identifiers and substitute literals, keeping every token's length.
/// Returns the new source and the renaming map (old to new).
pub fn rename_source(rng: &mut StdRng, src: &str) -> (String, BTreeMap<String, String>) {
    use avscan_core::frontend::lexer::{tokenize, TokenKind};
    let toks = tokenize(src, "r.sol").unwrap();
    let idents: BTreeSet<String> = toks.iter().filter(|t| t.kind == TokenKind::Ident).map(|t| t.text.clone()).collect();
    let mut taken = idents.clone();
    let mut map = BTreeMap::new();
    for id in idents.iter().filter(|s| !keep_ident(s)) {
        if let Some(n) = fresh_name(rng, id, &taken) {
            taken.insert(n.clone());
            map.insert(id.clone(), n);
        }
    }
    let mut out = String::with_capacity(src.len());
    let mut at = 0;
    for t in &toks {
        let (s, e) = (t.span.start, t.span.end);
        if e <= s {
            continue;
        }
        out.push_str(&src[at..s]);
        let text = &src[s..e];
        match t.kind {
            TokenKind::Ident => out.push_str(map.get(text).map_or(text, String::as_str)),
            TokenKind::Number => out.push_str(&fresh_literal(rng, text)),
            TokenKind::Str if text.len() > 2 => {
                let q = &text[..1];
                let inner: String = (0..text.len() - 2).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect();
                out.push_str(&format!("{q}{inner}{q}"));
            }
            _ => out.push_str(text),
        }
        at = e;
    }
    out.push_str(&src[at..]);
    (out, map)
}

// ---- synthetic contracts ----

fn pick<'a>(rng: &mut StdRng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn synthetic_function(rng: &mut StdRng, k: usize, out: &mut String) {
    let f = format!("{}{}", pick(rng, &["withdraw", "payout", "claim", "settle", "refund", "collect"]), k);
    let guard = pick(rng, &["", "", " onlyOwner", " noReentrancy"]);
    let vis = pick(rng, &["public", "public", "external", "private"]);
    match rng.gen_range(0..10) {
        0 => out.push_str(&format!(
            "    function {f}(uint amount){guard} {vis} {{\n        uint bal = balances[msg.sender];\n        require(bal >= amount);\n        require(msg.sender.call.value(amount)());\n        balances[msg.sender] = bal - amount;\n        totalPaid += amount;\n    }}\n\n"
        )),
        1 => out.push_str(&format!(
            "    function {f}(){guard} {vis} payable {{\n        require(msg.value > highestBid);\n        require(leader.send(highestBid));\n        leader = msg.sender;\n        highestBid = msg.value;\n    }}\n\n"
        )),
        2 => out.push_str(&format!(
            "    function {f}(uint rounds){guard} {vis} {{\n        for (uint i = 0; i < investors.length; i++) {{\n            if (i >= rounds) {{\n                break;\n            }}\n            investors[i].{}(shares[investors[i]]);\n            shares[investors[i]] = 0;\n        }}\n    }}\n\n",
            pick(rng, &["send", "transfer"])
        )),
        3 => out.push_str(&format!(
            "    function {f}(address to, uint amount){guard} {vis} {{\n        require(tx.origin == owner);\n        to.transfer(amount);\n        totalPaid += amount;\n    }}\n\n"
        )),
        4 => out.push_str(&format!(
            "    function {f}(address target, bytes data){guard} {vis} {{\n        {};\n        lastCall = block.number;\n    }}\n\n",
            pick(rng, &["target.call(data)", "require(target.call(data))", "bool ok = target.call(data)"])
        )),
        5 => out.push_str(&format!(
            "    function {f}(){guard} {vis} {{\n        {}\n        selfdestruct(owner);\n    }}\n\n",
            pick(rng, &["", "require(msg.sender == owner);", "totalPaid = 0;"])
        )),
        6 => out.push_str(&format!(
            "    function {f}(uint amount){guard} {vis} {{\n        require(!locked);\n        locked = true;\n        uint bal = balances[msg.sender];\n        if (bal >= amount) {{\n            msg.sender.call.value(amount)();\n            balances[msg.sender] -= amount;\n        }}\n        locked = false;\n    }}\n\n"
        )),
        7 => out.push_str(&format!(
            "    function {f}(address who, uint amount){guard} {vis} {{\n        require(balances[who] >= amount);\n        balances[who] -= amount;\n        balances[msg.sender] += amount;\n        emit Moved(who, msg.sender, amount);\n    }}\n\n"
        )),
        8 => out.push_str(&format!(
            "    function {f}(uint a, uint b) {vis} view returns (uint) {{\n        uint acc = 0;\n        while (a < b) {{\n            acc += a * rate;\n            a++;\n        }}\n        return acc;\n    }}\n\n"
        )),
        _ => out.push_str(&format!(
            "    function {f}(){guard} {vis} {{\n        uint amount = balances[msg.sender];\n        balances[msg.sender] = 0;\n        msg.sender.transfer(amount);\n        totalPaid += amount;\n    }}\n\n"
        )),
    }
}

/// A random contract of roughly `target_lines` lines mixing vulnerable, defended and
/// benign functions.
pub fn synthetic_contract(rng: &mut StdRng, index: usize, target_lines: usize) -> String {
    let mut s = format!(
        "pragma solidity ^0.4.24;\n\ncontract Synth{index} {{\n    address owner;\n    address leader;\n    uint highestBid;\n    uint totalPaid;\n    uint rate;\n    uint lastCall;\n    bool locked;\n    address[] investors;\n    mapping(address => uint) balances;\n    mapping(address => uint) shares;\n\n    event Moved(address from, address to, uint amount);\n\n    modifier onlyOwner() {{\n        require(msg.sender == owner);\n        _;\n    }}\n\n    modifier noReentrancy() {{\n        require(!locked);\n        locked = true;\n        _;\n        locked = false;\n    }}\n\n    function Synth{index}() public {{\n        owner = msg.sender;\n        rate = {};\n    }}\n\n",
        rng.gen_range(1..100)
    );
    let mut k = 0;
    while s.lines().count() < target_lines.saturating_sub(2) {
        synthetic_function(rng, k, &mut s);
        k += 1;
    }
    s.push_str("}\n");
    s
}

/// Proptest settings for integration tests (no regression files next to test sources).
pub fn pt_config(cases: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig { cases, failure_persistence: None, ..Default::default() }
}

// ---- oracle trial loops ----

pub fn ted_trials(trials: usize, seed: u64) -> Result<(), String> {
    use rand::SeedableRng;
    let mut rng = StdRng::seed_from_u64(seed);
    for trial in 0..trials {
        let (na, nb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_tree(&mut rng, na);
        let b = random_tree(&mut rng, nb);
        let (got, want) = (avscan_core::ted::tree_edit_distance(&a, &b), brute_ted(&a, &b));
        if got != want {
            return Err(format!("trial {trial}: ted {got}, exhaustive {want} for {a:?} vs {b:?}"));
        }
    }
    Ok(())
}

fn seq_of(keys: &[String]) -> avscan_core::cfg::IrSequence {
    use avscan_core::cfg::{IrInstruction, IrSequence, Opcode, Operand};
    let items = keys
        .iter()
        .map(|k| IrInstruction { opcode: Opcode::Binop, operands: vec![Operand::Op(k.clone())], result: None, span: None, receiver: false })
        .collect();
    IrSequence { origin: "t".into(), items, nodes: Vec::new() }
}

pub fn lcs_trials(trials: usize, seed: u64) -> Result<(), String> {
    use avscan_core::lcs::{embed, lcs_len, lcs_pairs};
    use rand::SeedableRng;
    let mut rng = StdRng::seed_from_u64(seed);
    for trial in 0..trials {
        let a = random_seq(&mut rng, 12, 4);
        let b = random_seq(&mut rng, 12, 4);
        let want = dp_lcs(&a, &b);
        let pairs = lcs_pairs(&a, &b);
        let valid = pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1) && pairs.iter().all(|&(i, j)| a[i] == b[j]);
        let (sigma, span) = avscan_core::matcher::lcs_similarity(&seq_of(&a), &seq_of(&b));
        let expect = if a.is_empty() { 0.0 } else { want as f64 / a.len() as f64 };
        if lcs_len(&a, &b) != want
            || pairs.len() != want
            || !valid
            || (sigma - expect).abs() > 1e-12
            || span.len() != want
            || embed(&a, &b).is_some() != (want == a.len())
        {
            return Err(format!("trial {trial}: {a:?} vs {b:?}, dp lcs {want}, sigma {sigma}"));
        }
    }
    Ok(())
}

pub fn cfg_trials(trials: usize, seed: u64) -> Result<(), String> {
    use avscan_core::cfg::{bfs_order, flatten, function_cfg};
    use rand::SeedableRng;
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut checked, mut attempts) = (0, 0);
    while checked < trials {
        attempts += 1;
        if attempts > 100 * trials {
            return Err(format!("only {checked} graphs with at most 10 nodes generated"));
        }
        let src = random_function_source(&mut rng);
        let unit = parse_source(&src, "r.sol").map_err(|e| e.to_string())?;
        let c = &unit.contracts[0];
        let cfg = function_cfg(&c.functions[0], c).map_err(|e| format!("{e}: {src}"))?;
        if cfg.nodes.len() > 10 {
            continue;
        }
        let order = reference_bfs(&cfg);
        let expect: Vec<_> = order.iter().flat_map(|&n| cfg.nodes[n].instrs.iter().cloned()).collect();
        if bfs_order(&cfg) != order || flatten(&cfg).items != expect {
            return Err(format!("flatten order differs from reference BFS for: {src}"));
        }
        checked += 1;
    }
    Ok(())
}
