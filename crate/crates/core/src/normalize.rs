//! Identifier- and literal-insensitive normal form of function trees.

use crate::frontend::parser::is_elementary_type;
use crate::frontend::{ContractDef, FunctionDef, Span};
use crate::tree::{function_tree, LabeledNode, NodeKind, BUILTIN_GLOBALS, BUILTIN_MEMBERS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const WILDCARD: &str = "*";
pub const ADDR: &str = "*ADDR*";
pub const CALL: &str = "*CALL*";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedNode {
    pub kind: NodeKind,
    pub label: String,
    #[serde(default)]
    pub children: Vec<NormalizedNode>,
}

impl NormalizedNode {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    /// Top-level statement children (header nodes skipped).
    pub fn statements(&self) -> impl Iterator<Item = &NormalizedNode> {
        self.children.iter().filter(|c| !c.kind.is_header())
    }

    pub fn headers(&self) -> impl Iterator<Item = &NormalizedNode> {
        self.children.iter().filter(|c| c.kind.is_header())
    }

    /// Compact preorder token string, e.g. `expr_stmt:;(assign:=(state_variable:*,msg_sender:msg.sender))`.
    pub fn token_string(&self) -> String {
        let mut s = String::new();
        self.write_tokens(&mut s);
        s
    }

    fn write_tokens(&self, out: &mut String) {
        out.push_str(self.kind.as_str());
        out.push(':');
        out.push_str(&self.label);
        if !self.children.is_empty() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.write_tokens(out);
            }
            out.push(')');
        }
    }

    /// Re-apply label abstraction. Normalized trees are fixed points.
    pub fn renormalize(&self) -> NormalizedNode {
        abstract_node(&LabeledNode::from(self), false)
    }
}

impl From<&NormalizedNode> for LabeledNode {
    fn from(n: &NormalizedNode) -> Self {
        LabeledNode::new(n.kind, &n.label, None, n.children.iter().map(LabeledNode::from).collect())
    }
}

/// Where a normalized segment came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOrigin {
    pub path: String,
    pub contract: String,
    pub function: String,
    pub span: Span,
}

impl SegmentOrigin {
    pub fn id(&self) -> String {
        format!("{}::{}::{}", self.path, self.contract, self.function)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedAstSegment {
    pub origin: SegmentOrigin,
    pub root: NormalizedNode,
    pub node_count: usize,
    /// Source span of each top-level statement, parallel to `root.statements()`.
    pub statement_spans: Vec<Span>,
}

impl NormalizedAstSegment {
    pub fn id(&self) -> String {
        self.origin.id()
    }

    pub fn statement_tokens(&self) -> Vec<String> {
        self.root.statements().map(|s| s.token_string()).collect()
    }
}

pub fn is_address_literal(text: &str) -> bool {
    let t = text.to_ascii_lowercase();
    t.len() == 42 && t.starts_with("0x") && t[2..].chars().all(|c| c.is_ascii_hexdigit())
}

/// Abstract label for a node of `kind`. `callee` marks the function position of a call.
pub fn abstract_label(kind: NodeKind, label: &str, callee: bool) -> String {
    if label.starts_with('*') {
        return label.to_string();
    }
    match kind {
        NodeKind::Identifier => {
            if BUILTIN_GLOBALS.contains(&label) {
                label.to_string()
            } else if callee {
                CALL.to_string()
            } else {
                WILDCARD.to_string()
            }
        }
        NodeKind::Member => {
            if BUILTIN_MEMBERS.contains(&label) {
                label.to_string()
            } else if callee {
                CALL.to_string()
            } else {
                WILDCARD.to_string()
            }
        }
        NodeKind::StateVariable | NodeKind::Parameter | NodeKind::ModifierInvocation => WILDCARD.to_string(),
        NodeKind::Literal => {
            if label == "true" || label == "false" {
                label.to_string()
            } else if is_address_literal(label) {
                ADDR.to_string()
            } else {
                WILDCARD.to_string()
            }
        }
        NodeKind::TypeName => abstract_type(label),
        _ => label.to_string(),
    }
}

/// Elementary type names are kept; user-defined ones (contracts, structs, enums) become `*`.
fn abstract_type(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            let keep = word == "mapping" || word.starts_with(|c: char| c.is_ascii_digit()) || is_elementary_type(word);
            out.push_str(if keep { word } else { WILDCARD });
            word.clear();
        }
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn abstract_node(n: &LabeledNode, callee: bool) -> NormalizedNode {
    let label = abstract_label(n.kind, &n.label, callee);
    let children = n
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let is_callee = i == 0 && matches!(n.kind, NodeKind::Call | NodeKind::ValueCall);
            abstract_node(c, is_callee)
        })
        .collect();
    NormalizedNode { kind: n.kind, label, children }
}

pub fn normalize_tree(n: &LabeledNode) -> NormalizedNode {
    abstract_node(n, false)
}

pub fn normalize_function(path: &str, f: &FunctionDef, owner: &ContractDef) -> NormalizedAstSegment {
    let tree = function_tree(f, owner);
    let statement_spans =
        tree.children.iter().filter(|c| !c.kind.is_header()).filter_map(|c| c.span).collect();
    let root = normalize_tree(&tree);
    NormalizedAstSegment {
        origin: SegmentOrigin {
            path: path.to_string(),
            contract: owner.name.clone(),
            function: f.display_name().to_string(),
            span: f.span,
        },
        node_count: root.size(),
        root,
        statement_spans,
    }
}

/// Stable content hash of a normalized tree (origin metadata excluded).
pub fn tree_fingerprint(root: &NormalizedNode) -> String {
    let mut h = Sha256::new();
    fn feed(n: &NormalizedNode, h: &mut Sha256) {
        h.update(n.kind.as_str().as_bytes());
        h.update([0u8]);
        h.update(n.label.as_bytes());
        h.update([0u8]);
        h.update((n.children.len() as u32).to_le_bytes());
        for c in &n.children {
            feed(c, h);
        }
    }
    feed(root, &mut h);
    hex::encode(h.finalize())
}

pub fn segment_fingerprint(s: &NormalizedAstSegment) -> String {
    tree_fingerprint(&s.root)
}
