//! Control-flow graphs with IR instructions, and their flattening into IR sequences.

mod build;
pub mod ir;

pub use build::{build_cfg, function_cfg, modifier_cfg, tree_cfg, CfgError};
pub use ir::{Builtin, IrInstruction, KeyKind, MoneyVia, Opcode, Operand};

use crate::frontend::Span;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Entry,
    Exit,
    RevertSink,
    Statement,
    LoopHeader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgNode {
    pub id: usize,
    pub role: NodeRole,
    pub instrs: Vec<IrInstruction>,
    pub span: Option<Span>,
    /// Header ids of the loops enclosing this node, outermost first.
    pub loops: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Seq,
    True,
    False,
    LoopBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub origin: String,
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<Edge>,
    pub entry: usize,
    pub exit: Option<usize>,
    pub revert_sink: Option<usize>,
}

impl Cfg {
    /// Successor ids of `n` in ascending order, optionally ignoring loop-back edges.
    pub fn successors(&self, n: usize, with_back_edges: bool) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.from == n && (with_back_edges || e.kind != EdgeKind::LoopBack))
            .map(|e| e.to)
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn predecessors(&self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = self.edges.iter().filter(|e| e.to == n).map(|e| e.from).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn instruction_count(&self) -> usize {
        self.nodes.iter().map(|n| n.instrs.len()).sum()
    }

    /// Dominator sets: `dom[n][m]` is true when `m` dominates `n`. Unreachable nodes are
    /// dominated by everything.
    pub fn dominators(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut dom = vec![vec![true; n]; n];
        dom[self.entry] = vec![false; n];
        dom[self.entry][self.entry] = true;
        let preds: Vec<Vec<usize>> = (0..n).map(|i| self.predecessors(i)).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..n {
                if v == self.entry {
                    continue;
                }
                let mut new = vec![true; n];
                for &p in &preds[v] {
                    for (k, slot) in new.iter_mut().enumerate() {
                        *slot = *slot && dom[p][k];
                    }
                }
                new[v] = true;
                if new != dom[v] {
                    dom[v] = new;
                    changed = true;
                }
            }
        }
        dom
    }

    /// Replace every instruction by its placeholder form.
    pub fn normalized(&self) -> Cfg {
        let mut c = self.clone();
        for n in &mut c.nodes {
            for i in &mut n.instrs {
                *i = i.normalized();
            }
        }
        c
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", self.origin.replace('"', "'"));
        let _ = writeln!(s, "  node [shape=box, fontname=monospace];");
        for n in &self.nodes {
            let mut label = match n.role {
                NodeRole::Entry => "ENTRY".to_string(),
                NodeRole::Exit => "EXIT".to_string(),
                NodeRole::RevertSink => "REVERT".to_string(),
                _ => String::new(),
            };
            for i in &n.instrs {
                if !label.is_empty() {
                    label.push_str("\\l");
                }
                label.push_str(&i.to_string().replace('"', "\\\""));
            }
            let _ = writeln!(s, "  n{} [label=\"{}: {}\\l\"];", n.id, n.id, label);
        }
        for e in &self.edges {
            let kind = match e.kind {
                EdgeKind::Seq => "seq",
                EdgeKind::True => "true",
                EdgeKind::False => "false",
                EdgeKind::LoopBack => "loop-back",
            };
            let style = if e.kind == EdgeKind::LoopBack { ", style=dashed" } else { "" };
            let _ = writeln!(s, "  n{} -> n{} [label=\"{}\"{}];", e.from, e.to, kind, style);
        }
        s.push_str("}\n");
        s
    }
}

/// Loop-free, BFS-ordered instruction list of a CFG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrSequence {
    pub origin: String,
    pub items: Vec<IrInstruction>,
    /// CFG node id of each item.
    #[serde(skip)]
    pub nodes: Vec<usize>,
}

impl IrSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn keys(&self) -> Vec<String> {
        self.items.iter().map(|i| i.key()).collect()
    }

    pub fn normalized(&self) -> IrSequence {
        IrSequence {
            origin: self.origin.clone(),
            items: self.items.iter().map(|i| i.normalized()).collect(),
            nodes: self.nodes.clone(),
        }
    }
}

/// Node visit order used by [`flatten`]: BFS from the entry with loop-back edges removed,
/// successors taken in ascending id order.
pub fn bfs_order(cfg: &Cfg) -> Vec<usize> {
    let mut seen = vec![false; cfg.nodes.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([cfg.entry]);
    seen[cfg.entry] = true;
    while let Some(n) = queue.pop_front() {
        order.push(n);
        for s in cfg.successors(n, false) {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    order
}

pub fn flatten(cfg: &Cfg) -> IrSequence {
    let mut items = Vec::new();
    let mut nodes = Vec::new();
    for n in bfs_order(cfg) {
        for i in &cfg.nodes[n].instrs {
            items.push(i.clone());
            nodes.push(n);
        }
    }
    IrSequence { origin: cfg.origin.clone(), items, nodes }
}

pub fn normalize_ir(cfg: &Cfg) -> Cfg {
    cfg.normalized()
}
