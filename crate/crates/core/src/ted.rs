//! Ordered tree edit distance (Zhang-Shasha, unit costs).

use crate::normalize::NormalizedNode;

struct Postorder<'a> {
    nodes: Vec<&'a NormalizedNode>,
    /// Postorder index of the leftmost leaf descendant of each node.
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

fn postorder(root: &NormalizedNode) -> Postorder<'_> {
    fn go<'a>(n: &'a NormalizedNode, nodes: &mut Vec<&'a NormalizedNode>, lml: &mut Vec<usize>) -> usize {
        let mut first = None;
        for c in &n.children {
            let l = go(c, nodes, lml);
            first.get_or_insert(l);
        }
        let idx = nodes.len();
        nodes.push(n);
        let l = first.unwrap_or(idx);
        lml.push(l);
        l
    }
    let mut nodes = Vec::new();
    let mut lml = Vec::new();
    go(root, &mut nodes, &mut lml);
    // keyroots: for each distinct leftmost leaf, the highest node having it
    let mut keyroots = Vec::new();
    for i in 0..nodes.len() {
        if !(i + 1..nodes.len()).any(|j| lml[j] == lml[i]) {
            keyroots.push(i);
        }
    }
    Postorder { nodes, lml, keyroots }
}

fn same(a: &NormalizedNode, b: &NormalizedNode) -> bool {
    a.kind == b.kind && a.label == b.label
}

/// Minimum number of node insertions, deletions and relabelings turning `a` into `b`.
/// A node matches another only if both kind and label agree.
#[allow(clippy::needless_range_loop)]
pub fn tree_edit_distance(a: &NormalizedNode, b: &NormalizedNode) -> u32 {
    let ta = postorder(a);
    let tb = postorder(b);
    let (n, m) = (ta.nodes.len(), tb.nodes.len());
    let mut td = vec![vec![0u32; m]; n];
    let mut fd = vec![vec![0u32; m + 1]; n + 1];
    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.lml[i], tb.lml[j]);
            // forest distance table indexed relative to (li-1, lj-1)
            fd[0][0] = 0;
            for x in li..=i {
                fd[x - li + 1][0] = fd[x - li][0] + 1;
            }
            for y in lj..=j {
                fd[0][y - lj + 1] = fd[0][y - lj] + 1;
            }
            for x in li..=i {
                for y in lj..=j {
                    let (fx, fy) = (x - li + 1, y - lj + 1);
                    let del = fd[fx - 1][fy] + 1;
                    let ins = fd[fx][fy - 1] + 1;
                    if ta.lml[x] == li && tb.lml[y] == lj {
                        let rel = fd[fx - 1][fy - 1] + u32::from(!same(ta.nodes[x], tb.nodes[y]));
                        let v = del.min(ins).min(rel);
                        fd[fx][fy] = v;
                        td[x][y] = v;
                    } else {
                        let (px, py) = (ta.lml[x] - li, tb.lml[y] - lj);
                        let v = del.min(ins).min(fd[px][py] + td[x][y]);
                        fd[fx][fy] = v;
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}
