//! Pairwise tree distances and complete-linkage agglomerative clustering.

use crate::normalize::NormalizedAstSegment;
use crate::ted::tree_edit_distance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("distance matrix is not square: {0} labels, {1} rows")]
    Shape(usize, usize),
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance matrix has non-zero diagonal at {0}")]
    Diagonal(usize),
    #[error("duplicate segment id {0}")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<u32>>,
}

impl DistanceMatrix {
    #[allow(clippy::needless_range_loop)]
    pub fn new(labels: Vec<String>, distances: Vec<Vec<u32>>) -> Result<Self, MatrixError> {
        let n = labels.len();
        if distances.len() != n || distances.iter().any(|r| r.len() != n) {
            return Err(MatrixError::Shape(n, distances.len()));
        }
        for i in 0..n {
            if distances[i][i] != 0 {
                return Err(MatrixError::Diagonal(i));
            }
            for j in 0..i {
                if distances[i][j] != distances[j][i] {
                    return Err(MatrixError::Asymmetric(i, j));
                }
            }
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MatrixError::DuplicateLabel(w[0].clone()));
        }
        Ok(DistanceMatrix { labels, distances })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.distances[i][j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Distance between two segments by id.
    pub fn between(&self, a: &str, b: &str) -> Option<u32> {
        Some(self.distances[self.index_of(a)?][self.index_of(b)?])
    }
}

/// Tree edit distance between every pair of segments. Pairs are computed in parallel.
pub fn pairwise_distances(segs: &[NormalizedAstSegment]) -> Result<DistanceMatrix, MatrixError> {
    let n = segs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<u32> = pairs.par_iter().map(|&(i, j)| tree_edit_distance(&segs[i].root, &segs[j].root)).collect();
    let mut d = vec![vec![0u32; n]; n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[i][j] = v;
        d[j][i] = v;
    }
    DistanceMatrix::new(segs.iter().map(|s| s.id()).collect(), d)
}

/// One agglomeration step: clusters `left` and `right` (by node id) merged at `height`.
/// Leaves are nodes `0..n`; the k-th merge creates node `n + k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Complete-linkage agglomeration of the whole matrix. Among equally distant pairs the one
/// whose (smaller, larger) minimum member labels is lexicographically smallest merges
/// first, which makes the result independent of input order.
pub fn dendrogram(dm: &DistanceMatrix) -> Dendrogram {
    let n = dm.len();
    // active clusters: (node id, members)
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    let min_label = |members: &Vec<usize>| members.iter().map(|&m| dm.labels[m].as_str()).min().unwrap();
    while active.len() > 1 {
        let mut best: Option<(u32, (&str, &str), usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let h = active[a]
                    .1
                    .iter()
                    .flat_map(|&x| active[b].1.iter().map(move |&y| (x, y)))
                    .map(|(x, y)| dm.get(x, y))
                    .max()
                    .unwrap();
                let (la, lb) = (min_label(&active[a].1), min_label(&active[b].1));
                let key = if la <= lb { (la, lb) } else { (lb, la) };
                let better = match &best {
                    None => true,
                    Some((bh, bk, _, _)) => h < *bh || (h == *bh && key < *bk),
                };
                if better {
                    best = Some((h, key, a, b));
                }
            }
        }
        let (h, _, a, b) = best.unwrap();
        let (id_b, mem_b) = active.remove(b);
        let (id_a, mut mem_a) = active.remove(a);
        mem_a.extend(mem_b);
        merges.push(Merge { left: id_a, right: id_b, height: h });
        active.push((n + merges.len() - 1, mem_a));
    }
    Dendrogram { labels: dm.labels.clone(), merges }
}

/// Cut the complete-linkage dendrogram at `height_cutoff`: merges with height at most the
/// cutoff are applied. Clusters are returned as sorted label lists, ordered by first label.
pub fn cluster(dm: &DistanceMatrix, height_cutoff: u32) -> Vec<Vec<String>> {
    let tree = dendrogram(dm);
    let n = dm.len();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut alive: Vec<bool> = vec![true; n];
    for m in &tree.merges {
        // complete linkage heights are monotone, so stopping at the first tall merge is exact
        if m.height > height_cutoff {
            break;
        }
        let mut merged = members[m.left].clone();
        merged.extend(members[m.right].iter().copied());
        alive[m.left] = false;
        alive[m.right] = false;
        members.push(merged);
        alive.push(true);
    }
    let mut out: Vec<Vec<String>> = members
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(m, _)| {
            let mut ls: Vec<String> = m.iter().map(|&i| dm.labels[i].clone()).collect();
            ls.sort();
            ls
        })
        .collect();
    out.sort();
    out
}
