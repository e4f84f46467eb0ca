//! Longest common subsequence helpers shared by alignment and matching.

/// Length table over suffixes: `t[i][j]` = LCS length of `a[i..]` and `b[j..]`.
fn suffix_table<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Vec<u32>> {
    let (n, m) = (a.len(), b.len());
    let mut t = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            t[i][j] = if a[i] == b[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    t
}

/// Index pairs of one maximal common subsequence, leftmost-first.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let t = suffix_table(a, b);
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(t[0][0] as usize);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if t[i + 1][j] >= t[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // two-row variant; the full table is only needed for recovery
    let m = b.len();
    let mut prev = vec![0u32; m + 1];
    let mut cur = vec![0u32; m + 1];
    for x in a {
        for j in 0..m {
            cur[j + 1] = if *x == b[j] { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m] as usize
}

/// Positions in `b` of the leftmost embedding of `a`, if `a` is a subsequence of `b`.
pub fn embed<T: PartialEq>(a: &[T], b: &[T]) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] != *x {
            j += 1;
        }
        if j == b.len() {
            return None;
        }
        out.push(j);
        j += 1;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_form_common_subsequence() {
        let a: Vec<char> = "ABCBDAB".chars().collect();
        let b: Vec<char> = "BDCABA".chars().collect();
        let p = lcs_pairs(&a, &b);
        assert_eq!(p.len(), 4);
        assert_eq!(lcs_len(&a, &b), 4);
        assert!(p.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert!(p.iter().all(|&(i, j)| a[i] == b[j]));
    }

    #[test]
    fn embedding() {
        assert_eq!(embed(&[1, 3], &[1, 2, 3]), Some(vec![0, 2]));
        assert_eq!(embed(&[3, 1], &[1, 2, 3]), None);
        assert_eq!(embed::<i32>(&[], &[]), Some(vec![]));
    }
}
