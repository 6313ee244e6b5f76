//! Word-level edit distance, longest common prefix, and minimum-WER
//! re-segmentation of an unsegmented hypothesis against reference segments.

use crate::error::{Error, Result};

const INF: usize = usize::MAX / 4;

/// Unit-cost token edit distance.
pub fn levenshtein<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Length of the longest common prefix.
pub fn lcp_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Cut positions splitting a hypothesis into one piece per reference segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    /// `refs.len() - 1` non-decreasing cut indices into the hypothesis.
    pub boundaries: Vec<usize>,
    pub total_edit_distance: usize,
}

impl Segmentation {
    /// Half-open hypothesis ranges, one per reference segment.
    pub fn ranges(&self, hyp_len: usize) -> Vec<(usize, usize)> {
        let mut starts = vec![0];
        starts.extend(&self.boundaries);
        let mut ends = self.boundaries.clone();
        ends.push(hyp_len);
        starts.into_iter().zip(ends).collect()
    }

    pub fn split<'a, S>(&self, hyp: &'a [S]) -> Vec<&'a [S]> {
        self.ranges(hyp.len()).into_iter().map(|(s, e)| &hyp[s..e]).collect()
    }
}

/// `costs[k][i]`: minimum summed edit distance of aligning `hyp[..i]` with
/// the first `k` references, with cuts only at reference boundaries.
fn prefix_costs<S: PartialEq>(hyp: &[S], refs: &[&[S]]) -> Vec<Vec<usize>> {
    let n = hyp.len();
    let mut costs = Vec::with_capacity(refs.len() + 1);
    let mut entry: Vec<usize> = (0..=n).map(|i| if i == 0 { 0 } else { INF }).collect();
    costs.push(entry.clone());
    for r in refs {
        // Column-wise DP over the reference tokens; `col[i]` holds the cost
        // with the current segment covering `r[..m]` and the hypothesis `hyp[..i]`.
        let mut col = vec![INF; n + 1];
        col[0] = entry[0];
        for i in 1..=n {
            col[i] = entry[i].min(col[i - 1].saturating_add(1));
        }
        for tok in r.iter() {
            let mut next = vec![INF; n + 1];
            next[0] = col[0].saturating_add(1);
            for i in 1..=n {
                let sub = col[i - 1].saturating_add(usize::from(hyp[i - 1] != *tok));
                next[i] = sub.min(col[i].saturating_add(1)).min(next[i - 1].saturating_add(1));
            }
            col = next;
        }
        entry = col;
        costs.push(entry.clone());
    }
    costs
}

/// Edit distance of `r` against every extension `hyp[start..c]`, indexed by `c - start`.
fn distances_from<S: PartialEq>(hyp: &[S], start: usize, r: &[S]) -> Vec<usize> {
    let tail = &hyp[start..];
    let mut col: Vec<usize> = (0..=tail.len()).collect();
    for tok in r {
        let mut next = vec![0; tail.len() + 1];
        next[0] = col[0] + 1;
        for i in 1..=tail.len() {
            let sub = col[i - 1] + usize::from(tail[i - 1] != *tok);
            next[i] = sub.min(col[i] + 1).min(next[i - 1] + 1);
        }
        col = next;
    }
    col
}

/// Splits `hyp` into `refs.len()` contiguous (possibly empty) pieces minimizing
/// the summed word edit distance to the paired references.
///
/// Among optimal segmentations the lexicographically smallest boundary vector
/// is returned. Runs in `O(|hyp| * Σ|ref|)` time.
pub fn mwer_segment<S: PartialEq, R: AsRef<[S]>>(hyp: &[S], refs: &[R]) -> Result<Segmentation> {
    if refs.is_empty() {
        return Err(Error::InvalidReference("no reference segments to align against".into()));
    }
    let refs: Vec<&[S]> = refs.iter().map(AsRef::as_ref).collect();
    let n = hyp.len();
    let k = refs.len();

    // Suffix costs from the reversed problem: suffix[m][c] is the best cost of
    // aligning hyp[c..] to refs[m..].
    let rev_hyp: Vec<&S> = hyp.iter().rev().collect();
    let rev_refs_owned: Vec<Vec<&S>> = refs.iter().rev().map(|r| r.iter().rev().collect()).collect();
    let rev_refs: Vec<&[&S]> = rev_refs_owned.iter().map(Vec::as_slice).collect();
    let rev = prefix_costs(&rev_hyp, &rev_refs);
    let suffix = |m: usize, c: usize| rev[k - m][n - c];

    let total = suffix(0, 0);
    let mut remaining = total;
    let mut start = 0;
    let mut boundaries = Vec::with_capacity(k - 1);
    for (m, r) in refs.iter().enumerate().take(k - 1) {
        let dists = distances_from(hyp, start, r);
        let cut = (start..=n)
            .find(|&c| {
                let rest = suffix(m + 1, c);
                rest < INF && dists[c - start] + rest == remaining
            })
            .expect("an optimal continuation always exists");
        remaining -= dists[cut - start];
        boundaries.push(cut);
        start = cut;
    }
    debug_assert_eq!(remaining, levenshtein(&hyp[start..], refs[k - 1]));
    Ok(Segmentation {
        boundaries,
        total_edit_distance: total,
    })
}
