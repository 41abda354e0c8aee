//! Minimum edit script between a reconstructed token sequence and the input.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    /// `reference[pos]` was replaced.
    Substitute { pos: usize },
    /// An extra token appears before `reference[pos]` (or at the end when
    /// `pos == reference.len()`).
    Insert { pos: usize },
    /// `reference[pos]` is missing.
    Delete { pos: usize },
}

/// Levenshtein edit script turning `reference` into `generated`, with unit
/// costs for substitution, insertion and deletion. Matches are omitted.
///
/// Common prefixes and suffixes are peeled off first so the quadratic table
/// only covers the differing middle.
pub fn edit_script<A, B>(generated: &[A], reference: &[B]) -> Vec<Edit>
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    let eq = |g: &A, r: &B| g.as_ref() == r.as_ref();
    let mut lo = 0;
    while lo < generated.len() && lo < reference.len() && eq(&generated[lo], &reference[lo]) {
        lo += 1;
    }
    let (mut g_hi, mut r_hi) = (generated.len(), reference.len());
    while g_hi > lo && r_hi > lo && eq(&generated[g_hi - 1], &reference[r_hi - 1]) {
        g_hi -= 1;
        r_hi -= 1;
    }
    let g = &generated[lo..g_hi];
    let r = &reference[lo..r_hi];
    let (n, m) = (g.len(), r.len());
    if n == 0 {
        return (0..m).map(|i| Edit::Delete { pos: lo + i }).collect();
    }
    if m == 0 {
        return (0..n).map(|_| Edit::Insert { pos: lo }).collect();
    }

    if (n + 1).saturating_mul(m + 1) > MAX_TABLE {
        return coarse_script(lo, n, m);
    }

    // dist[i][j]: cost of turning r[..j] into g[..i]
    let width = m + 1;
    let mut dist = vec![0u32; (n + 1) * width];
    for (j, d) in dist[..width].iter_mut().enumerate() {
        *d = j as u32;
    }
    for i in 1..=n {
        dist[i * width] = i as u32;
        for j in 1..=m {
            let sub = dist[(i - 1) * width + j - 1] + u32::from(!eq(&g[i - 1], &r[j - 1]));
            let ins = dist[(i - 1) * width + j] + 1;
            let del = dist[i * width + j - 1] + 1;
            dist[i * width + j] = sub.min(ins).min(del);
        }
    }

    let mut edits = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let same = eq(&g[i - 1], &r[j - 1]);
            let diag = dist[(i - 1) * width + j - 1];
            if here == diag + u32::from(!same) {
                if !same {
                    edits.push(Edit::Substitute { pos: lo + j - 1 });
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == dist[i * width + j - 1] + 1 {
            edits.push(Edit::Delete { pos: lo + j - 1 });
            j -= 1;
        } else {
            edits.push(Edit::Insert { pos: lo + j });
            i -= 1;
        }
    }
    edits.reverse();
    edits
}

const MAX_TABLE: usize = 1 << 24;

/// Positional fallback for pathologically long inputs: pairwise
/// substitutions, then the length difference as trailing inserts/deletes.
fn coarse_script(lo: usize, n: usize, m: usize) -> Vec<Edit> {
    let common = n.min(m);
    let mut edits: Vec<Edit> = (0..common)
        .map(|i| Edit::Substitute { pos: lo + i })
        .collect();
    edits.extend((common..m).map(|j| Edit::Delete { pos: lo + j }));
    edits.extend((common..n).map(|_| Edit::Insert { pos: lo + m }));
    edits
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_sequences_need_no_edits() {
        let a = words("Add Kent James");
        assert!(edit_script(&a, &a).is_empty());
        assert!(edit_script::<&str, &str>(&[], &[]).is_empty());
    }

    #[test]
    fn single_edits() {
        let reference = words("Add Kent James to the Disney soundtrack");
        let sub = words("Add Kent Jackson to the Disney soundtrack");
        assert_eq!(
            edit_script(&sub, &reference),
            vec![Edit::Substitute { pos: 2 }]
        );
        let del = words("Add Kent James to the soundtrack");
        assert_eq!(edit_script(&del, &reference), vec![Edit::Delete { pos: 5 }]);
        let ins = words("Add Kent James to the Walt Disney soundtrack");
        assert_eq!(edit_script(&ins, &reference), vec![Edit::Insert { pos: 5 }]);
        let tail = words("Add Kent James to the Disney soundtrack now");
        assert_eq!(
            edit_script(&tail, &reference),
            vec![Edit::Insert { pos: 7 }]
        );
    }

    #[test]
    fn repeated_tokens() {
        let reference = words("a a a");
        assert_eq!(edit_script(&words("a a"), &reference).len(), 1);
        assert_eq!(edit_script(&words("a a a a"), &reference).len(), 1);
    }

    #[test]
    fn empty_sides() {
        let reference = words("x y");
        assert_eq!(
            edit_script::<&str, &str>(&[], &reference),
            vec![Edit::Delete { pos: 0 }, Edit::Delete { pos: 1 }]
        );
        assert_eq!(
            edit_script::<&str, &str>(&reference, &[]),
            vec![Edit::Insert { pos: 0 }, Edit::Insert { pos: 0 }]
        );
    }

    #[test]
    fn script_length_is_edit_distance() {
        let a = words("kitten sat on the mat");
        let b = words("sitting cat sat on mat");
        // kitten->sitting, missing "cat", extra "the"
        assert_eq!(edit_script(&a, &b).len(), 3);
    }
}
