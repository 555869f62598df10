//! Classic dynamic time warping over Euclidean position distance.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::Vec3;

/// Monotone boundary-to-boundary warping path and its accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    /// Index pairs `(i, j)` from `(0, 0)` to `(n-1, m-1)`.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Minimum-cost warping path with steps `(1,0)`, `(0,1)`, `(1,1)`.
///
/// Backtracking prefers the diagonal predecessor on ties, then `(i-1, j)`,
/// then `(i, j-1)`. Returns `None` if either sequence is empty.
pub fn dtw_path(a: &[Vec3], b: &[Vec3]) -> Option<WarpPath> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return None;
    }
    let idx = |i: usize, j: usize| i * m + j;
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = a[i].distance(b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[idx(i - 1, j - 1)]);
                }
                if i > 0 {
                    best = best.min(acc[idx(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(acc[idx(i, j - 1)]);
                }
                best
            };
            acc[idx(i, j)] = best + d;
        }
    }

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    pairs.push((i, j));
    while i > 0 || j > 0 {
        let (pi, pj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[idx(i - 1, j - 1)];
            let up = acc[idx(i - 1, j)];
            let left = acc[idx(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        i = pi;
        j = pj;
        pairs.push((i, j));
    }
    pairs.reverse();
    Some(WarpPath {
        pairs,
        cost: acc[idx(n - 1, m - 1)],
    })
}
