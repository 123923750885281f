//! Minimum-cost assignment (Kuhn–Munkres with potentials, O(n²m)).

/// Optimal assignment of `min(n, m)` rows to columns of a rectangular cost
/// matrix. Returns `(row, col)` pairs sorted by row and the total cost.
///
/// Panics if the rows have different lengths or a cost is not finite.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    assert!(cost.iter().flatten().all(|c| c.is_finite()), "non-finite cost");
    if m == 0 {
        return (Vec::new(), 0.0);
    }
    let mut pairs = if n <= m {
        solve(n, m, |i, j| cost[i][j])
    } else {
        solve(m, n, |i, j| cost[j][i]).into_iter().map(|(c, r)| (r, c)).collect()
    };
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    (pairs, total)
}

// Requires n ≤ m. Arrays are 1-based with column 0 as the virtual root.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect()
}
