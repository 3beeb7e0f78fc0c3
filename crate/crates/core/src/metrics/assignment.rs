//! Minimum-cost rectangular assignment (shortest augmenting path Hungarian).
//!
//! Entries equal to `f64::INFINITY` mark forbidden pairs.

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs, one per row of the smaller dimension, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Solves the rectangular problem on a row-major `rows x cols` matrix with
/// `rows <= cols`. Returns the column chosen for every row, or `None` if no
/// finite-cost assignment exists.
pub fn solve_rows(cost: &[f64], rows: usize, cols: usize) -> Option<Vec<usize>> {
    assert!(rows <= cols, "solve_rows needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Some(Vec::new());
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    // p[j]: row (1-based) matched to column j; p[0] is the row being inserted.
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![inf; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * cols..i0 * cols];
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let c = row[j - 1];
                if c.is_finite() {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=cols {
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

    let mut col_of_row = vec![0usize; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    Some(col_of_row)
}

/// Minimum-cost injective assignment of `min(n, m)` pairs for an `n x m`
/// matrix given as rows. `None` when every complete assignment uses a
/// forbidden (infinite) entry.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> Option<Assignment> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return Some(Assignment {
            pairs: Vec::new(),
            total: 0.0,
        });
    }
    let mut pairs: Vec<(usize, usize)> = if n <= m {
        let flat: Vec<f64> = cost.iter().flatten().copied().collect();
        solve_rows(&flat, n, m)?.into_iter().enumerate().collect()
    } else {
        let flat: Vec<f64> = (0..m)
            .flat_map(|j| cost.iter().map(move |r| r[j]))
            .collect();
        solve_rows(&flat, m, n)?
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect()
    };
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Some(Assignment { pairs, total })
}
