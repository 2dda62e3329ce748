//! Minimum-cost assignment via shortest augmenting paths with potentials.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Solve a square assignment problem. Returns `perm` with `perm[row] = col`.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::shape(format!("{n}x{n}"), format!("{n}x{m}")));
    }
    solve_rectangular(cost)
}

/// Solve an `n x m` assignment with `n <= m`: every row gets a distinct column
/// and the summed cost is minimal. Returns the column chosen for each row.
///
/// O(n^2 m). Rows are inserted in order and columns scanned in ascending
/// index with strict comparisons, so the result is deterministic.
pub fn solve_rectangular(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n > m {
        return Err(Error::invalid(format!("more rows ({n}) than columns ({m})")));
    }
    if cost.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cost matrix contains NaN"));
    }
    if cost.iter().any(|v| v.is_infinite()) {
        return Err(Error::invalid("cost matrix contains infinite entries"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based arrays; index 0 is the virtual source column/row.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            perm[owner[j] - 1] = j - 1;
        }
    }
    Ok(perm)
}

/// Summed cost of an assignment, accumulated in row order.
pub fn assignment_cost(cost: &Array2<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
}
