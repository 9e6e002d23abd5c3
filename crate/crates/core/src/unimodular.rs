//! Integer constraint matrices of the two relaxed subproblems and an exact
//! determinant, for total-unimodularity spot checks.

use crate::instance::Instance;

/// Exact determinant of a square integer matrix (fraction-free Bareiss).
///
/// # Panics
/// If the matrix is not square.
pub fn determinant(matrix: &[Vec<i64>]) -> i128 {
    let n = matrix.len();
    assert!(matrix.iter().all(|r| r.len() == n), "matrix must be square");
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = matrix.iter().map(|r| r.iter().map(|&x| i128::from(x)).collect()).collect();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Rows of the LR1 subproblem over columns `z[i][t]` (i-major) then
/// `zp[i][t]`: the period-capacity rows, then the upper and lower
/// operating-level rows, each written as the cumulative open/close sum.
pub fn lr1_matrix(inst: &Instance) -> Vec<Vec<i64>> {
    let (m, tt) = (inst.locations, inst.periods);
    let zc = |i: usize, t: usize| i * tt + t;
    let zpc = |i: usize, t: usize| m * tt + i * (tt - 1) + t;
    let width = m * tt + m * (tt - 1);
    let level = |row: &mut Vec<i64>, i: usize, t: usize| {
        for tau in 0..=t {
            row[zc(i, tau)] += 1;
        }
        for tau in 0..t {
            row[zpc(i, tau)] -= 1;
        }
    };
    let mut rows = Vec::new();
    for t in 0..tt {
        let mut row = vec![0; width];
        for i in 0..m {
            level(&mut row, i, t);
        }
        rows.push(row);
    }
    for _bound in 0..2 {
        for i in 0..m {
            for t in 0..tt {
                let mut row = vec![0; width];
                level(&mut row, i, t);
                rows.push(row);
            }
        }
    }
    rows
}

/// Linking rows of one LR2 cell over columns `w_1..w_K` then `v_1..v_K'`:
/// `w1 + v1`, `wk - w1`, `vk - v1`.
pub fn lr2_cell_matrix(surplus_levels: usize, shortage_levels: usize) -> Vec<Vec<i64>> {
    let width = surplus_levels + shortage_levels;
    let mut rows = Vec::new();
    if surplus_levels > 0 && shortage_levels > 0 {
        let mut row = vec![0; width];
        row[0] = 1;
        row[surplus_levels] = 1;
        rows.push(row);
    }
    for (first, len) in [(0, surplus_levels), (surplus_levels, shortage_levels)] {
        for k in 1..len {
            let mut row = vec![0; width];
            row[first + k] = 1;
            row[first] = -1;
            rows.push(row);
        }
    }
    rows
}

/// The submatrix on the given row and column indices.
pub fn submatrix(matrix: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> Vec<Vec<i64>> {
    rows.iter().map(|&r| cols.iter().map(|&c| matrix[r][c]).collect()).collect()
}
