//! Small dense linear algebra helpers for normal-equation solves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Solve the symmetric positive semidefinite system `m x = b` by Cholesky
/// factorization, dropping dependent columns.
///
/// Returns the solution (zeros in dropped coordinates) and the indices of
/// dropped columns.
pub fn solve_sym_dropping(m: &Array2<f64>, b: &Array1<f64>) -> (Array1<f64>, Vec<usize>) {
    let p = m.nrows();
    assert_eq!(m.ncols(), p);
    assert_eq!(b.len(), p);
    let max_diag = (0..p).map(|j| m[[j, j]].abs()).fold(0.0f64, f64::max).max(1e-300);
    let tol = max_diag * 1e-10;

    // Cholesky with column skipping: l is lower triangular over kept columns.
    let mut l = Array2::<f64>::zeros((p, p));
    let mut dropped = Vec::new();
    let mut kept = vec![true; p];
    for j in 0..p {
        let mut d = m[[j, j]];
        for k in 0..j {
            if kept[k] {
                d -= l[[j, k]] * l[[j, k]];
            }
        }
        if d <= tol {
            kept[j] = false;
            dropped.push(j);
            continue;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..p {
            let mut s = m[[i, j]];
            for k in 0..j {
                if kept[k] {
                    s -= l[[i, k]] * l[[j, k]];
                }
            }
            l[[i, j]] = s / dj;
        }
    }

    // Forward solve L z = b, then backward solve L' x = z over kept columns.
    let mut z = Array1::<f64>::zeros(p);
    for i in 0..p {
        if !kept[i] {
            continue;
        }
        let mut s = b[i];
        for k in 0..i {
            if kept[k] {
                s -= l[[i, k]] * z[k];
            }
        }
        z[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        if !kept[i] {
            continue;
        }
        let mut s = z[i];
        for k in (i + 1)..p {
            if kept[k] {
                s -= l[[k, i]] * x[k];
            }
        }
        x[i] = s / l[[i, i]];
    }
    (x, dropped)
}

/// x' M y for a dense square matrix.
pub fn quad_form(x: ArrayView1<f64>, m: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let mut row = 0.0;
        for j in 0..y.len() {
            row += m[[i, j]] * y[j];
        }
        acc += x[i] * row;
    }
    acc
}

/// Invert a small symmetric matrix via Gauss-Jordan with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn invert(m: &Array2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    let scale = (0..n)
        .map(|i| (0..n).map(|j| a[[i, j]].abs()).fold(0.0f64, f64::max))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[[r, col]].abs() > a[[piv, col]].abs() {
                piv = r;
            }
        }
        if a[[piv, col]].abs() <= scale * 1e-12 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap([piv, j], [col, j]);
                inv.swap([piv, j], [col, j]);
            }
        }
        let d = a[[col, col]];
        for j in 0..n {
            a[[col, j]] /= d;
            inv[[col, j]] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[[r, col]];
                if f != 0.0 {
                    for j in 0..n {
                        a[[r, j]] -= f * a[[col, j]];
                        inv[[r, j]] -= f * inv[[col, j]];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix via eigendecomposition
/// by the Jacobi rotation method. Also returns the numerical rank.
pub fn pinv_sym(m: &Array2<f64>) -> (Array2<f64>, usize) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    // Jacobi sweeps
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off < 1e-28 {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if a[[i, j]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[j, j]] - a[[i, i]]) / (2.0 * a[[i, j]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let aik = a[[i, k]];
                    let ajk = a[[j, k]];
                    a[[i, k]] = c * aik - s * ajk;
                    a[[j, k]] = s * aik + c * ajk;
                }
                for k in 0..n {
                    let aki = a[[k, i]];
                    let akj = a[[k, j]];
                    a[[k, i]] = c * aki - s * akj;
                    a[[k, j]] = s * aki + c * akj;
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
    }
    let eigs: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    let max_eig = eigs.iter().cloned().fold(0.0f64, |m, e| m.max(e.abs())).max(1e-300);
    let tol = max_eig * 1e-10;
    let mut rank = 0;
    let mut pinv = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        if eigs[k].abs() > tol {
            rank += 1;
            let inv_e = 1.0 / eigs[k];
            for i in 0..n {
                for j in 0..n {
                    pinv[[i, j]] += v[[i, k]] * inv_e * v[[j, k]];
                }
            }
        }
    }
    (pinv, rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_full_rank_system() {
        let m = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let (x, dropped) = solve_sym_dropping(&m, &b);
        assert!(dropped.is_empty());
        // Solve by hand: det 11, x = (1/11)(3*1 - 1*2, 4*2 - 1*1) = (1/11, 7/11)
        assert_abs_diff_eq!(x[0], 1.0 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 7.0 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn drops_dependent_column() {
        // Second column is a copy of the first.
        let m = array![[2.0, 2.0], [2.0, 2.0]];
        let b = array![2.0, 2.0];
        let (x, dropped) = solve_sym_dropping(&m, &b);
        assert_eq!(dropped, vec![1]);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn inverse_and_pinv_agree_on_nonsingular() {
        let m = array![[3.0, 1.0, 0.5], [1.0, 2.0, 0.2], [0.5, 0.2, 1.5]];
        let inv = invert(&m).unwrap();
        let (pinv, rank) = pinv_sym(&m);
        assert_eq!(rank, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(inv[[i, j]], pinv[[i, j]], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn pinv_handles_singular() {
        let m = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(invert(&m).is_none());
        let (pinv, rank) = pinv_sym(&m);
        assert_eq!(rank, 1);
        // pinv of rank-1 [[1,1],[1,1]] is the same matrix scaled by 1/4
        assert_abs_diff_eq!(pinv[[0, 0]], 0.25, epsilon = 1e-10);
    }
}
