//! Small dense symmetric eigenproblems and minimum-norm least squares.

use crate::real::Real;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen<T: Real>(a: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .fold(T::zero(), |s, (i, j)| s + m[i][j] * m[i][j]);
        let diag: T = (0..n).fold(T::zero(), |s, i| s + m[i][i] * m[i][i]);
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Minimum-norm solution of `min |y - X b|` through the pseudo-inverse of
/// `X^T X`. Eigenvalues below `rel_cut * max eigenvalue` are treated as zero.
pub fn min_norm_least_squares<T: Real>(x: &[Vec<T>], y: &[T], rel_cut: T) -> Vec<T> {
    let p = x.first().map_or(0, |r| r.len());
    let mut gram = vec![vec![T::zero(); p]; p];
    let mut xty = vec![T::zero(); p];
    for (row, yi) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] = xty[i] + row[i] * *yi;
            for j in 0..p {
                gram[i][j] = gram[i][j] + row[i] * row[j];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&gram);
    let top = vals.iter().fold(T::zero(), |a, b| a.max(b.abs()));
    let mut beta = vec![T::zero(); p];
    for k in 0..p {
        if vals[k] <= rel_cut * top {
            continue;
        }
        let proj = (0..p).fold(T::zero(), |s, i| s + vecs[i][k] * xty[i]) / vals[k];
        for i in 0..p {
            beta[i] = beta[i] + proj * vecs[i][k];
        }
    }
    beta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = vec![
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.5],
            vec![-2.0, 0.5, 3.0],
        ];
        let (vals, v) = symmetric_eigen(&a);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| v[i][k] * vals[k] * v[j][k]).sum();
                assert!((r - a[i][j]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_with_duplicate_column() {
        // y = 2 a; with a duplicated the minimum-norm split is (1, 1).
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 - 2.5, i as f64 - 2.5]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let b = min_norm_least_squares(&x, &y, 1e-10);
        assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] - 1.0).abs() < 1e-10, "{b:?}");
    }
}
