//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Ratio between the smallest and largest eigenvalue of `a` after scaling it
/// to unit diagonal. Scale-free, so it flags collinearity regardless of the
/// units the columns are measured in. Returns 0 for a zero diagonal entry.
pub(crate) fn scaled_eigen_ratio(a: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    let mut d = DVector::zeros(m);
    for i in 0..m {
        let v = a[(i, i)];
        if !(v > 0.0) {
            return 0.0;
        }
        d[i] = v.sqrt().recip();
    }
    let scaled = DMatrix::from_fn(m, m, |i, j| a[(i, j)] * d[i] * d[j]);
    extreme_eigen_ratio(&scaled)
}

/// `min(eig) / max(eig)` of a symmetric matrix; negative when indefinite.
pub(crate) fn extreme_eigen_ratio(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max <= 0.0 {
        return 0.0;
    }
    min / max
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let m = a.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric positive-definite matrix, or `None` if the
/// Cholesky factorisation fails.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// `XᵀX` and `Xᵀy` for a row-major block `x` with `m` columns.
pub(crate) fn gram(x: &[f64], y: &[f64], m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (row, &yi) in x.chunks_exact(m).zip(y) {
        for i in 0..m {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            b[i] += xi * yi;
            let line = &mut a[i * m..(i + 1) * m];
            for j in i..m {
                line[j] += xi * row[j];
            }
        }
    }
    let mut a = DMatrix::from_row_slice(m, m, &a);
    for i in 0..m {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    (a, DVector::from_vec(b))
}

/// Symmetric `A^p` through an eigendecomposition. Eigenvalues must be
/// positive.
pub(crate) fn spd_power(a: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.powf(p)),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&scaled) * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_naive_product() {
        let x = [1.0, 2.0, 0.0, 1.0, -1.0, 3.0];
        let y = [1.0, 2.0, 3.0];
        let (a, b) = gram(&x, &y, 2);
        let xm = DMatrix::from_row_slice(3, 2, &x);
        let ym = DVector::from_row_slice(&y);
        assert_eq!(a, xm.transpose() * &xm);
        assert_eq!(b, xm.transpose() * ym);
    }

    #[test]
    fn fourth_root_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = spd_power(&a, -0.25);
        let back = spd_power(&(&r * &r * &r * &r), -1.0);
        assert!((back - a).abs().max() < 1e-10);
    }

    #[test]
    fn scaled_ratio_detects_collinearity() {
        let x = [1.0, 2.0, 1.0, 4.0, 1.0, 6.0];
        let (a, _) = gram(&x, &[0.0; 3], 2);
        assert!(scaled_eigen_ratio(&a) > 1e-3);
        let x = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let (a, _) = gram(&x, &[0.0; 3], 2);
        assert!(scaled_eigen_ratio(&a) < 1e-10);
    }
}
