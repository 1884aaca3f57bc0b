//! Small dense linear-algebra helpers shared by the impact and projection code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Singular values below this fraction of the largest one are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Numerical rank with the relative singular value cutoff.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Moore-Penrose pseudo-inverse with a relative singular value cutoff.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, m);
    if max == 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_tol * max {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis (as matrix columns) of the column space of `a`, with its rank.
pub fn range_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd computed with u");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| max > 0.0 && s > rel_tol * max)
        .map(|(k, _)| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Rows form an orthonormal basis of the orthogonal complement of `range`'s columns.
///
/// `range` must already have orthonormal columns.
pub fn orthonormal_complement_rows(range: &DMatrix<f64>) -> DMatrix<f64> {
    let n = range.nrows();
    let r = range.ncols();
    if r == 0 {
        return DMatrix::identity(n, n);
    }
    let projector = DMatrix::identity(n, n) - range * range.transpose();
    let eig = SymmetricEigen::new(symmetrize(&projector));
    // Eigenvalues of an orthogonal projector are 0 or 1.
    let mut keep: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .filter(|(&l, _)| l > 0.5)
        .map(|(&l, c)| (l, c.into_owned()))
        .collect();
    keep.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut p = DMatrix::zeros(keep.len(), n);
    for (i, (_, c)) in keep.iter().enumerate() {
        // deterministic sign: largest-magnitude entry positive
        let (imax, _) = c
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (j, &x)| if x.abs() > acc.1 { (j, x.abs()) } else { acc });
        let sign = if c[imax] < 0.0 { -1.0 } else { 1.0 };
        p.row_mut(i).copy_from(&(c.transpose() * sign));
    }
    p
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_vec(a: &DVector<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve a symmetric positive definite system, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Some(ch.solve(b)),
        None => a.clone().lu().solve(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_inverse_of_row() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = pseudo_inverse(&a, RANK_TOLERANCE);
        assert_eq!(p.shape(), (2, 1));
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(p[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pseudo_inverse(&a, RANK_TOLERANCE);
        // Penrose conditions
        assert!(max_abs(&(&a * &p * &a - &a)) < 1e-12);
        assert!(max_abs(&(&p * &a * &p - &p)) < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0, 3.0, -1.0]);
        let r = range_basis(&a, RANK_TOLERANCE);
        assert_eq!(r.ncols(), 2);
        let p = orthonormal_complement_rows(&r);
        assert_eq!(p.shape(), (2, 4));
        assert!(max_abs(&(&p * p.transpose() - DMatrix::identity(2, 2))) < 1e-12);
        assert!(max_abs(&(&p * &a)) < 1e-12);
    }

    #[test]
    fn rank_of_zero_matrix() {
        assert_eq!(rank(&DMatrix::zeros(3, 2), RANK_TOLERANCE), 0);
        assert_eq!(rank(&DMatrix::zeros(0, 2), RANK_TOLERANCE), 0);
    }
}
