//! Small dense helpers over nalgebra for complex and real matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type CMat = DMatrix<Complex64>;

/// Singular values in decreasing order.
pub(crate) fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// The `k`-th largest singular value (1-based), zero if it does not exist.
pub(crate) fn sigma_k(a: &CMat, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    singular_values(a).get(k - 1).copied().unwrap_or(0.0)
}

/// Moore-Penrose pseudo-inverse with relative cutoff `rtol`.
pub(crate) fn pinv(a: &CMat, rtol: f64) -> CMat {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return CMat::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = CMat::zeros(c, r);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= rtol * smax || s == 0.0 {
            continue;
        }
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        out += (vi * ui) * Complex64::new(1.0 / s, 0.0);
    }
    out
}

pub(crate) fn cdet(a: &CMat) -> Complex64 {
    if a.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    a.clone().determinant()
}

/// Orthonormal basis (columns) of the column space of a real matrix.
pub(crate) fn orth(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 || r == 0 {
        return DMatrix::zeros(r, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rtol * smax)
        .collect();
    let mut out = DMatrix::zeros(r, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Orthonormal basis of the null space of a real matrix (as columns).
pub(crate) fn null_space(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    // Pad to a square matrix so the full right singular basis is available.
    let mut sq = DMatrix::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(a);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = (0..c).filter(|&i| svd.singular_values[i] <= rtol * smax.max(1e-300)).collect();
    let mut out = DMatrix::zeros(c, null.len());
    for (j, &i) in null.iter().enumerate() {
        out.set_column(j, &v_t.row(i).transpose());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn pinv_is_right_inverse_for_full_row_rank() {
        let a = CMat::from_row_slice(2, 3, &[c(1.0), c(2.0), c(0.0), Complex64::new(0.0, 1.0), c(0.0), c(3.0)]);
        let p = pinv(&a, 1e-12);
        let id = &a * &p;
        assert!((id - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&a, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).norm() < 1e-12);
    }
}
