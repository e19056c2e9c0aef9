//! Dense real subspace helpers built on the SVD.
//!
//! Subspaces are carried as matrices with orthonormal columns; an empty
//! subspace of `R^m` is an `m x 0` matrix.

use nalgebra::{DMatrix, DVector};

use crate::tol;

/// Orthonormal basis of a subspace of `R^m`, stored column-wise.
pub type Subspace = DMatrix<f64>;

fn threshold(sigma: &DVector<f64>, rel: f64, abs: f64) -> f64 {
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    (rel * smax).max(abs)
}

/// Kernel of `a`, with singular values below `max(rel * s_max, abs)` treated as zero.
pub fn null_space_with(a: &DMatrix<f64>, rel: f64, abs: f64) -> Subspace {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad so that the SVD returns a full set of right singular vectors.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let thr = threshold(&svd.singular_values, rel, abs);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thr)
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Kernel with the crate-wide relative rank threshold and a tiny absolute floor
/// so that an exactly zero map has the whole domain as kernel.
pub fn null_space(a: &DMatrix<f64>) -> Subspace {
    null_space_with(a, tol::RANK, 1e-13)
}

/// Orthonormal basis of the column space of `a`.
pub fn range_with(a: &DMatrix<f64>, rel: f64, abs: f64) -> Subspace {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let thr = threshold(&svd.singular_values, rel, abs);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > thr)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    basis
}

pub fn range(a: &DMatrix<f64>) -> Subspace {
    range_with(a, tol::RANK, 1e-13)
}

/// Numerical rank under the crate-wide relative threshold.
pub fn rank(a: &DMatrix<f64>) -> usize {
    range(a).ncols()
}

/// Orthogonal complement of `basis` inside `R^m`.
pub fn complement(basis: &Subspace, m: usize) -> Subspace {
    if basis.ncols() == 0 {
        return DMatrix::identity(m, m);
    }
    null_space_with(&basis.transpose(), 0.0, 1e-9)
}

pub fn projector(basis: &Subspace, m: usize) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::zeros(m, m);
    }
    basis * basis.transpose()
}

/// Frobenius distance between the orthogonal projectors onto two subspaces.
pub fn subspace_distance(a: &Subspace, b: &Subspace) -> f64 {
    let m = a.nrows().max(b.nrows());
    (projector(a, m) - projector(b, m)).norm()
}

/// Intersection of two subspaces of `R^m`, given orthonormal bases.
pub fn intersection(a: &Subspace, b: &Subspace) -> Subspace {
    let m = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::zeros(m, 0);
    }
    let residual = (DMatrix::identity(m, m) - projector(b, m)) * a;
    let coeffs = null_space_with(&residual, 0.0, 1e-7);
    orthonormalize(&(a * coeffs))
}

/// Orthonormal basis for the span of the columns (rank-revealing).
pub fn orthonormalize(a: &DMatrix<f64>) -> Subspace {
    range(a)
}

/// Distance from `v` to the subspace, i.e. the norm of its orthogonal residual.
pub fn residual_from(basis: &Subspace, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm()
}

/// Largest absolute entry of `B^T B - I`.
pub fn orthonormality_residual(basis: &Subspace) -> f64 {
    let k = basis.ncols();
    if k == 0 {
        return 0.0;
    }
    (basis.transpose() * basis - DMatrix::identity(k, k)).amax()
}

/// Stacks matrices with a common column count on top of each other.
pub fn vstack(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}
