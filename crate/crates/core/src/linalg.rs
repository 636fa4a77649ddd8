//! Small dense helpers over row-major `Vec<f64>` storage.
//!
//! Plan counts are tens, not thousands, so everything here is plain loops;
//! the eigen-decomposition is delegated to nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Row-major square matrix times vector.
pub(crate) fn mat_vec(dim: usize, data: &[f64], v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(data.len(), dim * dim);
    debug_assert_eq!(v.len(), dim);
    data.chunks_exact(dim)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Maximum absolute row sum.
pub(crate) fn norm_inf(dim: usize, data: &[f64]) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    data.chunks_exact(dim)
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigenvalues of a symmetric row-major matrix, ascending.
pub fn symmetric_eigenvalues(dim: usize, data: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, data);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Symmetric square root `V diag(sqrt(max(l, 0))) V^T`, row-major.
///
/// Returns the root together with the extreme eigenvalues (min, max-abs)
/// so callers can apply their own tolerance.
pub(crate) fn symmetric_sqrt(dim: usize, data: &[f64]) -> (Vec<f64>, f64, f64) {
    let m = DMatrix::from_row_slice(dim, dim, data);
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[i * dim + j] = (0..dim).map(|k| v[(i, k)] * roots[k] * v[(j, k)]).sum();
        }
    }
    (out, min, scale)
}
