//! Small dense matrix helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Apply a scalar function to a real symmetric matrix through its eigendecomposition.
pub fn sym_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// Symmetric square root of a positive definite matrix.
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(a, f64::sqrt)
}

/// Promote a real matrix to complex.
pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Determinant of a complex matrix by LU.
pub fn cdet(a: &CMatrix) -> Complex64 {
    a.clone().lu().determinant()
}

/// Largest absolute entry of a complex matrix.
pub fn camax(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// Apply a scalar function to a Hermitian matrix.
pub fn herm_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|x| Complex64::new(f(x), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}
