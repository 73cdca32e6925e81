//! Dense symmetric eigendecomposition, shared by the embedding fits.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Full eigendecomposition of a symmetric matrix, eigenvalues sorted in
/// descending order. Returns `(eigenvalues, eigenvectors)` with eigenvectors
/// as columns, each of unit Euclidean norm.
pub fn symmetric_eigen_desc(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!(
            "symmetric eigen needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite entry in eigenproblem".into()));
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[[i, j]];
        }
    }
    let eig = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[src];
        for i in 0..n {
            vectors[[i, k]] = eig.eigenvectors[(i, src)];
        }
    }
    Ok((values, vectors))
}
