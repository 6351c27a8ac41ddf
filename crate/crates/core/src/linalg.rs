//! Thin nalgebra adapters for the few dense decompositions the solvers need
//! (small symmetric eigenproblems and positive-definite solves).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::Mat;
use crate::error::{Error, Result};

fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_iterator(m.nrows(), m.ncols(), m.iter().copied())
}

fn from_na(m: &DMatrix<f64>) -> Mat {
    Mat::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solves `A X = B` for symmetric positive (semi-)definite `A`, Cholesky
/// first, LU as fallback.
pub fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve expects square A matching B rows, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let na = to_na(a);
    let nb = to_na(b);
    // Rank-deficient grams can still yield consistent systems that LU
    // "solves"; reject them by spectrum so the caller hears about the
    // missing regularization.
    let eig = SymmetricEigen::new(na.clone());
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if eig
        .eigenvalues
        .iter()
        .any(|&v| v.abs() <= 1e-12 * max_ev.max(1e-300))
    {
        return Err(Error::SingularSystem);
    }
    let solution = match na.clone().cholesky() {
        Some(chol) => chol.solve(&nb),
        None => na.lu().solve(&nb).ok_or(Error::SingularSystem)?,
    };
    if solution.iter().all(|v| v.is_finite()) {
        Ok(from_na(&solution))
    } else {
        Err(Error::SingularSystem)
    }
}

/// Eigen-decomposition of a symmetric matrix; returns `(values, vectors)`
/// sorted by descending eigenvalue, eigenvectors as columns.
pub fn sym_eig_desc(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let eig = SymmetricEigen::new(to_na(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}
