use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Classical (Torgerson) scaling of a distance matrix into `dims` coordinates.
///
/// Eigenvectors of `B = -1/2 J D∘D J` are taken in decreasing eigenvalue order; negative
/// eigenvalues are truncated to zero-width axes. Each axis is oriented so that its
/// largest-magnitude coordinate is positive.
pub fn classical_mds(distances: &DMatrix<f64>, dims: usize) -> Result<DMatrix<f64>> {
    let n = distances.nrows();
    if dims == 0 {
        return Err(Error::invalid("MDS needs at least one output dimension"));
    }
    if distances.ncols() != n || n == 0 {
        return Err(Error::dims("MDS needs a non-empty square distance matrix"));
    }
    let sq = distances.map(|d| d * d);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| sq.column(j).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_mean[i] - col_mean[j] + grand)
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let tol = 1e-12
        * eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
    if n > 1 && top <= tol {
        return Err(Error::numerical("MDS found no positive eigenvalue"));
    }
    let mut out = DMatrix::zeros(n, dims);
    for (axis, &idx) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= tol {
            continue;
        }
        let scale = lambda.sqrt();
        let v = eig.eigenvectors.column(idx);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[(i, axis)] = sign * scale * v[i];
        }
    }
    Ok(out)
}
