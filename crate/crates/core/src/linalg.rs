//! Dense helpers shared by the model and the solver.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values in nonincreasing order.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = SVD::new(x.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let sv = singular_values(x);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > RANK_TOL * top).count(),
        _ => 0,
    }
}

/// `A - A^T`, written entrywise so the result is exactly skew-symmetric.
pub fn antisymmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a[(i, j)] - a[(j, i)];
            x[(i, j)] = v;
            x[(j, i)] = -v;
        }
    }
    x
}

/// Factor the best rank-`2r` approximation of a skew-symmetric matrix as
/// `S Q^T - Q S^T` with `S`, `Q` of shape `N x r`.
///
/// A real skew matrix decomposes into planes `sigma_k (a_k b_k^T - b_k a_k^T)`
/// with orthonormal `a_k, b_k`. Each plane is peeled off in turn: `a` is the top
/// eigenvector of `X^T X`, `b = -X a / sigma`. Columns are scaled by
/// `sqrt(sigma)` so both factors carry equal weight.
pub fn skew_factors(x: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mut rem = x.clone();
    let mut s = DMatrix::zeros(n, r);
    let mut q = DMatrix::zeros(n, r);
    for k in 0..r {
        let gram = rem.transpose() * &rem;
        let eig = SymmetricEigen::new(gram);
        let (top, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
        let a = eig.eigenvectors.column(top).into_owned();
        let xa = &rem * &a;
        let sigma = xa.norm();
        if !(sigma > 0.0) {
            break;
        }
        let b = -xa / sigma;
        let root = sigma.sqrt();
        s.set_column(k, &(&a * root));
        q.set_column(k, &(&b * root));
        for i in 0..n {
            for j in (i + 1)..n {
                let v = sigma * (a[i] * b[j] - b[i] * a[j]);
                rem[(i, j)] -= v;
                rem[(j, i)] += v;
            }
        }
    }
    (s, q)
}
