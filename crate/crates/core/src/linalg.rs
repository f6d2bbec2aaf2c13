//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// The input is symmetrised first so round-off asymmetry does not leak into
/// the eigenvectors.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(m.nrows(), n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Thin SVD `m = U diag(s) V^T` with singular values sorted descending.
///
/// Tall inputs are reduced by a QR factorisation first, which keeps the cost
/// at `O(n p^2)` for `n >> p`.
pub fn svd_desc(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (n, p) = m.shape();
    if n >= 2 * p && p > 0 {
        let qr = m.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let (ur, s, v) = svd_square_desc(&r)?;
        return Ok((q * ur, s, v));
    }
    if p >= 2 * n && n > 0 {
        let (v, s, u) = svd_desc(&m.transpose())?;
        return Ok((u, s, v));
    }
    svd_square_desc(m)
}

fn svd_square_desc(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = DVector::from_fn(k, |i, _| svd.singular_values[order[i]]);
    let u = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(vt.ncols(), k, |i, j| vt[(order[j], i)]);
    Ok((u, s, v))
}

/// Singular values only, from the eigenvalues of the smaller Gram matrix.
///
/// Accurate to roughly `sqrt(eps) * s_max` in absolute terms, which is ample
/// for rank selection at thresholds well above `1e-7`, and much cheaper than
/// a full SVD for very tall or very wide matrices.
pub fn singular_values_gram(m: &DMatrix<f64>) -> DVector<f64> {
    let gram = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let (vals, _) = sym_eigen_desc(&gram);
    vals.map(|v| v.max(0.0).sqrt())
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Solves the SPD system `m x = rhs`.
pub fn spd_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("Cholesky factorisation failed".into()))?;
    Ok(chol.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_reconstructs_all_shapes() {
        for (n, p) in [(4, 4), (12, 3), (3, 12), (7, 5)] {
            let m = random(n, p, (n * 31 + p) as u64);
            let (u, s, v) = svd_desc(&m).unwrap();
            let rebuilt = &u * DMatrix::from_diagonal(&s) * v.transpose();
            assert!((rebuilt - &m).norm() < 1e-12 * m.norm());
            assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            let utu = u.tr_mul(&u);
            assert!((utu - DMatrix::identity(s.len(), s.len())).norm() < 1e-12);
        }
    }

    #[test]
    fn gram_singular_values_match_svd() {
        let m = random(30, 6, 3);
        let (_, s, _) = svd_desc(&m).unwrap();
        let g = singular_values_gram(&m);
        for (a, b) in s.iter().zip(g.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
