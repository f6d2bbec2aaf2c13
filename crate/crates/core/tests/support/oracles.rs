//! Reference computations that share no code with the library: plain loops,
//! bisection and Jacobi rotations only.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// `argmin 1/2 |b - A x|^2 + sum w_j |x_j|` (optionally `x >= 0`) by cyclic
/// coordinate descent, stopped once no coordinate moves by more than
/// `tol * (1 + max |x|)` in a sweep.
pub fn l1_coordinate_descent(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &[f64],
    nonneg: bool,
    tol: f64,
) -> DVector<f64> {
    let (n, p) = a.shape();
    let col_sq: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum())
        .collect();
    let mut x = DVector::zeros(p);
    let mut r = b.clone();
    for _sweep in 0..200_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let mut rho = 0.0;
            for i in 0..n {
                rho += a[(i, j)] * r[i];
            }
            rho += col_sq[j] * x[j];
            let mut new = if rho > w[j] {
                (rho - w[j]) / col_sq[j]
            } else if rho < -w[j] {
                (rho + w[j]) / col_sq[j]
            } else {
                0.0
            };
            if nonneg && new < 0.0 {
                new = 0.0;
            }
            let d = new - x[j];
            if d != 0.0 {
                for i in 0..n {
                    r[i] -= a[(i, j)] * d;
                }
                x[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        if max_change <= tol * (1.0 + x.amax()) {
            break;
        }
    }
    x
}

/// Same problem (signed) by FISTA with constant step `1 / |A|_2^2`, the
/// norm estimated by power iteration.
pub fn l1_fista(a: &DMatrix<f64>, b: &DVector<f64>, w: &[f64], tol: f64) -> DVector<f64> {
    let p = a.ncols();
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let mut v = DVector::from_element(p, 1.0);
    let mut lip = 0.0;
    for _ in 0..1000 {
        let next = &ata * &v;
        lip = next.norm() / v.norm();
        v = next / lip;
    }
    let step = 1.0 / (lip * 1.000001);
    let shrink = |z: &DVector<f64>| {
        DVector::from_fn(p, |j, _| {
            let t = w[j] * step;
            if z[j] > t {
                z[j] - t
            } else if z[j] < -t {
                z[j] + t
            } else {
                0.0
            }
        })
    };
    let mut x = DVector::zeros(p);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..2_000_000 {
        let grad = &ata * &y - &atb;
        let next = shrink(&(&y - grad * step));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        let change = (&next - &x).norm();
        x = next;
        t = t_next;
        if change <= tol * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// Symmetric difference quotient `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Largest violation of the lasso optimality conditions at `x`.
pub fn lasso_kkt_violation(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    w: &[f64],
    x: &DVector<f64>,
    nonneg: bool,
) -> f64 {
    let g = a.transpose() * (b - a * x);
    (0..x.len())
        .map(|j| {
            if x[j] > 0.0 {
                (g[j] - w[j]).abs()
            } else if x[j] < 0.0 {
                (g[j] + w[j]).abs()
            } else if nonneg {
                (g[j] - w[j]).max(0.0)
            } else {
                (g[j].abs() - w[j]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimiser over `theta > 0` of `s / (2 theta) - eta log theta + theta / vt`
/// by bisection on the (increasing) derivative.
pub fn theta_root(s: f64, eta: f64, vt: f64) -> f64 {
    let d = |t: f64| -s / (2.0 * t * t) - eta / t + 1.0 / vt;
    let (mut lo, mut hi) = (1e-300_f64, 1.0_f64);
    while d(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..3000 {
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The scalar objective minimised by [`theta_root`].
pub fn theta_objective(s: f64, eta: f64, vt: f64, t: f64) -> f64 {
    s / (2.0 * t) - eta * t.ln() + t / vt
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations,
/// eigenvalues descending.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        let scale: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum::<f64>() + off;
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// Singular values of `m`, descending, from the Jacobi eigenvalues of the
/// smaller Gram matrix.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let g = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    jacobi_eigen(&g)
        .0
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

/// Frobenius distance from `m` to the nearest matrix of rank `k`.
pub fn rank_k_distance(m: &DMatrix<f64>, k: usize) -> f64 {
    singular_values(m)
        .iter()
        .skip(k)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt()
}

/// Unbiased sample covariance of the columns of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mean: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| x[(i, j)]).sum::<f64>() / p as f64)
        .collect();
    DMatrix::from_fn(n, n, |r, c| {
        (0..p)
            .map(|j| (x[(r, j)] - mean[r]) * (x[(c, j)] - mean[c]))
            .sum::<f64>()
            / (p as f64 - 1.0)
    })
}

/// Number of leading singular values kept by "stop before the first ratio
/// below delta", clamped to `1..=k_max`.
pub fn ratio_rank(sv: &[f64], delta: f64, k_max: usize) -> usize {
    let mut k = 0;
    while k < sv.len() && sv[k] / sv[0] >= delta {
        k += 1;
    }
    k.clamp(1, k_max)
}

/// Spearman correlation with average ranks for ties, computed directly.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; v.len()];
        for i in 0..v.len() {
            let less = v.iter().filter(|&&x| x < v[i]).count() as f64;
            let equal = v.iter().filter(|&&x| x == v[i]).count() as f64;
            r[i] = less + (equal + 1.0) / 2.0;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}
