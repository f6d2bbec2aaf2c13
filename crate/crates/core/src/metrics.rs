//! Evaluation measures for matching and classification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|S_delta(x) symmetric-difference S_delta(x_hat)|` with
/// `S_delta(v) = { j : v_j > delta }`.
pub fn dissimilarity_index(x: &DVector<f64>, x_hat: &DVector<f64>, delta: f64) -> Result<usize> {
    if x.len() != x_hat.len() {
        return Err(Error::dim(format!(
            "lengths {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    Ok(x.iter()
        .zip(x_hat.iter())
        .filter(|(a, b)| (**a > delta) != (**b > delta))
        .count())
}

/// The default threshold `1e-6 * max(x)`.
pub fn default_delta(x: &DVector<f64>) -> f64 {
    1e-6 * x.max()
}

/// `|x - x_hat| / |x|`.
pub fn relative_error_coeff(x: &DVector<f64>, x_hat: &DVector<f64>) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::dim(format!(
            "lengths {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::invalid("reference coefficients are zero"));
    }
    Ok((x - x_hat).norm() / norm)
}

/// `|b - D x_hat| / |b|`.
pub fn relative_error_data(
    d: &DMatrix<f64>,
    b: &DVector<f64>,
    x_hat: &DVector<f64>,
) -> Result<f64> {
    if d.nrows() != b.len() || d.ncols() != x_hat.len() {
        return Err(Error::dim("relative_error_data operand sizes disagree"));
    }
    let norm = b.norm();
    if norm == 0.0 {
        return Err(Error::invalid("datum is zero"));
    }
    Ok((b - d * x_hat).norm() / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SsimWindow {
    /// One window spanning the whole signal.
    Global,
    /// Sliding Gaussian window; SSIM is the mean over all full windows.
    Gaussian { length: usize, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub window: SsimWindow,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L`. `None` uses the joint range of both signals.
    pub dynamic_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: SsimWindow::Global,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: None,
        }
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        })
}

fn weighted_ssim(a: &[f64], b: &[f64], w: &[f64], c1: f64, c2: f64) -> f64 {
    let (mut ma, mut mb) = (0.0, 0.0);
    for i in 0..w.len() {
        ma += w[i] * a[i];
        mb += w[i] * b[i];
    }
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..w.len() {
        let (da, db) = (a[i] - ma, b[i] - mb);
        va += w[i] * da * da;
        vb += w[i] * db * db;
        cov += w[i] * da * db;
    }
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

/// Structural similarity of two equal-length signals.
pub fn ssim(a: &DVector<f64>, b: &DVector<f64>, params: &SsimParams) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::dim(format!("lengths {} and {}", a.len(), b.len())));
    }
    if !(params.k1 > 0.0 && params.k2 > 0.0) {
        return Err(Error::invalid("SSIM stabilisers must be positive"));
    }
    let l = match params.dynamic_range {
        Some(l) if l > 0.0 => l,
        Some(_) => return Err(Error::invalid("SSIM dynamic range must be positive")),
        None => {
            let (lo_a, hi_a) = range(a.as_slice());
            let (lo_b, hi_b) = range(b.as_slice());
            let r = (hi_a - lo_a).max(hi_b - lo_b);
            if r > 0.0 {
                r
            } else {
                1.0
            }
        }
    };
    let c1 = (params.k1 * l).powi(2);
    let c2 = (params.k2 * l).powi(2);
    match params.window {
        SsimWindow::Global => {
            let w = vec![1.0 / a.len() as f64; a.len()];
            Ok(weighted_ssim(a.as_slice(), b.as_slice(), &w, c1, c2))
        }
        SsimWindow::Gaussian { length, std } => {
            if length == 0 || length > a.len() || !(std > 0.0) {
                return Err(Error::invalid(format!(
                    "Gaussian window of length {length} on a signal of length {}",
                    a.len()
                )));
            }
            let centre = (length as f64 - 1.0) / 2.0;
            let mut w: Vec<f64> = (0..length)
                .map(|i| (-((i as f64 - centre).powi(2)) / (2.0 * std * std)).exp())
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let windows = a.len() - length + 1;
            let sum: f64 = (0..windows)
                .map(|s| {
                    weighted_ssim(
                        &a.as_slice()[s..s + length],
                        &b.as_slice()[s..s + length],
                        &w,
                        c1,
                        c2,
                    )
                })
                .sum();
            Ok(sum / windows as f64)
        }
    }
}

/// `(1 - SSIM) / 2`, clamped to `[0, 1]` against round-off.
pub fn dssim(a: &DVector<f64>, b: &DVector<f64>, params: &SsimParams) -> Result<f64> {
    Ok((0.5 * (1.0 - ssim(a, b, params)?)).clamp(0.0, 1.0))
}

/// Counts with rows = predicted class and columns = true class; labels 1..=k.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Result<DMatrix<usize>> {
    if truth.len() != predicted.len() {
        return Err(Error::dim("label vectors differ in length"));
    }
    let mut m = DMatrix::zeros(k, k);
    for (t, p) in truth.iter().zip(predicted) {
        if !(1..=k).contains(t) || !(1..=k).contains(p) {
            return Err(Error::invalid(format!(
                "label pair ({t}, {p}) outside 1..={k}"
            )));
        }
        m[(p - 1, t - 1)] += 1;
    }
    Ok(m)
}

/// Fraction of items on the diagonal.
pub fn accuracy(confusion: &DMatrix<usize>) -> f64 {
    let total: usize = confusion.iter().sum();
    if total == 0 {
        return 0.0;
    }
    confusion.diagonal().iter().sum::<usize>() as f64 / total as f64
}

/// `(precision, recall)`; precision is 0 for an empty retrieved set.
pub fn precision_recall(retrieved: &[usize], relevant: &[usize]) -> Result<(f64, f64)> {
    use std::collections::BTreeSet;
    let relevant: BTreeSet<_> = relevant.iter().collect();
    if relevant.is_empty() {
        return Err(Error::invalid("relevant set is empty"));
    }
    let retrieved: BTreeSet<_> = retrieved.iter().collect();
    let hits = retrieved.intersection(&relevant).count() as f64;
    let precision = if retrieved.is_empty() {
        log::debug!("empty retrieved set, precision taken as 0");
        0.0
    } else {
        hits / retrieved.len() as f64
    };
    Ok((precision, hits / relevant.len() as f64))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = mid;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::dim(
            "spearman needs two equal-length samples of size >= 2",
        ));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma).powi(2);
        vb += (rb[i] - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::invalid(
            "spearman is undefined for a constant sample",
        ));
    }
    Ok(cov / (va * vb).sqrt())
}
