//! Per-cluster low-rank compression: truncated SVD (PCA) and an alternating
//! nonnegative factorisation whose sub-problems are solved by projected IAS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, Partition};
use crate::error::{Error, Result};
use crate::ias::{threshold_scales_lenient, IasConfig, PreparedOperator};
use crate::linalg::svd_desc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Nmf,
}

/// Keep components while `s_k / s_1 >= delta`, at most `k_max` of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRule {
    pub k_max: usize,
    pub delta: f64,
}

impl Default for RankRule {
    fn default() -> Self {
        Self {
            k_max: 50,
            delta: 1e-3,
        }
    }
}

impl RankRule {
    pub fn new(k_max: usize, delta: f64) -> Result<Self> {
        let rule = Self { k_max, delta };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("rank rule k_max must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "rank rule delta {} not in (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }
}

/// A cluster code book `W` (n x k) with coefficients `H` (k x p_j).
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Singular values of the source block, descending, length `min(n, p_j)`.
    pub singular_values: Vec<f64>,
    pub method: Method,
    /// Frobenius residual after initialisation and after every outer NMF
    /// iteration; a single entry for PCA.
    pub residual_trace: Vec<f64>,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Leading `k` singular triplets of `block`.
pub fn truncated_svd(block: &DMatrix<f64>, k: usize) -> Result<TruncatedSvd> {
    let max_k = block.nrows().min(block.ncols());
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!("rank {k} outside 1..={max_k}")));
    }
    let (u, s, v) = svd_desc(block)?;
    Ok(TruncatedSvd {
        u: u.columns(0, k).into_owned(),
        s: s.rows(0, k).into_owned(),
        v: v.columns(0, k).into_owned(),
    })
}

/// Number of components retained by `rule`: one less than the first 1-based
/// index whose ratio `s_k / s_1` drops below `delta`, never below one.
pub fn select_rank(singular_values: &[f64], rule: &RankRule) -> Result<usize> {
    rule.validate()?;
    let s1 = *singular_values
        .first()
        .ok_or_else(|| Error::invalid("no singular values"))?;
    if !(s1 > 0.0) {
        return Err(Error::invalid("leading singular value is zero"));
    }
    let kept = singular_values
        .iter()
        .position(|s| s / s1 < rule.delta)
        .unwrap_or(singular_values.len());
    Ok(kept.max(1).min(rule.k_max))
}

/// PCA code book: `W = U_k`, `H = S_k V_k^T` with `k` from the rank rule.
pub fn pca_compress(block: &DMatrix<f64>, rule: &RankRule) -> Result<LowRankFactors> {
    let (u, s, v) = svd_desc(block)?;
    let k = select_rank(s.as_slice(), rule)?;
    Ok(pca_from_svd(block, &u, &s, &v, k))
}

fn pca_from_svd(
    block: &DMatrix<f64>,
    u: &DMatrix<f64>,
    s: &DVector<f64>,
    v: &DMatrix<f64>,
    k: usize,
) -> LowRankFactors {
    let w = u.columns(0, k).into_owned();
    let mut h = v.columns(0, k).transpose();
    for (i, mut row) in h.row_iter_mut().enumerate() {
        row *= s[i];
    }
    let residual = (block - &w * &h).norm();
    LowRankFactors {
        w,
        h,
        singular_values: s.iter().copied().collect(),
        method: Method::Pca,
        residual_trace: vec![residual],
    }
}

/// Settings for [`nmf`].
///
/// Each sub-problem is solved in units of an assumed per-entry misfit level
/// `noise_rel * rms(block)`, so the factorisation is invariant to rescaling
/// the block. `threshold` is the l1-limit activation level in those units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfOptions {
    pub nonneg_w: bool,
    pub eta_h: f64,
    pub eta_w: f64,
    pub max_outer: usize,
    /// Stop once the relative decrease of the residual falls below this.
    pub tol: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub noise_rel: f64,
    pub threshold: f64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self {
            nonneg_w: false,
            eta_h: 1e-3,
            eta_w: 1.0,
            max_outer: 200,
            tol: 1e-6,
            inner_max_iters: 50,
            inner_tol: 1e-6,
            noise_rel: 1e-3,
            threshold: 1.0,
        }
    }
}

impl NmfOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("noise_rel", self.noise_rel),
            ("threshold", self.threshold),
            ("tol", self.tol),
            ("inner_tol", self.inner_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("nmf {name} must be positive")));
            }
        }
        if !(self.eta_h >= 0.0 && self.eta_w >= 0.0) {
            return Err(Error::invalid("nmf eta values must be >= 0"));
        }
        if self.max_outer == 0 || self.inner_max_iters == 0 {
            return Err(Error::invalid("nmf iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Alternating factorisation `block ~ W H` with `H >= 0` (and `W >= 0` when
/// requested).
///
/// Columns of `H` and rows of `W` are updated one at a time by projected
/// IAS. An update is only accepted if it does not increase the residual of
/// its column (row), so the Frobenius residual never increases.
pub fn nmf(block: &DMatrix<f64>, k: usize, opts: &NmfOptions) -> Result<LowRankFactors> {
    opts.validate()?;
    let (n, p) = block.shape();
    let max_k = n.min(p);
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!("rank {k} outside 1..={max_k}")));
    }
    if opts.nonneg_w {
        if let Some(i) = block.iter().position(|v| *v < 0.0) {
            return Err(Error::invalid(format!(
                "nonnegative W requested but block entry ({}, {}) is negative",
                i % n + 1,
                i / n + 1
            )));
        }
    }
    let (u, s, v) = svd_desc(block)?;
    let singular_values: Vec<f64> = s.iter().copied().collect();
    let norm = block.norm();
    if norm == 0.0 {
        return Ok(LowRankFactors {
            w: DMatrix::zeros(n, k),
            h: DMatrix::zeros(k, p),
            singular_values,
            method: Method::Nmf,
            residual_trace: vec![0.0],
        });
    }

    // |U sqrt(S)|, |sqrt(S) V^T|, rescaled to the block norm
    let mut w = DMatrix::from_fn(n, k, |i, j| u[(i, j)] * s[j].sqrt());
    let mut h = DMatrix::from_fn(k, p, |i, j| (v[(j, i)] * s[i].sqrt()).abs());
    if opts.nonneg_w {
        w.apply(|x| *x = x.abs());
    }
    let approx = (&w * &h).norm();
    if approx > 0.0 {
        let c = (norm / approx).sqrt();
        w *= c;
        h *= c;
    }

    let sigma = opts.noise_rel * norm / ((n * p) as f64).sqrt();
    let scaled = block / sigma;
    let mut trace = vec![(block - &w * &h).norm()];
    for _ in 0..opts.max_outer {
        update_h(&scaled, &w, &mut h, sigma, opts)?;
        update_w(&scaled, &mut w, &h, sigma, opts)?;
        let residual = (block - &w * &h).norm();
        let previous = *trace.last().unwrap();
        trace.push(residual);
        if residual == 0.0 || previous - residual <= opts.tol * previous {
            break;
        }
    }
    Ok(LowRankFactors {
        w,
        h,
        singular_values,
        method: Method::Nmf,
        residual_trace: trace,
    })
}

fn update_h(
    scaled: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &mut DMatrix<f64>,
    sigma: f64,
    opts: &NmfOptions,
) -> Result<()> {
    let op = PreparedOperator::new(w / sigma);
    let cfg = IasConfig::new(
        opts.eta_h,
        threshold_scales_lenient(op.matrix(), opts.threshold),
    )
    .nonneg(true)
    .max_iters(opts.inner_max_iters)
    .tol_x(opts.inner_tol);
    for l in 0..scaled.ncols() {
        let b: DVector<f64> = scaled.column(l).into_owned();
        let old: DVector<f64> = h.column(l).into_owned();
        let new = op.solve(&b, &cfg)?.x;
        if misfit(op.matrix(), &b, &new) <= misfit(op.matrix(), &b, &old) {
            h.set_column(l, &new);
        }
    }
    Ok(())
}

fn update_w(
    scaled: &DMatrix<f64>,
    w: &mut DMatrix<f64>,
    h: &DMatrix<f64>,
    sigma: f64,
    opts: &NmfOptions,
) -> Result<()> {
    let op = PreparedOperator::new(h.transpose() / sigma);
    let cfg = IasConfig::new(
        opts.eta_w,
        threshold_scales_lenient(op.matrix(), opts.threshold),
    )
    .nonneg(opts.nonneg_w)
    .max_iters(opts.inner_max_iters)
    .tol_x(opts.inner_tol);
    for i in 0..scaled.nrows() {
        let b: DVector<f64> = scaled.row(i).transpose();
        if b.iter().all(|v| *v == 0.0) {
            w.row_mut(i).fill(0.0);
            continue;
        }
        let old: DVector<f64> = w.row(i).transpose();
        let new = op.solve(&b, &cfg)?.x;
        if misfit(op.matrix(), &b, &new) <= misfit(op.matrix(), &b, &old) {
            w.set_row(i, &new.transpose());
        }
    }
    Ok(())
}

fn misfit(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (b - a * x).norm_squared()
}

/// How one cluster is compressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCompression {
    pub method: Method,
    #[serde(default)]
    pub rule: RankRule,
    #[serde(default)]
    pub nmf: NmfOptions,
}

impl ClusterCompression {
    pub fn pca(rule: RankRule) -> Self {
        Self {
            method: Method::Pca,
            rule,
            nmf: NmfOptions::default(),
        }
    }

    pub fn nmf(rule: RankRule, opts: NmfOptions) -> Self {
        Self {
            method: Method::Nmf,
            rule,
            nmf: opts,
        }
    }

    /// Compresses one block, choosing the rank from its singular values.
    pub fn compress(&self, block: &DMatrix<f64>) -> Result<LowRankFactors> {
        match self.method {
            Method::Pca => pca_compress(block, &self.rule),
            Method::Nmf => {
                let (_, s, _) = svd_desc(block)?;
                let k = if s[0] > 0.0 {
                    select_rank(s.as_slice(), &self.rule)?
                } else {
                    1
                };
                nmf(block, k, &self.nmf)
            }
        }
    }
}

/// Compresses every block of `partition`. `specs` holds either one entry
/// used for all clusters or one entry per cluster.
pub fn compress_partition(
    dict: &Dictionary,
    partition: &Partition,
    specs: &[ClusterCompression],
) -> Result<Vec<LowRankFactors>> {
    let k = partition.n_blocks();
    if partition.n_columns() != dict.n_atoms() {
        return Err(Error::dim(format!(
            "partition covers {} columns, dictionary has {}",
            partition.n_columns(),
            dict.n_atoms()
        )));
    }
    if specs.len() != 1 && specs.len() != k {
        return Err(Error::invalid(format!(
            "{} compression specs for {k} clusters",
            specs.len()
        )));
    }
    (0..k)
        .map(|j| {
            let range = partition.block(j);
            let block = dict.atoms().columns(range.start, range.len()).into_owned();
            specs[j.min(specs.len() - 1)].compress(&block)
        })
        .collect()
}
