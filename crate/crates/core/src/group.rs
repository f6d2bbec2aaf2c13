//! Group-sparse identification of relevant clusters.
//!
//! Each cluster's compressed coefficients `h_j` get the prior
//! `h_j | theta_j ~ N(0, theta_j C_j)`, where `C_j` (the structural prior)
//! concentrates mass in the cone spanned by the cluster's own coefficient
//! vectors. One variance per group, updated in closed form, switches whole
//! clusters on or off.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dce::DceModel;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, svd_desc, sym_eigen_desc};

/// Cluster covariance `C = sum_l (s_l / s_1)^2 u_l u_l^T + eps I`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralPrior {
    /// Eigenvalues of `C`, descending.
    eigenvalues: DVector<f64>,
    /// Matching orthonormal eigenvectors (columns).
    eigenvectors: DMatrix<f64>,
    epsilon: f64,
    /// `s_l / s_1` for the nonzero part of the spectrum of `H_j`.
    ratios: Vec<f64>,
}

impl StructuralPrior {
    pub(crate) fn from_parts(
        eigenvalues: DVector<f64>,
        eigenvectors: DMatrix<f64>,
        epsilon: f64,
        ratios: Vec<f64>,
    ) -> Result<Self> {
        let k = eigenvalues.len();
        if eigenvectors.shape() != (k, k) {
            return Err(Error::dim(format!(
                "prior eigenvectors {:?} vs {k} eigenvalues",
                eigenvectors.shape()
            )));
        }
        if eigenvalues.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "prior eigenvalues must be positive and finite",
            ));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            epsilon,
            ratios,
        })
    }

    /// `C = I`: no preferred direction.
    pub fn identity(k: usize) -> Self {
        Self {
            eigenvalues: DVector::from_element(k, 1.0),
            eigenvectors: DMatrix::identity(k, k),
            epsilon: 0.0,
            ratios: vec![1.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn leading_direction(&self) -> DVector<f64> {
        self.eigenvectors.column(0).into_owned()
    }

    fn power(&self, exponent: f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
            v[(i, j)] * self.eigenvalues[j].powf(exponent)
        });
        scaled * v.transpose()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.power(1.0)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.power(-1.0)
    }

    /// Symmetric square root `C^{1/2}`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        self.power(0.5)
    }
}

/// Builds the cone prior from the coefficient block `H_j` (k_j x p_j).
pub fn structural_covariance(h: &DMatrix<f64>, epsilon: f64) -> Result<StructuralPrior> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("structural prior epsilon must be positive"));
    }
    let k = h.nrows();
    if k == 0 || h.ncols() == 0 {
        return Err(Error::invalid("empty coefficient block"));
    }
    let (u, s, _) = svd_desc(h)?;
    if !(s[0] > 0.0) {
        return Err(Error::invalid("coefficient block is identically zero"));
    }
    let ratios: Vec<f64> = s.iter().map(|v| v / s[0]).filter(|r| *r > 0.0).collect();
    let mut c = DMatrix::identity(k, k) * epsilon;
    for (l, r) in ratios.iter().enumerate() {
        let ul = u.column(l);
        c += ul * ul.transpose() * (r * r);
    }
    let (eigenvalues, eigenvectors) = sym_eigen_desc(&c);
    Ok(StructuralPrior {
        eigenvalues: eigenvalues.map(|v| v.max(epsilon)),
        eigenvectors,
        epsilon,
        ratios,
    })
}

/// `h^T C^{-1} h`.
pub fn structural_norm(h: &DVector<f64>, prior: &StructuralPrior) -> Result<f64> {
    if h.len() != prior.dim() {
        return Err(Error::dim(format!(
            "coefficient length {} vs prior dimension {}",
            h.len(),
            prior.dim()
        )));
    }
    let proj = prior.eigenvectors.tr_mul(h);
    Ok(proj
        .iter()
        .zip(prior.eigenvalues.iter())
        .map(|(c, l)| c * c / l)
        .sum())
}

/// Minimiser of `norm_sq / (2 theta) - eta log theta + theta / vartheta`.
pub fn gs_theta_update(norm_sq: f64, eta: f64, vartheta: f64) -> f64 {
    let t = 0.5 * vartheta * (eta + (eta * eta + 2.0 * norm_sq / vartheta).sqrt());
    t.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsConfig {
    /// Per-group `eta_j >= 0`.
    pub eta: Vec<f64>,
    /// Per-group gamma scales `vartheta_j > 0`.
    pub vartheta: Vec<f64>,
    pub max_iters: usize,
    /// Relative change of the stacked coefficients that counts as converged.
    pub tol: f64,
}

impl GsConfig {
    pub fn uniform(groups: usize, eta: f64, vartheta: f64) -> Self {
        Self {
            eta: vec![eta; groups],
            vartheta: vec![vartheta; groups],
            max_iters: 500,
            tol: 1e-8,
        }
    }

    fn validate(&self, groups: usize) -> Result<()> {
        if self.eta.len() != groups || self.vartheta.len() != groups {
            return Err(Error::dim(format!(
                "{} eta / {} vartheta values for {groups} groups",
                self.eta.len(),
                self.vartheta.len()
            )));
        }
        if self.eta.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::invalid("group eta must be >= 0"));
        }
        if self.vartheta.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("group vartheta must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsResult {
    pub h: Vec<DVector<f64>>,
    pub theta: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Group-sparse IAS on the whitened system `C_dce^{-1/2} [W_1 .. W_K] h
/// ~ C_dce^{-1/2} (b - mu)`.
pub fn gs_ias_solve(
    w_blocks: &[DMatrix<f64>],
    priors: &[StructuralPrior],
    dce: &DceModel,
    b: &DVector<f64>,
    cfg: &GsConfig,
) -> Result<GsResult> {
    let groups = w_blocks.len();
    if groups == 0 || priors.len() != groups {
        return Err(Error::dim(format!(
            "{groups} blocks and {} priors",
            priors.len()
        )));
    }
    cfg.validate(groups)?;
    let n = dce.dim();
    if b.len() != n {
        return Err(Error::dim(format!(
            "datum length {} vs model dimension {n}",
            b.len()
        )));
    }
    let mut offsets = vec![0];
    for (j, (w, prior)) in w_blocks.iter().zip(priors).enumerate() {
        if w.nrows() != n || w.ncols() != prior.dim() {
            return Err(Error::dim(format!(
                "block {} is {}x{}, prior has dimension {}",
                j + 1,
                w.nrows(),
                w.ncols(),
                prior.dim()
            )));
        }
        offsets.push(offsets[j] + w.ncols());
    }
    let total = offsets[groups];

    let mut stacked = DMatrix::zeros(n, total);
    for (j, w) in w_blocks.iter().enumerate() {
        stacked.columns_mut(offsets[j], w.ncols()).copy_from(w);
    }
    let a = dce.whiten_matrix(&stacked);
    let bw = dce.whiten_vector(&(b - dce.mean()));

    // R = blkdiag(C_j^{1/2}); the priorconditioned unknown is w with h = sqrt(theta) R w
    let mut r = DMatrix::zeros(total, total);
    for (j, prior) in priors.iter().enumerate() {
        let k = prior.dim();
        r.view_mut((offsets[j], offsets[j]), (k, k))
            .copy_from(&prior.sqrt());
    }
    let gram = a.tr_mul(&a);
    let atb = a.tr_mul(&bw);
    let btb = bw.norm_squared();
    let gram_r = &r * &gram * &r;
    let rtb = &r * &atb;

    let group_of: Vec<usize> = (0..groups)
        .flat_map(|j| std::iter::repeat_n(j, offsets[j + 1] - offsets[j]))
        .collect();
    let mut theta = cfg.vartheta.clone();
    let mut h = DVector::zeros(total);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let scale = DVector::from_fn(total, |i, _| theta[group_of[i]].sqrt());
        let mut m = gram_r.clone();
        for i in 0..total {
            for q in 0..total {
                m[(i, q)] *= scale[i] * scale[q];
            }
            m[(i, i)] += 1.0;
        }
        let rhs = rtb.component_mul(&scale);
        let w = spd_solve(m, &rhs)?;
        let h_new = &r * w.component_mul(&scale);

        let mut norms = vec![0.0; groups];
        for j in 0..groups {
            // |h_j|^2_(j) = theta_j |w_j|^2 because R_j C_j^{-1} R_j = I
            let wj = w.rows(offsets[j], offsets[j + 1] - offsets[j]);
            norms[j] = theta[j] * wj.norm_squared();
        }
        for j in 0..groups {
            theta[j] = gs_theta_update(norms[j], cfg.eta[j], cfg.vartheta[j]);
        }
        let change = (&h_new - &h).norm();
        h = h_new;
        iterations += 1;

        let misfit = (btb - 2.0 * h.dot(&atb) + (&gram * &h).dot(&h)).max(0.0);
        let mut energy = 0.5 * misfit;
        for j in 0..groups {
            energy +=
                0.5 * norms[j] / theta[j] - cfg.eta[j] * theta[j].ln() + theta[j] / cfg.vartheta[j];
        }
        trace.push(energy);

        let size = h.norm();
        if change <= cfg.tol * size || (size == 0.0 && change == 0.0) {
            converged = true;
            break;
        }
    }
    let h_blocks = (0..groups)
        .map(|j| h.rows(offsets[j], offsets[j + 1] - offsets[j]).into_owned())
        .collect();
    Ok(GsResult {
        h: h_blocks,
        theta,
        energy_trace: trace,
        iterations,
        converged,
    })
}

/// Clusters whose reconstructed contribution exceeds their compression
/// error budget: `|W_j h_j|^2 > trace(C_dce_j)`. Indices are 0-based.
pub fn threshold_significant(
    h_blocks: &[DVector<f64>],
    w_blocks: &[DMatrix<f64>],
    per_cluster_dce: &[DceModel],
) -> Result<Vec<usize>> {
    if h_blocks.len() != w_blocks.len() || w_blocks.len() != per_cluster_dce.len() {
        return Err(Error::dim("threshold_significant inputs are not aligned"));
    }
    let mut selected = Vec::new();
    for (j, ((h, w), dce)) in h_blocks
        .iter()
        .zip(w_blocks)
        .zip(per_cluster_dce)
        .enumerate()
    {
        if w.ncols() != h.len() {
            return Err(Error::dim(format!(
                "block {} coefficient length mismatch",
                j + 1
            )));
        }
        if (w * h).norm_squared() > dce.trace() {
            selected.push(j);
        }
    }
    Ok(selected)
}

/// Groups with `theta_j / max theta >= theta_star`. Indices are 0-based.
pub fn relevance_by_theta(theta: &[f64], theta_star: f64) -> Result<Vec<usize>> {
    let max = theta.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::invalid("all group variances are zero"));
    }
    Ok(theta
        .iter()
        .enumerate()
        .filter(|(_, t)| **t / max >= theta_star)
        .map(|(j, _)| j)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ias::{ias_solve, IasConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn covariance_examples() {
        let eps = 1e-6;
        let h = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0]));
        let c = structural_covariance(&h, eps).unwrap().covariance();
        let expected =
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0 + eps, 0.25 + eps]));
        assert!((c - expected).norm() < 1e-14);

        let u = DVector::from_column_slice(&[0.6, 0.8, 0.0]);
        let v = DVector::from_column_slice(&[1.0, -2.0, 0.5, 3.0]);
        let prior = structural_covariance(&(&u * v.transpose()), eps).unwrap();
        let expected = &u * u.transpose() + DMatrix::identity(3, 3) * eps;
        assert!((prior.covariance() - expected).norm() < 1e-12);
        assert!((prior.leading_direction().dot(&u).abs() - 1.0).abs() < 1e-8);

        // PCA coefficients S V^T have left singular vectors e_l
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (vv, _, _) = svd_desc(&gaussian(6, 3, &mut rng)).unwrap();
        let s = [5.0, 2.0, 0.5];
        let hp = DMatrix::from_fn(3, 6, |i, j| s[i] * vv[(j, i)]);
        let c = structural_covariance(&hp, eps).unwrap().covariance();
        let expected = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                (s[i] / s[0]).powi(2) + eps
            } else {
                0.0
            }
        });
        assert!((c - expected).norm() < 1e-12);

        assert!(structural_covariance(&DMatrix::zeros(2, 3), eps).is_err());
    }

    #[test]
    fn covariance_spectrum_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let k = rng.gen_range(1..6);
            let h = gaussian(k, rng.gen_range(1..9), &mut rng);
            let eps = 1e-6;
            let prior = structural_covariance(&h, eps).unwrap();
            assert!(prior
                .eigenvalues()
                .iter()
                .all(|l| *l >= eps && *l <= 1.0 + eps + 1e-12));
            let (u, _, _) = svd_desc(&h).unwrap();
            let dot = prior.leading_direction().dot(&u.column(0)).abs();
            assert!((dot - 1.0).abs() < 1e-8);
            let c = prior.covariance();
            assert!((&c * prior.inverse() - DMatrix::identity(k, k)).norm() < 1e-6);
            assert!((prior.sqrt() * prior.sqrt() - c).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_examples() {
        let id = StructuralPrior::identity(2);
        assert_eq!(structural_norm(&DVector::zeros(2), &id).unwrap(), 0.0);
        assert!(
            (structural_norm(&DVector::from_column_slice(&[3.0, 4.0]), &id).unwrap() - 25.0).abs()
                < 1e-12
        );
        let c = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0]));
        let prior = structural_covariance(&c, 1e-300).unwrap();
        let v = structural_norm(&DVector::from_column_slice(&[0.0, 1.0]), &prior).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!(structural_norm(&DVector::zeros(3), &id).is_err());
    }

    #[test]
    fn theta_update_examples() {
        assert!((gs_theta_update(0.0, 0.2, 1.0) - 0.2).abs() < 1e-15);
        assert!((gs_theta_update(4.0, 0.0, 1.0) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((gs_theta_update(1.0, 0.5, 2.0) - 1.618033988749895).abs() < 1e-12);
        assert!(gs_theta_update(0.0, 0.0, 1.0) > 0.0);
    }

    fn two_groups(rng: &mut ChaCha8Rng) -> (Vec<DMatrix<f64>>, Vec<StructuralPrior>) {
        let w = vec![gaussian(12, 3, rng), gaussian(12, 3, rng)];
        let priors = vec![StructuralPrior::identity(3), StructuralPrior::identity(3)];
        (w, priors)
    }

    #[test]
    fn zero_datum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, priors) = two_groups(&mut rng);
        let cfg = GsConfig::uniform(2, 0.1, 2.0);
        let r = gs_ias_solve(
            &w,
            &priors,
            &DceModel::white(12, 1.0).unwrap(),
            &DVector::zeros(12),
            &cfg,
        )
        .unwrap();
        assert!(r.h.iter().all(|h| h.norm() == 0.0));
        for t in &r.theta {
            assert!((t - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn active_group_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (w, priors) = two_groups(&mut rng);
        let h_true = DVector::from_column_slice(&[1.0, -0.5, 2.0]);
        let b = &w[0] * &h_true;
        let dce = DceModel::white(12, 1e-4).unwrap();
        let cfg = GsConfig::uniform(2, 1e-3, 1.0);
        let r = gs_ias_solve(&w, &priors, &dce, &b, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.theta[0] / r.theta[1] > 10.0, "{:?}", r.theta);
        assert_eq!(relevance_by_theta(&r.theta, 0.3).unwrap(), vec![0]);
    }

    #[test]
    fn energy_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let k = [2, 4, 3];
            let w: Vec<DMatrix<f64>> = k.iter().map(|&kj| gaussian(8, kj, &mut rng)).collect();
            let priors: Vec<StructuralPrior> = k
                .iter()
                .map(|&kj| structural_covariance(&gaussian(kj, 5, &mut rng), 1e-3).unwrap())
                .collect();
            let b = DVector::from_fn(8, |_, _| rng.sample(StandardNormal));
            let dce = crate::dce::fit_dce(&gaussian(8, 20, &mut rng), None).unwrap();
            let mut cfg = GsConfig::uniform(3, 0.05, 1.0);
            cfg.max_iters = 200;
            let r = gs_ias_solve(&w, &priors, &dce, &b, &cfg).unwrap();
            assert!(
                r.energy_trace
                    .windows(2)
                    .all(|p| p[1] <= p[0] + 1e-9 * p[0].abs().max(1.0)),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn singleton_groups_match_plain_ias() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = gaussian(7, 5, &mut rng);
        let b = DVector::from_fn(7, |_, _| rng.sample(StandardNormal));
        let cov_root = gaussian(7, 7, &mut rng);
        let dce = DceModel::from_covariance(
            DVector::from_fn(7, |i, _| 0.1 * i as f64),
            &(&cov_root * cov_root.transpose() + DMatrix::identity(7, 7)),
        )
        .unwrap();
        let vartheta = vec![0.5, 1.0, 2.0, 1.5, 0.7];
        let eta = 1e-2;

        let blocks: Vec<DMatrix<f64>> = (0..5).map(|j| a.columns(j, 1).into_owned()).collect();
        let priors = vec![StructuralPrior::identity(1); 5];
        let mut cfg = GsConfig::uniform(5, eta, 1.0);
        cfg.vartheta = vartheta.clone();
        cfg.tol = 1e-12;
        cfg.max_iters = 20_000;
        let gs = gs_ias_solve(&blocks, &priors, &dce, &b, &cfg).unwrap();

        let (aw, bw) = crate::dce::whiten_system(&dce, &a, &b).unwrap();
        let plain = ias_solve(
            &aw,
            &bw,
            &IasConfig::new(eta, vartheta).tol_x(1e-12).max_iters(20_000),
        )
        .unwrap();
        let stacked = DVector::from_fn(5, |j, _| gs.h[j][0]);
        assert!((&stacked - &plain.x).norm() <= 1e-6 * plain.x.norm());
        for j in 0..5 {
            assert!((gs.theta[j] - plain.theta[j]).abs() <= 1e-6 * plain.theta[j]);
        }
    }

    #[test]
    fn significance_threshold() {
        let dce = DceModel::white(2, 0.5).unwrap();
        let w = vec![DMatrix::identity(2, 1), DMatrix::identity(2, 1)];
        let zero = vec![DVector::zeros(1), DVector::zeros(1)];
        let models = vec![dce.clone(), dce.clone()];
        assert!(threshold_significant(&zero, &w, &models)
            .unwrap()
            .is_empty());
        // trace = 1
        let h = vec![DVector::from_element(1, 2f64.sqrt()), DVector::zeros(1)];
        assert_eq!(threshold_significant(&h, &w, &models).unwrap(), vec![0]);
        let h = vec![DVector::from_element(1, 1.0), DVector::zeros(1)];
        assert!(threshold_significant(&h, &w, &models).unwrap().is_empty());
    }

    #[test]
    fn theta_relevance() {
        assert_eq!(
            relevance_by_theta(&[1.0, 0.29, 0.31], 0.3).unwrap(),
            vec![0, 2]
        );
        assert_eq!(relevance_by_theta(&[2.0, 2.0], 0.3).unwrap(), vec![0, 1]);
        assert_eq!(relevance_by_theta(&[1e-9], 0.99).unwrap(), vec![0]);
        assert!(relevance_by_theta(&[0.0, 0.0], 0.3).is_err());
        let scaled: Vec<f64> = [1.0, 0.29, 0.31].iter().map(|t| t * 37.5).collect();
        assert_eq!(relevance_by_theta(&scaled, 0.3).unwrap(), vec![0, 2]);
    }
}
