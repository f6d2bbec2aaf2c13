//! Iterative Alternating Sequential (IAS) solver for sparse, optionally
//! nonnegative, linear least squares.
//!
//! The model is `b = A x + e` with white unit-variance noise, a conditionally
//! Gaussian prior `x_j ~ N(0, theta_j)` and independent gamma hyperpriors on
//! the variances with shape `beta` and scales `vartheta_j`. The MAP estimate
//! minimises the Gibbs energy
//!
//! ```text
//! E(x, theta) = 1/2 |b - A x|^2 + 1/2 sum x_j^2 / theta_j
//!             - eta sum log theta_j + sum theta_j / vartheta_j,   eta = beta - 3/2
//! ```
//!
//! IAS alternates an exact minimisation over `x` (a Tikhonov problem, solved
//! in priorconditioned coordinates `x = D_theta^{1/2} w`) with the closed-form
//! minimisation over each `theta_j`. As `eta -> 0+` the minimiser approaches
//! the weighted l1 solution with weights `sqrt(2 / vartheta_j)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{median, spd_solve};

/// How the Tikhonov `x`-update is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Cholesky factorisation of the smaller of the primal/dual normal systems.
    #[default]
    Direct,
    /// CGLS on the priorconditioned damped least-squares problem.
    Cgls {
        /// Stop once the data residual norm drops to this level (for whitened
        /// systems, `sqrt(n)` is the discrepancy principle).
        discrepancy: Option<f64>,
        /// Stop once the normal-equation residual falls below this fraction of
        /// its initial value.
        rel_tol: f64,
        max_iters: usize,
    },
}

impl InnerSolver {
    /// CGLS with the discrepancy stop for a whitened `n`-dimensional datum.
    pub fn cgls_discrepancy(n: usize) -> Self {
        InnerSolver::Cgls {
            discrepancy: Some((n as f64).sqrt()),
            rel_tol: 1e-10,
            max_iters: 500,
        }
    }

    pub fn cgls(rel_tol: f64, max_iters: usize) -> Self {
        InnerSolver::Cgls {
            discrepancy: None,
            rel_tol,
            max_iters,
        }
    }
}

/// Hyperparameters and stopping rules for [`ias_solve`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IasConfig {
    /// `eta = beta - 3/2 >= 0`; small values promote sparsity.
    pub eta: f64,
    /// Gamma scale parameters, one per unknown.
    pub vartheta: Vec<f64>,
    pub nonneg: bool,
    pub max_iters: usize,
    /// Stop when `|x_new - x_old| <= tol_x |x_new|`.
    pub tol_x: f64,
    pub inner: InnerSolver,
}

impl IasConfig {
    pub fn new(eta: f64, vartheta: Vec<f64>) -> Self {
        Self {
            eta,
            vartheta,
            nonneg: false,
            max_iters: 500,
            tol_x: 1e-8,
            inner: InnerSolver::Direct,
        }
    }

    pub fn from_beta(beta: f64, vartheta: Vec<f64>) -> Self {
        Self::new(eta_from_beta(beta), vartheta)
    }

    pub fn nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn tol_x(mut self, tol: f64) -> Self {
        self.tol_x = tol;
        self
    }

    pub fn inner(mut self, inner: InnerSolver) -> Self {
        self.inner = inner;
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "eta must be >= 0, got {}",
                self.eta
            )));
        }
        if self.vartheta.len() != p {
            return Err(Error::dim(format!(
                "{} scale parameters for {p} unknowns",
                self.vartheta.len()
            )));
        }
        if let Some(j) = self
            .vartheta
            .iter()
            .position(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(format!(
                "vartheta[{j}] = {} must be positive",
                self.vartheta[j]
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

pub fn eta_from_beta(beta: f64) -> f64 {
    beta - 1.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct IasResult {
    pub x: DVector<f64>,
    pub theta: DVector<f64>,
    /// Gibbs energy after each full iteration.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Evaluates the Gibbs energy at `(x, theta)`.
pub fn gibbs_energy(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    theta: &DVector<f64>,
    eta: f64,
    vartheta: &[f64],
) -> Result<f64> {
    if a.nrows() != b.len() || a.ncols() != x.len() || x.len() != theta.len() {
        return Err(Error::dim("gibbs_energy operand sizes disagree"));
    }
    if vartheta.len() != theta.len() {
        return Err(Error::dim("vartheta length must match theta"));
    }
    if let Some(j) = theta.iter().position(|t| !(*t > 0.0)) {
        return Err(Error::invalid(format!(
            "theta[{j}] = {} is not positive",
            theta[j]
        )));
    }
    let misfit = (b - a * x).norm_squared();
    Ok(0.5 * misfit + prior_energy(x, theta, eta, vartheta))
}

fn prior_energy(x: &DVector<f64>, theta: &DVector<f64>, eta: f64, vartheta: &[f64]) -> f64 {
    let mut e = 0.0;
    for j in 0..x.len() {
        let t = theta[j];
        if x[j] != 0.0 {
            e += 0.5 * x[j] * x[j] / t;
        }
        if eta != 0.0 {
            e -= eta * t.ln();
        }
        e += t / vartheta[j];
    }
    e
}

/// Closed-form minimiser of the Gibbs energy over `theta_j` for fixed `x_j`.
///
/// Solves `dE/dtheta_j = -x^2/(2 theta^2) - eta/theta + 1/vartheta = 0`.
/// The result is floored at the smallest positive normal float so that
/// `eta = 0, x_j = 0` still yields a usable (positive) variance.
pub fn theta_update(x_j: f64, eta: f64, vartheta_j: f64) -> f64 {
    let t = 0.5 * vartheta_j * (eta + (eta * eta + 2.0 * x_j * x_j / vartheta_j).sqrt());
    t.max(f64::MIN_POSITIVE)
}

pub fn project_nonnegative(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.max(0.0))
}

/// Scale parameters proportional to `1 / |a_j|^2`, normalised so that the
/// median equals `target_snr^2`.
pub fn sensitivity_scales(a: &DMatrix<f64>, target_snr: f64) -> Result<Vec<f64>> {
    if !(target_snr > 0.0) {
        return Err(Error::invalid("target_snr must be positive"));
    }
    let inv: Vec<f64> = a
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n2 = c.norm_squared();
            if n2 > 0.0 {
                Ok(1.0 / n2)
            } else {
                Err(Error::ZeroColumn(j))
            }
        })
        .collect::<Result<_>>()?;
    let scale = target_snr * target_snr / median(&inv);
    Ok(inv.into_iter().map(|v| v * scale).collect())
}

/// Scale parameters `2 / (tau^2 |a_j|^2)`.
///
/// Same column-sensitivity profile as [`sensitivity_scales`], normalised so
/// that in the l1 limit a component switches on once the data correlation
/// `|a_j^T r| / |a_j|` exceeds `tau`. For whitened systems `tau` is measured
/// in noise standard deviations, which makes the choice scale-free.
pub fn threshold_scales(a: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    a.column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n2 = c.norm_squared();
            if n2 > 0.0 {
                Ok(2.0 / (tau * tau * n2))
            } else {
                Err(Error::ZeroColumn(j))
            }
        })
        .collect()
}

/// Like [`threshold_scales`] but zero columns receive the largest scale
/// found among the nonzero ones instead of an error. Used where a factor may
/// legitimately lose a column during alternating updates.
pub(crate) fn threshold_scales_lenient(a: &DMatrix<f64>, tau: f64) -> Vec<f64> {
    let scale = 2.0 / (tau * tau);
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let fallback = norms
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .map(|v| scale / v)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        })
        .unwrap_or(scale);
    norms
        .into_iter()
        .map(|v| if v > 0.0 { scale / v } else { fallback })
        .collect()
}

/// A forward operator with cached products reused across right-hand sides.
///
/// When `A` has at least as many rows as columns the Gram matrix `A^T A` is
/// formed once, after which each direct `x`-update costs `O(p^3)` regardless
/// of `n`.
#[derive(Debug, Clone)]
pub struct PreparedOperator {
    a: DMatrix<f64>,
    gram: Option<DMatrix<f64>>,
}

impl PreparedOperator {
    pub fn new(a: DMatrix<f64>) -> Self {
        let gram = (a.nrows() >= a.ncols()).then(|| a.tr_mul(&a));
        Self { a, gram }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// Runs IAS for one right-hand side.
    pub fn solve(&self, b: &DVector<f64>, cfg: &IasConfig) -> Result<IasResult> {
        IasSolver::new(self, b, cfg)?.run()
    }
}

/// Solves the sparse (optionally nonnegative) least-squares problem by IAS.
pub fn ias_solve(a: &DMatrix<f64>, b: &DVector<f64>, cfg: &IasConfig) -> Result<IasResult> {
    PreparedOperator::new(a.clone()).solve(b, cfg)
}

/// Minimiser of `|b - A x|^2 + sum x_j^2 / theta_j`.
pub fn x_update(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    theta: &DVector<f64>,
    inner: InnerSolver,
) -> Result<DVector<f64>> {
    if a.nrows() != b.len() || a.ncols() != theta.len() {
        return Err(Error::dim("x_update operand sizes disagree"));
    }
    if let Some(j) = theta.iter().position(|t| !(*t > 0.0)) {
        return Err(Error::invalid(format!(
            "theta[{j}] = {} is not positive",
            theta[j]
        )));
    }
    let op = PreparedOperator::new(a.clone());
    let rhs = RightHandSide::new(&op, b);
    tikhonov(&op, &rhs, theta, inner)
}

struct RightHandSide<'a> {
    b: &'a DVector<f64>,
    atb: DVector<f64>,
    btb: f64,
}

impl<'a> RightHandSide<'a> {
    fn new(op: &PreparedOperator, b: &'a DVector<f64>) -> Self {
        Self {
            b,
            atb: op.a.tr_mul(b),
            btb: b.norm_squared(),
        }
    }
}

fn tikhonov(
    op: &PreparedOperator,
    rhs: &RightHandSide<'_>,
    theta: &DVector<f64>,
    inner: InnerSolver,
) -> Result<DVector<f64>> {
    let sqrt_theta = theta.map(f64::sqrt);
    let x = match inner {
        InnerSolver::Direct => match &op.gram {
            Some(gram) => {
                // (S G S + I) w = S A^T b,  x = S w
                let p = gram.nrows();
                let mut m =
                    DMatrix::from_fn(p, p, |i, j| sqrt_theta[i] * gram[(i, j)] * sqrt_theta[j]);
                for i in 0..p {
                    m[(i, i)] += 1.0;
                }
                let r = rhs.atb.component_mul(&sqrt_theta);
                spd_solve(m, &r)?.component_mul(&sqrt_theta)
            }
            None => {
                // dual form: x = D A^T (A D A^T + I)^{-1} b
                let mut scaled = op.a.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= sqrt_theta[j];
                }
                let mut m = &scaled * scaled.transpose();
                for i in 0..m.nrows() {
                    m[(i, i)] += 1.0;
                }
                let y = spd_solve(m, rhs.b)?;
                scaled.tr_mul(&y).component_mul(&sqrt_theta)
            }
        },
        InnerSolver::Cgls {
            discrepancy,
            rel_tol,
            max_iters,
        } => cgls_damped(&op.a, rhs.b, &sqrt_theta, discrepancy, rel_tol, max_iters)?
            .component_mul(&sqrt_theta),
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "x-update produced non-finite values".into(),
        ));
    }
    Ok(x)
}

/// CGLS for `min |b - A S w|^2 + |w|^2` with `S = diag(scale)`.
fn cgls_damped(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    scale: &DVector<f64>,
    discrepancy: Option<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    let p = a.ncols();
    let apply = |v: &DVector<f64>| a * v.component_mul(scale);
    let apply_t = |u: &DVector<f64>| a.tr_mul(u).component_mul(scale);

    let mut w = DVector::zeros(p);
    let mut r = b.clone();
    let mut s = apply_t(&r);
    let mut dir = s.clone();
    let mut gamma = s.norm_squared();
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return Ok(w);
    }
    for _ in 0..max_iters {
        let q = apply(&dir);
        let delta = q.norm_squared() + dir.norm_squared();
        if delta <= 0.0 || !delta.is_finite() {
            return Err(Error::Numerical("CGLS breakdown".into()));
        }
        let alpha = gamma / delta;
        w.axpy(alpha, &dir, 1.0);
        r.axpy(-alpha, &q, 1.0);
        s = apply_t(&r) - &w;
        let gamma_new = s.norm_squared();
        if let Some(level) = discrepancy {
            if r.norm() <= level {
                break;
            }
        }
        if gamma_new.sqrt() <= rel_tol * gamma0.sqrt() {
            break;
        }
        let beta = gamma_new / gamma;
        dir = &s + dir * beta;
        gamma = gamma_new;
    }
    Ok(w)
}

/// Step-by-step IAS driver; [`PreparedOperator::solve`] runs it to completion.
pub struct IasSolver<'a> {
    op: &'a PreparedOperator,
    rhs: RightHandSide<'a>,
    cfg: &'a IasConfig,
    x: DVector<f64>,
    theta: DVector<f64>,
}

impl<'a> IasSolver<'a> {
    pub fn new(op: &'a PreparedOperator, b: &'a DVector<f64>, cfg: &'a IasConfig) -> Result<Self> {
        if b.len() != op.nrows() {
            return Err(Error::dim(format!(
                "right-hand side has length {}, operator has {} rows",
                b.len(),
                op.nrows()
            )));
        }
        cfg.validate(op.ncols())?;
        Ok(Self {
            op,
            rhs: RightHandSide::new(op, b),
            cfg,
            x: DVector::zeros(op.ncols()),
            theta: DVector::from_column_slice(&cfg.vartheta),
        })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Tikhonov update of `x` for the current `theta` (projected if nonnegative).
    pub fn x_step(&mut self) -> Result<()> {
        let x = tikhonov(self.op, &self.rhs, &self.theta, self.cfg.inner)?;
        self.x = if self.cfg.nonneg {
            project_nonnegative(&x)
        } else {
            x
        };
        Ok(())
    }

    pub fn theta_step(&mut self) {
        for j in 0..self.theta.len() {
            self.theta[j] = theta_update(self.x[j], self.cfg.eta, self.cfg.vartheta[j]);
        }
    }

    /// Gibbs energy at the current iterate.
    pub fn energy(&self) -> f64 {
        0.5 * self.misfit_sq()
            + prior_energy(&self.x, &self.theta, self.cfg.eta, &self.cfg.vartheta)
    }

    fn misfit_sq(&self) -> f64 {
        match &self.op.gram {
            Some(gram) => {
                let v =
                    self.rhs.btb - 2.0 * self.x.dot(&self.rhs.atb) + (gram * &self.x).dot(&self.x);
                v.max(0.0)
            }
            None => (self.rhs.b - &self.op.a * &self.x).norm_squared(),
        }
    }

    pub fn run(mut self) -> Result<IasResult> {
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.cfg.max_iters {
            let previous = self.x.clone();
            self.x_step()?;
            self.theta_step();
            iterations += 1;
            trace.push(self.energy());

            let change = (&self.x - &previous).norm();
            let size = self.x.norm();
            if change <= self.cfg.tol_x * size || (size == 0.0 && change == 0.0) {
                converged = true;
                break;
            }
        }
        Ok(IasResult {
            x: self.x,
            theta: self.theta,
            energy_trace: trace,
            iterations,
            converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on dE/dtheta for the scalar energy, independent of the closed form.
    fn stationary_theta(x: f64, eta: f64, vartheta: f64) -> f64 {
        let grad = |t: f64| -x * x / (2.0 * t * t) - eta / t + 1.0 / vartheta;
        let (mut lo, mut hi) = (1e-300_f64, 1.0);
        while grad(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if grad(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn theta_update_zero_coefficient() {
        assert!((theta_update(0.0, 0.1, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn theta_update_matches_root_finder() {
        // values frozen from the bisection oracle above
        let t = theta_update(2.0, 0.0, 1.0);
        assert!((t - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((t - stationary_theta(2.0, 0.0, 1.0)).abs() < 1e-12);

        let t = theta_update(1.0, 0.5, 2.0);
        assert!((t - 1.618_033_988_749_895).abs() < 1e-12);
        assert!((t - stationary_theta(1.0, 0.5, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gibbs_energy_hand_values() {
        // x = 0, theta = vartheta, b = 0: -eta sum log vartheta + p
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let vt = vec![0.5, 2.0, 3.0];
        let eta = 0.2;
        let e = gibbs_energy(
            &a,
            &DVector::zeros(2),
            &DVector::zeros(3),
            &DVector::from_column_slice(&vt),
            eta,
            &vt,
        )
        .unwrap();
        let expected = -eta * vt.iter().map(|v| v.ln()).sum::<f64>() + 3.0;
        assert!((e - expected).abs() < 1e-14);

        let one = DMatrix::identity(1, 1);
        let v1 = DVector::from_element(1, 1.0);
        let e = gibbs_energy(&one, &v1, &v1, &v1, 0.0, &[1.0]).unwrap();
        assert!((e - 1.5).abs() < 1e-15);
    }

    #[test]
    fn gibbs_energy_rejects_nonpositive_theta() {
        let one = DMatrix::identity(1, 1);
        let v1 = DVector::from_element(1, 1.0);
        let z = DVector::zeros(1);
        assert!(gibbs_energy(&one, &v1, &v1, &z, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn x_update_limits() {
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let big = DVector::from_element(3, 1e12);
        let x = x_update(&a, &b, &big, InnerSolver::Direct).unwrap();
        assert!((&x - &b).norm() <= 1e-5 * b.norm());

        let tiny = DVector::from_element(3, 1e-12);
        let x = x_update(&a, &b, &tiny, InnerSolver::Direct).unwrap();
        assert!(x.norm() < 1e-10);

        let one = DMatrix::identity(1, 1);
        let x = x_update(
            &one,
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, 1.0),
            InnerSolver::Direct,
        )
        .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn x_update_forms_agree() {
        // tall (primal), wide (dual) and CGLS must give the same minimiser
        let tall = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let wide = tall.transpose();
        for a in [tall, wide] {
            let b = DVector::from_fn(a.nrows(), |i, _| (i as f64).cos());
            let theta = DVector::from_fn(a.ncols(), |j, _| 0.3 + j as f64);
            let direct = x_update(&a, &b, &theta, InnerSolver::Direct).unwrap();
            let cg = x_update(&a, &b, &theta, InnerSolver::cgls(1e-14, 100)).unwrap();
            assert!((&direct - &cg).norm() < 1e-10);
            // normal equations: (A^T A + D^-1) x = A^T b
            let mut m = a.tr_mul(&a);
            for j in 0..theta.len() {
                m[(j, j)] += 1.0 / theta[j];
            }
            assert!((m * &direct - a.tr_mul(&b)).norm() < 1e-10);
        }
    }

    #[test]
    fn projection() {
        let x = DVector::from_column_slice(&[1.0, -2.0, 3.0]);
        assert_eq!(project_nonnegative(&x).as_slice(), &[1.0, 0.0, 3.0]);
        let neg = DVector::from_column_slice(&[-1.0, -0.1]);
        assert_eq!(project_nonnegative(&neg), DVector::zeros(2));
    }

    #[test]
    fn sensitivity_scaling() {
        let q = DMatrix::<f64>::identity(4, 3);
        let v = sensitivity_scales(&q, 1.0).unwrap();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-15));

        let mut a = DMatrix::<f64>::identity(3, 3);
        a.column_mut(1).scale_mut(2.0);
        let v = sensitivity_scales(&a, 1.0).unwrap();
        assert!((v[1] - v[0] / 4.0).abs() < 1e-15);

        let single = DMatrix::from_element(3, 1, 5.0);
        assert_eq!(sensitivity_scales(&single, 3.0).unwrap(), vec![9.0]);

        let mut z = DMatrix::<f64>::identity(3, 2);
        z.column_mut(1).fill(0.0);
        assert!(matches!(
            sensitivity_scales(&z, 1.0),
            Err(Error::ZeroColumn(1))
        ));
        let lenient = threshold_scales_lenient(&z, 1.0);
        assert!(lenient.iter().all(|v| *v > 0.0));
        assert!(matches!(
            threshold_scales(&z, 1.0),
            Err(Error::ZeroColumn(1))
        ));

        // threshold normalisation: tau = 1 on a unit column gives vartheta = 2
        let t = threshold_scales(&DMatrix::<f64>::identity(2, 2), 1.0).unwrap();
        assert_eq!(t, vec![2.0, 2.0]);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let a = DMatrix::from_fn(4, 6, |i, j| ((i + 2 * j) as f64).cos());
        let vt = vec![0.7; 6];
        let cfg = IasConfig::new(0.05, vt.clone());
        let r = ias_solve(&a, &DVector::zeros(4), &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.x, DVector::zeros(6));
        for (t, v) in r.theta.iter().zip(&vt) {
            assert!((t - v * 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::zeros(2);
        assert!(ias_solve(&a, &b, &IasConfig::new(-1.0, vec![1.0; 2])).is_err());
        assert!(ias_solve(&a, &b, &IasConfig::new(0.1, vec![1.0; 3])).is_err());
        assert!(ias_solve(&a, &b, &IasConfig::new(0.1, vec![1.0, 0.0])).is_err());
    }
}
