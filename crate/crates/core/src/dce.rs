//! Statistics of the dictionary compression error and the whitening they
//! induce.
//!
//! The covariance `C = (1/p) sum (m - mu)(m - mu)^T + eps I` has rank at most
//! `p` above the `eps` floor, so it is kept in spectral form
//! `C = U diag(lambda) U^T + eps (I - U U^T)`. Whitening then costs `O(n r)`
//! per vector and never forms an `n x n` matrix, which matters for long
//! signals.

use nalgebra::{DMatrix, DVector};

use crate::compression::LowRankFactors;
use crate::error::{Error, Result};
use crate::linalg::{svd_desc, sym_eigen_desc};

/// Gaussian model of compression residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct DceModel {
    mean: DVector<f64>,
    /// Orthonormal directions (n x r) carrying eigenvalues other than `epsilon`.
    basis: DMatrix<f64>,
    /// Covariance eigenvalues along `basis`, descending.
    eigenvalues: DVector<f64>,
    /// Eigenvalue on the orthogonal complement of `basis`.
    epsilon: f64,
    sample_count: usize,
}

impl DceModel {
    /// Assembles a model from its spectral parts.
    pub fn from_parts(
        mean: DVector<f64>,
        basis: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        epsilon: f64,
        sample_count: usize,
    ) -> Result<Self> {
        let n = mean.len();
        if basis.nrows() != n || basis.ncols() != eigenvalues.len() || eigenvalues.len() > n {
            return Err(Error::dim("DCE basis, eigenvalues and mean disagree"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "DCE epsilon {epsilon} must be positive"
            )));
        }
        if eigenvalues.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("DCE eigenvalues must be positive"));
        }
        if mean.iter().chain(basis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite DCE model entries".into()));
        }
        Ok(Self {
            mean,
            basis,
            eigenvalues,
            epsilon,
            sample_count,
        })
    }

    /// Mean zero, covariance `variance * I`.
    pub fn white(n: usize, variance: f64) -> Result<Self> {
        Self::from_parts(
            DVector::zeros(n),
            DMatrix::zeros(n, 0),
            DVector::zeros(0),
            variance,
            0,
        )
    }

    /// Model with an explicit SPD covariance.
    pub fn from_covariance(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(Error::dim("covariance must be n x n"));
        }
        let (values, vectors) = sym_eigen_desc(covariance);
        let floor = values[n - 1];
        if !(floor > 0.0) {
            return Err(Error::invalid("covariance is not positive definite"));
        }
        Self::from_parts(mean, vectors, values, floor, 0)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.sum() + self.epsilon * (self.dim() - self.eigenvalues.len()) as f64
    }

    /// The same model with `variance * I` added to the covariance.
    pub fn with_added_white_noise(&self, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::invalid("added noise variance must be >= 0"));
        }
        Self::from_parts(
            self.mean.clone(),
            self.basis.clone(),
            self.eigenvalues.add_scalar(variance),
            self.epsilon + variance,
            self.sample_count,
        )
    }

    /// Applies `C^power` for `power` in {-1/2, 1/2, 1}.
    fn apply_power(&self, m: &DMatrix<f64>, power: f64) -> DMatrix<f64> {
        let floor = self.epsilon.powf(power);
        let mut out = m * floor;
        if self.basis.ncols() > 0 {
            let mut coeff = self.basis.tr_mul(m);
            for (i, mut row) in coeff.row_iter_mut().enumerate() {
                row *= self.eigenvalues[i].powf(power) - floor;
            }
            out += &self.basis * coeff;
        }
        out
    }

    /// `C^{-1/2} m`, column by column.
    pub fn whiten_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_power(m, -0.5)
    }

    pub fn whiten_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let out = self.apply_power(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()), -0.5);
        DVector::from_column_slice(out.as_slice())
    }

    /// Dense covariance; `O(n^2)` memory.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.apply_power(&DMatrix::identity(self.dim(), self.dim()), 1.0)
    }

    /// Dense symmetric inverse square root of the covariance; `O(n^2)` memory.
    pub fn whitener(&self) -> DMatrix<f64> {
        self.apply_power(&DMatrix::identity(self.dim(), self.dim()), -0.5)
    }
}

/// Compression residuals `block - W H`.
pub fn compression_error_samples(
    block: &DMatrix<f64>,
    factors: &LowRankFactors,
) -> Result<DMatrix<f64>> {
    let (n, p) = block.shape();
    if factors.w.nrows() != n || factors.h.ncols() != p || factors.w.ncols() != factors.h.nrows() {
        return Err(Error::dim(format!(
            "block is {n}x{p}, factors are {}x{} and {}x{}",
            factors.w.nrows(),
            factors.w.ncols(),
            factors.h.nrows(),
            factors.h.ncols()
        )));
    }
    Ok(block - &factors.w * &factors.h)
}

/// Default regulariser: `1e-6` times the average unregularised variance,
/// floored at `1e-12`.
pub fn default_epsilon(residuals: &DMatrix<f64>) -> f64 {
    let (n, p) = residuals.shape();
    if n == 0 || p == 0 {
        return 1e-12;
    }
    let mean = residuals.column_mean();
    let total: f64 = residuals
        .column_iter()
        .map(|c| (c - &mean).norm_squared())
        .sum();
    (1e-6 * total / (p as f64 * n as f64)).max(1e-12)
}

/// Fits mean and regularised population covariance of the residual columns.
/// `epsilon = None` selects [`default_epsilon`].
pub fn fit_dce(residuals: &DMatrix<f64>, epsilon: Option<f64>) -> Result<DceModel> {
    let (n, p) = residuals.shape();
    if n == 0 || p == 0 {
        return Err(Error::invalid("DCE needs at least one residual sample"));
    }
    if let Some(i) = residuals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i % n + 1,
            col: i / n + 1,
        });
    }
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(residuals));
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "DCE epsilon {epsilon} must be positive"
        )));
    }
    let mean = residuals.column_mean();
    let mut centred = residuals.clone();
    for mut c in centred.column_iter_mut() {
        c -= &mean;
    }
    centred /= (p as f64).sqrt();

    let (basis, spread) = if p >= n {
        let (values, vectors) = sym_eigen_desc(&(&centred * centred.transpose()));
        (vectors, values.map(|v| v.max(0.0)))
    } else {
        let (u, s, _) = svd_desc(&centred)?;
        (u, s.map(|v| v * v))
    };
    DceModel::from_parts(mean, basis, spread.add_scalar(epsilon), epsilon, p)
}

/// `(C^{-1/2} W, C^{-1/2} (b - mu))`.
pub fn whiten_system(
    model: &DceModel,
    w: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if w.nrows() != model.dim() || b.len() != model.dim() {
        return Err(Error::dim(format!(
            "model dimension {}, operator has {} rows, datum has {}",
            model.dim(),
            w.nrows(),
            b.len()
        )));
    }
    Ok((
        model.whiten_matrix(w),
        model.whiten_vector(&(b - model.mean())),
    ))
}
