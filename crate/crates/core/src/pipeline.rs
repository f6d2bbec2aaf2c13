//! End-to-end workflow: build a compressed library, pick the clusters a datum
//! needs, and code the datum over the original atoms of those clusters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clustering::{k_medoids, ClusteringConfig};
use crate::compression::{
    compress_partition, ClusterCompression, LowRankFactors, Method, RankRule,
};
use crate::dce::{compression_error_samples, fit_dce, whiten_system, DceModel};
use crate::dictionary::{partition_by_labels, Dictionary, Partition};
use crate::error::{Error, Result};
use crate::group::{
    gs_ias_solve, relevance_by_theta, structural_covariance, threshold_significant, GsConfig,
    StructuralPrior,
};
use crate::ias::{threshold_scales_lenient, IasConfig, InnerSolver, PreparedOperator};
use crate::metrics::{dssim, SsimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    /// Used when the dictionary carries no labels, or when `force_clustering`.
    pub clustering: Option<ClusteringConfig>,
    pub force_clustering: bool,
    /// One entry for all clusters, or one per cluster.
    pub compression: Vec<ClusterCompression>,
    /// DCE regulariser; `None` uses the relative default.
    pub dce_epsilon: Option<f64>,
    pub prior_epsilon: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            clustering: None,
            force_clustering: false,
            compression: vec![ClusterCompression::pca(RankRule::default())],
            dce_epsilon: None,
            prior_epsilon: 1e-6,
        }
    }
}

/// Everything needed to match data against a clustered, compressed
/// dictionary. Columns are stored cluster by cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLibrary {
    pub dictionary: Dictionary,
    pub partition: Partition,
    /// `permutation[stored] = original` column index (0-based).
    pub permutation: Vec<usize>,
    pub factors: Vec<LowRankFactors>,
    pub priors: Vec<StructuralPrior>,
    pub cluster_dce: Vec<DceModel>,
    pub combined_dce: DceModel,
    pub config: BuildConfig,
}

impl CompressedLibrary {
    pub fn n_clusters(&self) -> usize {
        self.partition.n_blocks()
    }

    pub fn dim(&self) -> usize {
        self.dictionary.n_rows()
    }

    pub fn block(&self, j: usize) -> DMatrix<f64> {
        let r = self.partition.block(j);
        self.dictionary
            .atoms()
            .columns(r.start, r.len())
            .into_owned()
    }

    pub fn residuals(&self, j: usize) -> Result<DMatrix<f64>> {
        compression_error_samples(&self.block(j), &self.factors[j])
    }

    /// Residual columns of the clusters in `scope`, side by side.
    pub fn scope_residuals(&self, scope: &[usize]) -> Result<DMatrix<f64>> {
        let blocks = scope
            .iter()
            .map(|&j| self.residuals(j))
            .collect::<Result<Vec<_>>>()?;
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut out = DMatrix::zeros(self.dim(), cols);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.ncols()).copy_from(&b);
            at += b.ncols();
        }
        Ok(out)
    }

    /// Maps a coefficient vector in stored column order to the caller's
    /// original column order.
    pub fn to_original_order(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for (stored, &orig) in self.permutation.iter().enumerate() {
            out[orig] = x[stored];
        }
        out
    }

    pub fn to_stored_order(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |stored, _| x[self.permutation[stored]])
    }
}

/// Partitions (by labels or k-medoids), compresses every cluster, and fits
/// the per-cluster and combined compression-error models.
pub fn build_library(dict: &Dictionary, cfg: &BuildConfig) -> Result<CompressedLibrary> {
    let use_clustering = dict.labels().is_none() || cfg.force_clustering;
    let labelled = match &cfg.clustering {
        Some(c) if use_clustering => {
            let clusters = k_medoids(dict, c)?;
            Dictionary::with_labels(dict.atoms().clone(), clusters.labels)?
        }
        _ if dict.labels().is_some() => dict.clone(),
        _ => return Err(Error::MissingLabels),
    };
    let reordered = partition_by_labels(&labelled)?;
    let factors = compress_partition(
        &reordered.dictionary,
        &reordered.partition,
        &cfg.compression,
    )?;

    let mut lib = CompressedLibrary {
        dictionary: reordered.dictionary,
        partition: reordered.partition,
        permutation: reordered.permutation,
        factors,
        priors: Vec::new(),
        cluster_dce: Vec::new(),
        combined_dce: DceModel::white(1, 1.0)?,
        config: cfg.clone(),
    };
    for j in 0..lib.n_clusters() {
        let f = &lib.factors[j];
        let prior = if f.h.iter().any(|v| *v != 0.0) {
            structural_covariance(&f.h, cfg.prior_epsilon)?
        } else {
            log::warn!(
                "cluster {} has zero coefficients; using an identity prior",
                j + 1
            );
            StructuralPrior::identity(f.rank())
        };
        lib.priors.push(prior);
        lib.cluster_dce
            .push(fit_dce(&lib.residuals(j)?, cfg.dce_epsilon)?);
    }
    let all: Vec<usize> = (0..lib.n_clusters()).collect();
    lib.combined_dce = fit_dce(&lib.scope_residuals(&all)?, cfg.dce_epsilon)?;
    Ok(lib)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Relevance {
    /// Keep clusters with `theta_j / max theta >= theta_star`.
    ThetaRatio { theta_star: f64 },
    /// Keep clusters whose reconstruction energy exceeds their DCE trace.
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Structural,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyConfig {
    pub eta: f64,
    pub vartheta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub relevance: Relevance,
    pub prior: PriorKind,
    /// Variance of white measurement noise added to the combined DCE model.
    pub noise_variance: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            vartheta: 1.0,
            max_iters: 500,
            tol: 1e-8,
            relevance: Relevance::ThetaRatio { theta_star: 0.3 },
            prior: PriorKind::Structural,
            noise_variance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    /// Selected clusters, 0-based, ascending.
    pub selected: Vec<usize>,
    pub theta: Vec<f64>,
    pub h: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Group-sparse selection of the clusters needed to explain `b`.
pub fn identify_clusters(
    lib: &CompressedLibrary,
    b: &DVector<f64>,
    cfg: &IdentifyConfig,
) -> Result<Identification> {
    let k = lib.n_clusters();
    let w: Vec<DMatrix<f64>> = lib.factors.iter().map(|f| f.w.clone()).collect();
    let priors: Vec<StructuralPrior> = match cfg.prior {
        PriorKind::Structural => lib.priors.clone(),
        PriorKind::Identity => lib
            .factors
            .iter()
            .map(|f| StructuralPrior::identity(f.rank()))
            .collect(),
    };
    let dce = lib
        .combined_dce
        .with_added_white_noise(cfg.noise_variance)?;
    let mut gs = GsConfig::uniform(k, cfg.eta, cfg.vartheta);
    gs.max_iters = cfg.max_iters;
    gs.tol = cfg.tol;
    let r = gs_ias_solve(&w, &priors, &dce, b, &gs)?;
    let selected = match cfg.relevance {
        Relevance::ThetaRatio { theta_star } => {
            if !(theta_star > 0.0 && theta_star < 1.0) {
                return Err(Error::invalid(format!(
                    "theta_star {theta_star} not in (0, 1)"
                )));
            }
            relevance_by_theta(&r.theta, theta_star)?
        }
        Relevance::Trace => threshold_significant(&r.h, &w, &lib.cluster_dce)?,
    };
    Ok(Identification {
        selected,
        theta: r.theta,
        h: r.h,
        iterations: r.iterations,
        converged: r.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeflateConfig {
    pub eta: f64,
    /// l1-limit activation level in whitened units (noise standard deviations).
    pub threshold: f64,
    pub nonneg: bool,
    pub max_iters: usize,
    pub tol_x: f64,
    pub inner: InnerSolver,
    pub noise_variance: f64,
}

impl Default for DeflateConfig {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            threshold: 1.0,
            nonneg: true,
            max_iters: 2000,
            tol_x: 1e-8,
            inner: InnerSolver::Direct,
            noise_variance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Selected clusters, 0-based.
    pub selected: Vec<usize>,
    /// Coefficients over all stored columns; zero outside the selected clusters.
    pub coefficients: DVector<f64>,
    /// `|b - D x|`.
    pub residual_norm: f64,
    pub theta: Vec<f64>,
    pub gs_iterations: usize,
    pub ias_iterations: usize,
    pub final_energy: Option<f64>,
}

impl MatchResult {
    fn empty(lib: &CompressedLibrary, b: &DVector<f64>, id: Option<&Identification>) -> Self {
        Self {
            selected: Vec::new(),
            coefficients: DVector::zeros(lib.dictionary.n_atoms()),
            residual_norm: b.norm(),
            theta: id.map(|i| i.theta.clone()).unwrap_or_default(),
            gs_iterations: id.map_or(0, |i| i.iterations),
            ias_iterations: 0,
            final_energy: None,
        }
    }

    /// JSON summary with 1-based cluster labels and original column indices.
    pub fn to_json(&self, lib: &CompressedLibrary) -> serde_json::Value {
        let x = lib.to_original_order(&self.coefficients);
        let nonzero: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i + 1, *v))
            .collect();
        serde_json::json!({
            "selected_clusters": self.selected.iter().map(|&j| lib.partition.block_labels()[j]).collect::<Vec<_>>(),
            "theta": self.theta,
            "residual_norm": self.residual_norm,
            "nonzero_coefficients": nonzero,
            "gs_iterations": self.gs_iterations,
            "ias_iterations": self.ias_iterations,
            "final_energy": self.final_energy,
        })
    }
}

/// Sparse coding of `b` over the original atoms of the clusters in `scope`,
/// whitened by the compression-error model refitted on that scope.
pub fn deflated_solve(
    lib: &CompressedLibrary,
    scope: &[usize],
    b: &DVector<f64>,
    cfg: &DeflateConfig,
) -> Result<MatchResult> {
    if scope.is_empty() {
        return Err(Error::invalid("deflation scope is empty"));
    }
    if b.len() != lib.dim() {
        return Err(Error::dim(format!(
            "datum length {} vs dictionary rows {}",
            b.len(),
            lib.dim()
        )));
    }
    let mut scope = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    if let Some(j) = scope.iter().find(|&&j| j >= lib.n_clusters()) {
        return Err(Error::invalid(format!("cluster index {j} out of range")));
    }
    let dce = fit_dce(&lib.scope_residuals(&scope)?, lib.config.dce_epsilon)?
        .with_added_white_noise(cfg.noise_variance)?;
    let columns = lib.partition.columns_of(&scope);
    let d_j = lib.dictionary.select_columns(&columns);
    let (a, bw) = whiten_system(&dce, &d_j, b)?;
    let ias = IasConfig::new(cfg.eta, threshold_scales_lenient(&a, cfg.threshold))
        .nonneg(cfg.nonneg)
        .max_iters(cfg.max_iters)
        .tol_x(cfg.tol_x)
        .inner(cfg.inner);
    let r = PreparedOperator::new(a).solve(&bw, &ias)?;
    let mut x = DVector::zeros(lib.dictionary.n_atoms());
    for (i, &c) in columns.iter().enumerate() {
        x[c] = r.x[i];
    }
    Ok(MatchResult {
        selected: scope,
        residual_norm: (b - &d_j * &r.x).norm(),
        coefficients: x,
        theta: Vec::new(),
        gs_iterations: 0,
        ias_iterations: r.iterations,
        final_energy: r.energy_trace.last().copied(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub identify: IdentifyConfig,
    pub deflate: DeflateConfig,
}

/// Identification followed by the deflated solve. An empty selection is
/// reported as such, with zero coefficients.
pub fn match_datum(
    lib: &CompressedLibrary,
    b: &DVector<f64>,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    let id = identify_clusters(lib, b, &cfg.identify)?;
    if id.selected.is_empty() {
        log::info!("no cluster passed the relevance rule");
        return Ok(MatchResult::empty(lib, b, Some(&id)));
    }
    let mut result = deflated_solve(lib, &id.selected, b, &cfg.deflate)?;
    result.theta = id.theta;
    result.gs_iterations = id.iterations;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub eta: f64,
    pub threshold: f64,
    /// Constrain codes to be nonnegative. Only applied to NMF factors, since
    /// PCA codes take both signs.
    pub nonneg: bool,
    pub max_iters: usize,
    pub tol_x: f64,
    /// Whiten with the per-cluster compression-error model; when false only
    /// the white noise model is used.
    pub use_dce: bool,
    pub ssim: SsimParams,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            threshold: 1.0,
            nonneg: true,
            max_iters: 200,
            tol_x: 1e-6,
            use_dce: true,
            ssim: SsimParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// 0-based cluster index with the smallest DSSIM.
    pub cluster: usize,
    /// The cluster's label.
    pub label: usize,
    pub dssim: Vec<f64>,
}

/// Per-cluster fits prepared once for many data with the same noise level.
pub struct DssimClassifier<'a> {
    lib: &'a CompressedLibrary,
    models: Vec<DceModel>,
    operators: Vec<PreparedOperator>,
    configs: Vec<IasConfig>,
    ssim: SsimParams,
}

impl<'a> DssimClassifier<'a> {
    /// `noise_std` is the (over)estimated standard deviation of white noise
    /// in the data; its variance is added to each cluster's error model.
    pub fn new(lib: &'a CompressedLibrary, noise_std: f64, cfg: &ClassifyConfig) -> Result<Self> {
        if !(noise_std >= 0.0) {
            return Err(Error::invalid("noise standard deviation must be >= 0"));
        }
        let var = noise_std * noise_std;
        let mut models = Vec::new();
        let mut operators = Vec::new();
        let mut configs = Vec::new();
        for j in 0..lib.n_clusters() {
            let model = if cfg.use_dce {
                lib.cluster_dce[j].with_added_white_noise(var)?
            } else {
                if !(var > 0.0) {
                    return Err(Error::invalid(
                        "classification without DCE needs a positive noise level",
                    ));
                }
                DceModel::white(lib.dim(), var)?
            };
            let a = model.whiten_matrix(&lib.factors[j].w);
            configs.push(
                IasConfig::new(cfg.eta, threshold_scales_lenient(&a, cfg.threshold))
                    .nonneg(cfg.nonneg && lib.factors[j].method == Method::Nmf)
                    .max_iters(cfg.max_iters)
                    .tol_x(cfg.tol_x),
            );
            operators.push(PreparedOperator::new(a));
            models.push(model);
        }
        Ok(Self {
            lib,
            models,
            operators,
            configs,
            ssim: cfg.ssim,
        })
    }

    /// Fitted reconstruction `W_j h_j` of `b` for cluster `j`.
    pub fn reconstruct(&self, j: usize, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.lib.dim() {
            return Err(Error::dim(format!(
                "datum length {} vs {}",
                b.len(),
                self.lib.dim()
            )));
        }
        let model = &self.models[j];
        let bw = model.whiten_vector(&(b - model.mean()));
        let h = self.operators[j].solve(&bw, &self.configs[j])?.x;
        Ok(&self.lib.factors[j].w * h)
    }

    pub fn classify(&self, b: &DVector<f64>) -> Result<Classification> {
        let scores = (0..self.lib.n_clusters())
            .map(|j| dssim(b, &self.reconstruct(j, b)?, &self.ssim))
            .collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for (j, s) in scores.iter().enumerate() {
            if *s < scores[best] {
                best = j;
            }
        }
        Ok(Classification {
            cluster: best,
            label: self.lib.partition.block_labels()[best],
            dssim: scores,
        })
    }
}

/// One-off DSSIM classification; see [`DssimClassifier`] for batches.
pub fn classify_dssim(
    lib: &CompressedLibrary,
    b: &DVector<f64>,
    noise_std: f64,
    cfg: &ClassifyConfig,
) -> Result<Classification> {
    DssimClassifier::new(lib, noise_std, cfg)?.classify(b)
}
