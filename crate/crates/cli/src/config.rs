//! Per-subcommand run configurations. Each is one JSON document; command-line
//! flags override individual fields after loading.

use std::fs;
use std::path::{Path, PathBuf};

use dictmatch::compression::{ClusterCompression, Method};
use dictmatch::glitch::GlitchExperimentConfig;
use dictmatch::pipeline::{BuildConfig, ClassifyConfig, IdentifyConfig, MatchConfig, Relevance};
use dictmatch::synth::{ClusteredSpec, ConeSpec, MixtureSpec};
use dictmatch::MatrixFormat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliResult};

/// Reads `path` as JSON, or returns the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn require(path: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| config_err(format!("missing {what} path")))
}

fn core(r: dictmatch::Result<()>) -> CliResult<()> {
    r.map_err(|e| config_err(e.to_string()))
}

fn check(ok: bool, msg: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(msg))
    }
}

fn check_compression(specs: &[ClusterCompression]) -> CliResult<()> {
    check(!specs.is_empty(), "compression needs at least one entry")?;
    for s in specs {
        core(s.rule.validate())?;
        if s.method == Method::Nmf {
            core(s.nmf.validate())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Disjoint clusters of nonnegative bump atoms with sparse mixtures.
    #[default]
    Clustered,
    /// Classes sharing a subspace with distinct principal directions.
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub out: Option<PathBuf>,
    pub kind: SynthKind,
    pub clustered: ClusteredSpec,
    pub mixtures: MixtureSpec,
    pub cone: ConeSpec,
    pub cone_tests: usize,
    pub cone_max_classes: usize,
    pub cone_test_seed: u64,
    pub format: MatrixFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            out: None,
            kind: SynthKind::Clustered,
            clustered: ClusteredSpec::default(),
            mixtures: MixtureSpec::default(),
            cone: ConeSpec::default(),
            cone_tests: 200,
            cone_max_classes: 2,
            cone_test_seed: 1,
            format: MatrixFormat::Csv,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> CliResult<PathBuf> {
        match self.kind {
            SynthKind::Clustered => {
                core(self.clustered.validate())?;
                let (lo, hi) = self.mixtures.coeff_range;
                check(
                    self.mixtures.max_atoms > 0,
                    "mixtures.max_atoms must be positive",
                )?;
                check(
                    lo > 0.0 && hi > lo,
                    "mixtures.coeff_range must satisfy 0 < lo < hi",
                )?;
            }
            SynthKind::Cone => {
                check(
                    (1..=self.cone.n_clusters).contains(&self.cone_max_classes),
                    "cone_max_classes must be in 1..=cone.n_clusters",
                )?;
            }
        }
        require(&self.out, "output directory")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildLibraryConfig {
    pub dictionary: Option<PathBuf>,
    /// Single-column label file; omit to cluster.
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub build: BuildConfig,
}

impl BuildLibraryConfig {
    pub fn validate(&self) -> CliResult<(PathBuf, PathBuf)> {
        check_compression(&self.build.compression)?;
        check(
            self.build.prior_epsilon >= 0.0,
            "build.prior_epsilon must be >= 0",
        )?;
        if let Some(e) = self.build.dce_epsilon {
            check(e > 0.0, "build.dce_epsilon must be positive")?;
        }
        if let Some(c) = &self.build.clustering {
            check(c.k > 0, "build.clustering.k must be positive")?;
        }
        Ok((
            require(&self.dictionary, "dictionary")?,
            require(&self.out, "output directory")?,
        ))
    }
}

fn check_identify(c: &IdentifyConfig) -> CliResult<()> {
    check(
        c.eta >= 0.0 && c.vartheta > 0.0,
        "identify needs eta >= 0 and vartheta > 0",
    )?;
    check(c.max_iters > 0, "identify.max_iters must be positive")?;
    check(
        c.noise_variance >= 0.0,
        "identify.noise_variance must be >= 0",
    )?;
    if let Relevance::ThetaRatio { theta_star } = c.relevance {
        check(
            theta_star > 0.0 && theta_star < 1.0,
            "theta_star must be in (0, 1)",
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchCmdConfig {
    pub library: Option<PathBuf>,
    /// `n x m` matrix, one test vector per column.
    pub data: Option<PathBuf>,
    /// `p x m` generating coefficients in the dictionary's column order.
    pub truth_coefficients: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    /// `I_delta` threshold relative to the largest true coefficient.
    pub delta_rel: f64,
}

impl Default for MatchCmdConfig {
    fn default() -> Self {
        Self {
            library: None,
            data: None,
            truth_coefficients: None,
            out: None,
            matching: MatchConfig::default(),
            delta_rel: 1e-6,
        }
    }
}

impl MatchCmdConfig {
    pub fn validate(&self) -> CliResult<(PathBuf, PathBuf, PathBuf)> {
        check_identify(&self.matching.identify)?;
        let d = &self.matching.deflate;
        check(
            d.eta >= 0.0 && d.threshold > 0.0,
            "deflate needs eta >= 0 and threshold > 0",
        )?;
        check(
            d.noise_variance >= 0.0,
            "deflate.noise_variance must be >= 0",
        )?;
        check(self.delta_rel > 0.0, "delta_rel must be positive")?;
        Ok((
            require(&self.library, "library")?,
            require(&self.data, "data")?,
            require(&self.out, "output directory")?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyCmdConfig {
    pub library: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// Single-column file of true labels, one per test vector.
    pub truth_labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Assumed white-noise standard deviation of the data.
    pub noise_std: f64,
    pub classify: ClassifyConfig,
}

impl Default for ClassifyCmdConfig {
    fn default() -> Self {
        Self {
            library: None,
            data: None,
            truth_labels: None,
            out: None,
            noise_std: 0.0,
            classify: ClassifyConfig::default(),
        }
    }
}

impl ClassifyCmdConfig {
    pub fn validate(&self) -> CliResult<(PathBuf, PathBuf, PathBuf)> {
        check(self.noise_std >= 0.0, "noise_std must be >= 0")?;
        check(
            self.classify.use_dce || self.noise_std > 0.0,
            "classification without DCE needs noise_std > 0",
        )?;
        check(
            self.classify.eta >= 0.0 && self.classify.threshold > 0.0,
            "classify needs eta >= 0 and threshold > 0",
        )?;
        Ok((
            require(&self.library, "library")?,
            require(&self.data, "data")?,
            require(&self.out, "output directory")?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GsIdentifyCmdConfig {
    pub library: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// CSV with one row per test vector listing its true cluster labels.
    pub truth_clusters: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub identify: IdentifyConfig,
    /// Cut-off values for the precision/recall curve.
    pub theta_star_sweep: Vec<f64>,
}

impl Default for GsIdentifyCmdConfig {
    fn default() -> Self {
        Self {
            library: None,
            data: None,
            truth_clusters: None,
            out: None,
            identify: IdentifyConfig::default(),
            theta_star_sweep: (1..20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

impl GsIdentifyCmdConfig {
    pub fn validate(&self) -> CliResult<(PathBuf, PathBuf, PathBuf)> {
        check_identify(&self.identify)?;
        check(
            self.theta_star_sweep.iter().all(|t| *t > 0.0 && *t < 1.0),
            "theta_star_sweep values must be in (0, 1)",
        )?;
        Ok((
            require(&self.library, "library")?,
            require(&self.data, "data")?,
            require(&self.out, "output directory")?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlitchBenchConfig {
    pub out: Option<PathBuf>,
    pub experiment: GlitchExperimentConfig,
}

impl GlitchBenchConfig {
    pub fn validate(&self) -> CliResult<PathBuf> {
        let e = &self.experiment;
        check(
            e.n_train_per_class > 0 && e.n_test > 0,
            "n_train_per_class and n_test must be positive",
        )?;
        check(
            e.sigma_rel >= 0.0 && e.noise_overestimate > 0.0,
            "noise levels must be >= 0",
        )?;
        check(
            e.classify.use_dce || e.sigma_rel > 0.0,
            "classification without DCE needs sigma_rel > 0",
        )?;
        core(e.rank_rule.validate())?;
        core(e.nmf.validate())?;
        core(e.grid.n_samples().map(|_| ()))?;
        require(&self.out, "output directory")
    }
}
