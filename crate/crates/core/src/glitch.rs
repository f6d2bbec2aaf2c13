//! Parametric transient ("glitch") waveforms and the DSSIM classification
//! experiment built on them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{ClusterCompression, Method, NmfOptions, RankRule};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion_matrix};
use crate::pipeline::{build_library, BuildConfig, ClassifyConfig, DssimClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GlitchClass {
    /// Sine-Gaussian.
    SG,
    /// Gaussian.
    G,
    /// Ring-down.
    RD,
}

impl GlitchClass {
    pub const ALL: [GlitchClass; 3] = [GlitchClass::SG, GlitchClass::G, GlitchClass::RD];

    pub fn label(self) -> usize {
        match self {
            GlitchClass::SG => 1,
            GlitchClass::G => 2,
            GlitchClass::RD => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlitchSpec {
    pub class: GlitchClass,
    pub h0: f64,
    /// Hz; absent for the Gaussian class.
    pub f0: Option<f64>,
    pub q: Option<f64>,
    /// Seconds.
    pub tau: f64,
    /// Centre (onset for ring-downs), seconds.
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub fs: f64,
    pub duration: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        Self {
            fs: 16384.0,
            duration: 1.0,
        }
    }
}

impl SamplingGrid {
    pub fn n_samples(&self) -> Result<usize> {
        let n = self.fs * self.duration;
        if !(n >= 1.0) || n.fract() != 0.0 || !n.is_finite() {
            return Err(Error::invalid(format!(
                "fs * T = {n} is not a positive integer"
            )));
        }
        Ok(n as usize)
    }
}

pub const F0_RANGE: (f64, f64) = (40.0, 1500.0);
pub const Q_RANGE: (f64, f64) = (2.0, 20.0);
pub const GAUSSIAN_TAU_RANGE: (f64, f64) = (1e-3, 1e-2);
pub const CENTRE_TIME: f64 = 0.5;

impl GlitchSpec {
    pub fn validate(&self, grid: &SamplingGrid) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.tau > 0.0) {
            return bad(format!("tau {} must be positive", self.tau));
        }
        if !(0.0..=grid.duration).contains(&self.t0) {
            return bad(format!("t0 {} outside [0, {}]", self.t0, grid.duration));
        }
        match (self.class, self.f0, self.q) {
            (GlitchClass::G, _, _) => Ok(()),
            (_, Some(f0), Some(q)) => {
                if !(F0_RANGE.0..=F0_RANGE.1).contains(&f0) {
                    return bad(format!("f0 {f0} outside [40, 1500]"));
                }
                if !(Q_RANGE.0..=Q_RANGE.1).contains(&q) {
                    return bad(format!("Q {q} outside [2, 20]"));
                }
                Ok(())
            }
            _ => bad("oscillating glitches need f0 and Q".into()),
        }
    }
}

/// Quality-factor relation `tau = Q / (sqrt(2) pi f0)`.
pub fn tau_from_q(q: f64, f0: f64) -> f64 {
    q / (std::f64::consts::SQRT_2 * std::f64::consts::PI * f0)
}

/// Samples `h(t_i)` at `t_i = i / fs`.
pub fn glitch_waveform(spec: &GlitchSpec, grid: &SamplingGrid) -> Result<DVector<f64>> {
    spec.validate(grid)?;
    let n = grid.n_samples()?;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(DVector::from_fn(n, |i, _| {
        let dt = i as f64 / grid.fs - spec.t0;
        match spec.class {
            GlitchClass::SG => {
                let f0 = spec.f0.unwrap();
                spec.h0 * (two_pi * f0 * dt).sin() * (-dt * dt / (2.0 * spec.tau * spec.tau)).exp()
            }
            GlitchClass::G => spec.h0 * (-dt * dt / (2.0 * spec.tau * spec.tau)).exp(),
            GlitchClass::RD => {
                if dt < 0.0 {
                    0.0
                } else {
                    let f0 = spec.f0.unwrap();
                    spec.h0 * (two_pi * f0 * dt).sin() * (-dt / spec.tau).exp()
                }
            }
        }
    }))
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

/// Draws parameters: log-uniform `f0`, `Q` (and `tau` for Gaussians),
/// `h0 = 1`, `t0 = 0.5 s`.
pub fn sample_glitch_params(class: GlitchClass, rng: &mut impl Rng) -> GlitchSpec {
    match class {
        GlitchClass::G => GlitchSpec {
            class,
            h0: 1.0,
            f0: None,
            q: None,
            tau: log_uniform(rng, GAUSSIAN_TAU_RANGE),
            t0: CENTRE_TIME,
        },
        _ => {
            let f0 = log_uniform(rng, F0_RANGE);
            let q = log_uniform(rng, Q_RANGE);
            GlitchSpec {
                class,
                h0: 1.0,
                f0: Some(f0),
                q: Some(q),
                tau: tau_from_q(q, f0),
                t0: CENTRE_TIME,
            }
        }
    }
}

fn normalize_max_abs(mut v: DVector<f64>) -> DVector<f64> {
    let m = v.amax();
    if m > 0.0 {
        v /= m;
    }
    v
}

/// `n_per_class` atoms of each class, scaled to unit peak amplitude and
/// labelled SG = 1, G = 2, RD = 3. Each class draws from its own stream of
/// the seeded generator.
pub fn generate_glitch_dictionary(
    n_per_class: usize,
    grid: &SamplingGrid,
    seed: u64,
) -> Result<Dictionary> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be positive"));
    }
    let n = grid.n_samples()?;
    let mut atoms = DMatrix::zeros(n, 3 * n_per_class);
    let mut labels = Vec::with_capacity(3 * n_per_class);
    for (c, class) in GlitchClass::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for i in 0..n_per_class {
            let spec = sample_glitch_params(class, &mut rng);
            let w = normalize_max_abs(glitch_waveform(&spec, grid)?);
            atoms.set_column(c * n_per_class + i, &w);
            labels.push(class.label());
        }
    }
    Dictionary::with_labels(atoms, labels)
}

/// Adds white Gaussian noise of standard deviation `sigma_rel` (relative to
/// the unit peak amplitude) and rescales to unit peak amplitude.
pub fn add_noise_and_normalize(
    signal: &DVector<f64>,
    sigma_rel: f64,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let noisy = add_noise(signal, sigma_rel, rng)?;
    Ok(normalize_max_abs(noisy))
}

fn add_noise(signal: &DVector<f64>, sigma_rel: f64, rng: &mut impl Rng) -> Result<DVector<f64>> {
    if !(sigma_rel >= 0.0) {
        return Err(Error::invalid("noise level must be >= 0"));
    }
    if sigma_rel == 0.0 {
        return Ok(signal.clone());
    }
    let normal = Normal::new(0.0, sigma_rel).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(signal.map(|v| v + rng.sample(normal)))
}

/// Noisy test signals in round-robin class order with their true labels.
pub fn generate_test_signals(
    n_test: usize,
    sigma_rel: f64,
    grid: &SamplingGrid,
    seed: u64,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signals = Vec::with_capacity(n_test);
    let mut labels = Vec::with_capacity(n_test);
    for i in 0..n_test {
        let class = GlitchClass::ALL[i % 3];
        let spec = sample_glitch_params(class, &mut rng);
        let clean = normalize_max_abs(glitch_waveform(&spec, grid)?);
        signals.push(add_noise_and_normalize(&clean, sigma_rel, &mut rng)?);
        labels.push(class.label());
    }
    Ok((signals, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlitchExperimentConfig {
    pub n_train_per_class: usize,
    pub n_test: usize,
    pub sigma_rel: f64,
    /// The classifier assumes noise of `noise_overestimate * sigma_rel`.
    pub noise_overestimate: f64,
    pub rank_rule: RankRule,
    pub method: Method,
    pub nmf: NmfOptions,
    pub grid: SamplingGrid,
    pub train_seed: u64,
    pub test_seed: u64,
    pub dce_epsilon: Option<f64>,
    pub classify: ClassifyConfig,
}

impl Default for GlitchExperimentConfig {
    fn default() -> Self {
        Self {
            n_train_per_class: 100,
            n_test: 600,
            sigma_rel: 0.05,
            noise_overestimate: 1.05,
            rank_rule: RankRule {
                k_max: 50,
                delta: 1e-3,
            },
            method: Method::Nmf,
            nmf: NmfOptions {
                max_outer: 5,
                inner_max_iters: 10,
                inner_tol: 1e-4,
                tol: 1e-3,
                ..NmfOptions::default()
            },
            grid: SamplingGrid::default(),
            train_seed: 1,
            test_seed: 2,
            dce_epsilon: None,
            classify: ClassifyConfig::default(),
        }
    }
}

impl GlitchExperimentConfig {
    /// Per-class compression: nonnegative code book only for the Gaussian class.
    pub fn compression_specs(&self) -> Vec<ClusterCompression> {
        GlitchClass::ALL
            .iter()
            .map(|class| match self.method {
                Method::Pca => ClusterCompression::pca(self.rank_rule),
                Method::Nmf => ClusterCompression::nmf(
                    self.rank_rule,
                    NmfOptions {
                        nonneg_w: *class == GlitchClass::G,
                        ..self.nmf.clone()
                    },
                ),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlitchReport {
    /// Rows = predicted class, columns = true class, in label order.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    /// Fraction of each true class classified correctly.
    pub per_class_rates: Vec<f64>,
    /// Code book size per class.
    pub ranks: Vec<usize>,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
}

/// Builds a library from a labelled glitch dictionary and classifies noisy
/// test signals by smallest DSSIM.
pub fn run_glitch_experiment(cfg: &GlitchExperimentConfig) -> Result<GlitchReport> {
    if cfg.n_test == 0 {
        return Err(Error::invalid("n_test must be positive"));
    }
    let dict = generate_glitch_dictionary(cfg.n_train_per_class, &cfg.grid, cfg.train_seed)?;
    let build = BuildConfig {
        compression: cfg.compression_specs(),
        dce_epsilon: cfg.dce_epsilon,
        ..Default::default()
    };
    let lib = build_library(&dict, &build)?;
    let (signals, truth) =
        generate_test_signals(cfg.n_test, cfg.sigma_rel, &cfg.grid, cfg.test_seed)?;
    let classifier =
        DssimClassifier::new(&lib, cfg.noise_overestimate * cfg.sigma_rel, &cfg.classify)?;
    let predicted = signals
        .par_iter()
        .map(|b| classifier.classify(b).map(|c| c.label))
        .collect::<Result<Vec<usize>>>()?;
    let confusion = confusion_matrix(&truth, &predicted, 3)?;
    let per_class_rates = (0..3)
        .map(|c| {
            let total: usize = confusion.column(c).iter().sum();
            if total == 0 {
                0.0
            } else {
                confusion[(c, c)] as f64 / total as f64
            }
        })
        .collect();
    Ok(GlitchReport {
        confusion: confusion
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        accuracy: accuracy(&confusion),
        per_class_rates,
        ranks: lib.factors.iter().map(|f| f.rank()).collect(),
        truth,
        predicted,
    })
}
