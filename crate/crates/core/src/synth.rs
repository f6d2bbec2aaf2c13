//! Synthetic dictionaries with known cluster structure and test data with
//! ground truth.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Clusters live on disjoint coordinate regions. Each cluster owns a fixed
/// set of Gaussian bumps and every atom is a positive combination of a few
/// of them, so a cluster has rank `bumps_per_cluster`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteredSpec {
    pub n_clusters: usize,
    pub atoms_per_cluster: usize,
    pub bumps_per_cluster: usize,
    pub bumps_per_atom: usize,
    /// Samples per cluster region.
    pub region_len: usize,
    /// Bump standard deviation in samples.
    pub bump_width: f64,
    pub seed: u64,
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        Self {
            n_clusters: 4,
            atoms_per_cluster: 200,
            bumps_per_cluster: 20,
            bumps_per_atom: 3,
            region_len: 64,
            bump_width: 1.0,
            seed: 0,
        }
    }
}

impl ClusteredSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.n_clusters == 0 || self.atoms_per_cluster == 0 {
            return bad("need at least one cluster and one atom per cluster");
        }
        if self.bumps_per_cluster == 0 || self.bumps_per_cluster > self.region_len {
            return bad("bumps_per_cluster must be in 1..=region_len");
        }
        if self.bumps_per_atom == 0 || self.bumps_per_atom > self.bumps_per_cluster {
            return bad("bumps_per_atom must be in 1..=bumps_per_cluster");
        }
        if !(self.bump_width > 0.0) {
            return bad("bump_width must be positive");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_clusters * self.region_len
    }
}

/// Unit-norm nonnegative atoms labelled `1..=n_clusters`, stored cluster by
/// cluster.
pub fn generate_clustered_dictionary(spec: &ClusteredSpec) -> Result<Dictionary> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.region_len;
    let p = spec.n_clusters * spec.atoms_per_cluster;
    let mut atoms = DMatrix::zeros(spec.dim(), p);
    let mut labels = Vec::with_capacity(p);
    // Bump centres spread evenly over the region with a small jitter.
    let spacing = l as f64 / spec.bumps_per_cluster as f64;
    for c in 0..spec.n_clusters {
        let centres: Vec<f64> = (0..spec.bumps_per_cluster)
            .map(|b| (b as f64 + 0.5) * spacing + rng.gen_range(-0.25..0.25) * spacing)
            .collect();
        let bumps: Vec<DVector<f64>> = centres
            .iter()
            .map(|m| {
                DVector::from_fn(l, |i, _| {
                    let d = (i as f64 - m) / spec.bump_width;
                    (-0.5 * d * d).exp()
                })
            })
            .collect();
        for a in 0..spec.atoms_per_cluster {
            let mut atom = DVector::zeros(l);
            for b in sample(&mut rng, spec.bumps_per_cluster, spec.bumps_per_atom) {
                atom.axpy(rng.gen_range(0.5..1.5), &bumps[b], 1.0);
            }
            atom /= atom.norm();
            atoms
                .view_mut((c * l, c * spec.atoms_per_cluster + a), (l, 1))
                .copy_from(&atom);
            labels.push(c + 1);
        }
    }
    Dictionary::with_labels(atoms, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSpec {
    pub n_mixtures: usize,
    /// Each mixture uses between one and this many atoms.
    pub max_atoms: usize,
    pub coeff_range: (f64, f64),
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            n_mixtures: 500,
            max_atoms: 3,
            coeff_range: (0.5, 1.5),
            seed: 1,
        }
    }
}

/// Test data `B = D X` with the generating coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub data: DMatrix<f64>,
    /// `p x m`, column `i` generates data column `i`.
    pub coefficients: DMatrix<f64>,
}

/// Sparse nonnegative mixtures whose atoms come from distinct clusters when
/// there are enough clusters.
pub fn generate_mixtures(dict: &Dictionary, spec: &MixtureSpec) -> Result<SyntheticBatch> {
    let (lo, hi) = spec.coeff_range;
    if spec.max_atoms == 0 || !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("max_atoms must be positive and 0 < lo < hi"));
    }
    let labels = dict
        .labels()
        .ok_or_else(|| Error::invalid("mixtures need a labelled dictionary"))?;
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (j, &l) in labels.iter().enumerate() {
        match groups.iter_mut().find(|(g, _)| *g == l) {
            Some((_, v)) => v.push(j),
            None => groups.push((l, vec![j])),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = dict.n_atoms();
    let mut x = DMatrix::zeros(p, spec.n_mixtures);
    for i in 0..spec.n_mixtures {
        let s = rng.gen_range(1..=spec.max_atoms);
        let chosen: Vec<usize> = if s <= groups.len() {
            sample(&mut rng, groups.len(), s)
                .into_iter()
                .map(|g| groups[g].1[rng.gen_range(0..groups[g].1.len())])
                .collect()
        } else {
            sample(&mut rng, p, s.min(p)).into_vec()
        };
        for j in chosen {
            x[(j, i)] = rng.gen_range(lo..hi);
        }
    }
    Ok(SyntheticBatch {
        data: dict.atoms() * &x,
        coefficients: x,
    })
}

/// Classes sharing one low-dimensional subspace of a larger ambient space,
/// each concentrated around its own principal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeSpec {
    pub n_clusters: usize,
    pub atoms_per_cluster: usize,
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    /// Spread along the first secondary axis, relative to the principal
    /// direction's length.
    pub spread: f64,
    /// Ratio between the spreads of consecutive secondary axes.
    pub decay: f64,
    pub amplitude_range: (f64, f64),
    /// Standard deviation of isotropic ambient noise added to each atom.
    pub ambient_noise: f64,
    pub seed: u64,
}

impl Default for ConeSpec {
    fn default() -> Self {
        Self {
            n_clusters: 6,
            atoms_per_cluster: 100,
            ambient_dim: 40,
            subspace_dim: 12,
            spread: 0.3,
            decay: 0.5,
            amplitude_range: (0.5, 1.5),
            ambient_noise: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeAnalog {
    spec: ConeSpec,
    /// Orthonormal `ambient_dim x subspace_dim` basis.
    basis: DMatrix<f64>,
    /// Unit principal directions in subspace coordinates, one per column.
    directions: DMatrix<f64>,
    /// Per-class orthonormal frames whose first column is the direction.
    frames: Vec<DMatrix<f64>>,
}

/// Cone test data: each column mixes atoms from `classes[i]` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBatch {
    pub data: DMatrix<f64>,
    pub classes: Vec<Vec<usize>>,
}

impl ConeAnalog {
    pub fn new(spec: ConeSpec) -> Result<Self> {
        let (lo, hi) = spec.amplitude_range;
        if spec.n_clusters == 0 || spec.atoms_per_cluster == 0 {
            return Err(Error::invalid(
                "need at least one cluster and one atom per cluster",
            ));
        }
        if spec.subspace_dim == 0 || spec.subspace_dim > spec.ambient_dim {
            return Err(Error::invalid("subspace_dim must be in 1..=ambient_dim"));
        }
        if !(spec.spread >= 0.0
            && spec.decay > 0.0
            && spec.ambient_noise >= 0.0
            && lo > 0.0
            && hi > lo)
        {
            return Err(Error::invalid(
                "spread and noise must be >= 0, amplitudes 0 < lo < hi",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let g = DMatrix::from_fn(spec.ambient_dim, spec.subspace_dim, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let basis = g.qr().q();
        let mut directions = DMatrix::from_fn(spec.subspace_dim, spec.n_clusters, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        for mut c in directions.column_iter_mut() {
            let norm = c.norm();
            c /= norm;
        }
        let frames = directions
            .column_iter()
            .map(|d| {
                let mut m = DMatrix::from_fn(spec.subspace_dim, spec.subspace_dim, |_, _| {
                    rng.sample::<f64, _>(StandardNormal)
                });
                m.set_column(0, &d);
                m.qr().q()
            })
            .collect();
        Ok(Self {
            spec,
            basis,
            directions,
            frames,
        })
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// One draw `a * basis * (d + sum_i spread * decay^i * g_i * e_i) + noise`
    /// where `e_i` are the secondary axes of the class frame.
    pub fn draw(&self, class: usize, rng: &mut impl Rng) -> DVector<f64> {
        let s = &self.spec;
        let frame = &self.frames[class];
        let mut coords = self.directions.column(class).into_owned();
        let mut scale = s.spread;
        for i in 1..s.subspace_dim {
            let g: f64 = rng.sample(StandardNormal);
            coords.axpy(scale * g, &frame.column(i), 1.0);
            scale *= s.decay;
        }
        let amp = rng.gen_range(s.amplitude_range.0..s.amplitude_range.1);
        let noise = DVector::from_fn(s.ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.basis * coords * amp + noise * s.ambient_noise
    }

    /// Labelled dictionary, labels `1..=n_clusters`.
    pub fn dictionary(&self) -> Result<Dictionary> {
        let s = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(1);
        let p = s.n_clusters * s.atoms_per_cluster;
        let mut atoms = DMatrix::zeros(s.ambient_dim, p);
        let mut labels = Vec::with_capacity(p);
        for c in 0..s.n_clusters {
            for a in 0..s.atoms_per_cluster {
                atoms.set_column(c * s.atoms_per_cluster + a, &self.draw(c, &mut rng));
                labels.push(c + 1);
            }
        }
        Dictionary::with_labels(atoms, labels)
    }

    /// Fresh data, each a sum of draws from one up to `max_classes` distinct
    /// classes.
    pub fn test_batch(&self, n: usize, max_classes: usize, seed: u64) -> Result<ConeBatch> {
        let k = self.spec.n_clusters;
        if max_classes == 0 || max_classes > k {
            return Err(Error::invalid(format!("max_classes must be in 1..={k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = DMatrix::zeros(self.spec.ambient_dim, n);
        let mut classes = Vec::with_capacity(n);
        for i in 0..n {
            let s = rng.gen_range(1..=max_classes);
            let mut chosen = sample(&mut rng, k, s).into_vec();
            chosen.sort_unstable();
            let mut b = DVector::zeros(self.spec.ambient_dim);
            for &c in &chosen {
                b += self.draw(c, &mut rng);
            }
            data.set_column(i, &b);
            classes.push(chosen);
        }
        Ok(ConeBatch { data, classes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values_gram;

    #[test]
    fn clustered_structure() {
        let spec = ClusteredSpec {
            n_clusters: 3,
            atoms_per_cluster: 30,
            bumps_per_cluster: 6,
            region_len: 24,
            ..Default::default()
        };
        let d = generate_clustered_dictionary(&spec).unwrap();
        assert_eq!(d.n_rows(), 72);
        assert_eq!(d.n_atoms(), 90);
        for (j, c) in d.atoms().column_iter().enumerate() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
            assert!(c.iter().all(|v| *v >= 0.0));
            let cluster = j / 30;
            let outside: f64 = c
                .iter()
                .enumerate()
                .filter(|(i, _)| i / 24 != cluster)
                .map(|(_, v)| v.abs())
                .sum();
            assert_eq!(outside, 0.0);
        }
        let block = d.atoms().columns(0, 30).into_owned();
        let s = singular_values_gram(&block);
        assert!(s[5] / s[0] > 1e-3);
        assert!(s[6] / s[0] < 1e-6);
        assert_eq!(d, generate_clustered_dictionary(&spec).unwrap());
    }

    #[test]
    fn single_atom_dictionary() {
        let spec = ClusteredSpec {
            n_clusters: 1,
            atoms_per_cluster: 1,
            ..Default::default()
        };
        assert_eq!(generate_clustered_dictionary(&spec).unwrap().n_atoms(), 1);
        let bad = ClusteredSpec {
            bumps_per_atom: 30,
            ..Default::default()
        };
        assert!(generate_clustered_dictionary(&bad).is_err());
    }

    #[test]
    fn mixtures_reconstruct_and_use_distinct_clusters() {
        let d = generate_clustered_dictionary(&ClusteredSpec {
            atoms_per_cluster: 20,
            ..Default::default()
        })
        .unwrap();
        let batch = generate_mixtures(
            &d,
            &MixtureSpec {
                n_mixtures: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let resid = &batch.data - d.atoms() * &batch.coefficients;
        assert!(resid.amax() < 1e-12);
        for x in batch.coefficients.column_iter() {
            let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
            assert!((1..=3).contains(&support.len()));
            let mut clusters: Vec<usize> = support.iter().map(|j| j / 20).collect();
            clusters.dedup();
            assert_eq!(clusters.len(), support.len());
            assert!(support.iter().all(|&j| (0.5..1.5).contains(&x[j])));
        }
    }

    #[test]
    fn cone_directions_dominate() {
        let cone = ConeAnalog::new(ConeSpec::default()).unwrap();
        let b = cone.basis();
        assert!((b.transpose() * b - DMatrix::identity(12, 12)).amax() < 1e-12);
        let d = cone.dictionary().unwrap();
        for c in 0..6 {
            let block = d.atoms().columns(c * 100, 100).into_owned();
            let svd = block.svd(true, false);
            let (i, _) = svd.singular_values.argmax();
            let u = svd.u.unwrap().column(i).into_owned();
            let dir = b * cone.directions().column(c);
            assert!(u.dot(&dir).abs() > 0.95, "class {c}");
        }
        let batch = cone.test_batch(30, 2, 9).unwrap();
        assert!(batch.classes.iter().all(|c| (1..=2).contains(&c.len())));
        assert_eq!(batch, cone.test_batch(30, 2, 9).unwrap());
    }
}
