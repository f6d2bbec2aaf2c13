//! On-disk library bundle: a directory holding `manifest.json` and one
//! raw-binary file per matrix or vector.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compression::{LowRankFactors, Method};
use crate::dce::DceModel;
use crate::dictionary::{read_matrix, write_matrix, Dictionary, MatrixFormat, Partition};
use crate::error::{Error, Result};
use crate::group::StructuralPrior;
use crate::pipeline::{BuildConfig, CompressedLibrary};

pub const MANIFEST: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DceEntry {
    epsilon: f64,
    sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusterEntry {
    label: usize,
    method: Method,
    rank: usize,
    residual_trace: Vec<f64>,
    dce: DceEntry,
    prior_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    n: usize,
    p: usize,
    /// Atom labels in stored order.
    labels: Vec<usize>,
    /// `permutation[stored] = original`, 0-based.
    permutation: Vec<usize>,
    partition: Partition,
    clusters: Vec<ClusterEntry>,
    combined_dce: DceEntry,
    config: BuildConfig,
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn put(dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    write_matrix(&dir.join(name), m, MatrixFormat::RawBinary)
}

fn get(dir: &Path, name: &str) -> Result<DMatrix<f64>> {
    read_matrix(&dir.join(name), MatrixFormat::RawBinary)
}

fn get_vec(dir: &Path, name: &str) -> Result<DVector<f64>> {
    let m = get(dir, name)?;
    if m.ncols() != 1 {
        return Err(Error::Bundle(format!(
            "{name}: expected a single column, found {}",
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

fn put_dce(dir: &Path, prefix: &str, d: &DceModel) -> Result<DceEntry> {
    put(dir, &format!("{prefix}_mean.bin"), &column(d.mean()))?;
    put(dir, &format!("{prefix}_basis.bin"), d.basis())?;
    put(
        dir,
        &format!("{prefix}_eigenvalues.bin"),
        &column(d.eigenvalues()),
    )?;
    Ok(DceEntry {
        epsilon: d.epsilon(),
        sample_count: d.sample_count(),
    })
}

fn get_dce(dir: &Path, prefix: &str, e: &DceEntry) -> Result<DceModel> {
    DceModel::from_parts(
        get_vec(dir, &format!("{prefix}_mean.bin"))?,
        get(dir, &format!("{prefix}_basis.bin"))?,
        get_vec(dir, &format!("{prefix}_eigenvalues.bin"))?,
        e.epsilon,
        e.sample_count,
    )
}

/// Writes `lib` into `dir`, creating it if needed. Identical libraries give
/// byte-identical bundles.
pub fn save_library(lib: &CompressedLibrary, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    put(dir, "dictionary.bin", lib.dictionary.atoms())?;
    let mut clusters = Vec::with_capacity(lib.n_clusters());
    for j in 0..lib.n_clusters() {
        let pre = format!("cluster_{}", j + 1);
        let f = &lib.factors[j];
        let prior = &lib.priors[j];
        put(dir, &format!("{pre}_w.bin"), &f.w)?;
        put(dir, &format!("{pre}_h.bin"), &f.h)?;
        put(
            dir,
            &format!("{pre}_singular_values.bin"),
            &column(&DVector::from_vec(f.singular_values.clone())),
        )?;
        put(
            dir,
            &format!("{pre}_prior_eigenvalues.bin"),
            &column(prior.eigenvalues()),
        )?;
        put(
            dir,
            &format!("{pre}_prior_eigenvectors.bin"),
            prior.eigenvectors(),
        )?;
        put(
            dir,
            &format!("{pre}_prior_ratios.bin"),
            &column(&DVector::from_vec(prior.ratios().to_vec())),
        )?;
        let dce = put_dce(dir, &format!("{pre}_dce"), &lib.cluster_dce[j])?;
        clusters.push(ClusterEntry {
            label: lib.partition.block_labels()[j],
            method: f.method,
            rank: f.rank(),
            residual_trace: f.residual_trace.clone(),
            dce,
            prior_epsilon: prior.epsilon(),
        });
    }
    let combined_dce = put_dce(dir, "combined_dce", &lib.combined_dce)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n: lib.dim(),
        p: lib.dictionary.n_atoms(),
        labels: lib
            .dictionary
            .labels()
            .map(|l| l.to_vec())
            .unwrap_or_default(),
        permutation: lib.permutation.clone(),
        partition: lib.partition.clone(),
        clusters,
        combined_dce,
        config: lib.config.clone(),
    };
    let path = dir.join(MANIFEST);
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_library(dir: impl AsRef<Path>) -> Result<CompressedLibrary> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Bundle(format!("{}: {e}", path.display())))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Bundle(format!(
            "unsupported bundle version {}",
            m.format_version
        )));
    }
    let partition = Partition::new(
        m.partition.boundaries().to_vec(),
        m.partition.block_labels().to_vec(),
    )
    .map_err(|e| Error::Bundle(format!("partition: {e}")))?;
    let atoms = get(dir, "dictionary.bin")?;
    if atoms.shape() != (m.n, m.p) || m.permutation.len() != m.p || partition.n_columns() != m.p {
        return Err(Error::Bundle(
            "manifest disagrees with the stored dictionary".into(),
        ));
    }
    if m.clusters.len() != partition.n_blocks() {
        return Err(Error::Bundle(
            "cluster count disagrees with the partition".into(),
        ));
    }
    let dictionary = Dictionary::with_labels(atoms, m.labels)?;
    let mut factors = Vec::new();
    let mut priors = Vec::new();
    let mut cluster_dce = Vec::new();
    for (j, c) in m.clusters.iter().enumerate() {
        let pre = format!("cluster_{}", j + 1);
        let w = get(dir, &format!("{pre}_w.bin"))?;
        let h = get(dir, &format!("{pre}_h.bin"))?;
        if w.ncols() != c.rank
            || h.nrows() != c.rank
            || w.nrows() != m.n
            || h.ncols() != partition.block(j).len()
        {
            return Err(Error::Bundle(format!(
                "{pre}: factor shapes disagree with the manifest"
            )));
        }
        factors.push(LowRankFactors {
            w,
            h,
            singular_values: get_vec(dir, &format!("{pre}_singular_values.bin"))?
                .as_slice()
                .to_vec(),
            method: c.method,
            residual_trace: c.residual_trace.clone(),
        });
        priors.push(StructuralPrior::from_parts(
            get_vec(dir, &format!("{pre}_prior_eigenvalues.bin"))?,
            get(dir, &format!("{pre}_prior_eigenvectors.bin"))?,
            c.prior_epsilon,
            get_vec(dir, &format!("{pre}_prior_ratios.bin"))?
                .as_slice()
                .to_vec(),
        )?);
        cluster_dce.push(get_dce(dir, &format!("{pre}_dce"), &c.dce)?);
    }
    Ok(CompressedLibrary {
        dictionary,
        partition,
        permutation: m.permutation,
        factors,
        priors,
        cluster_dce,
        combined_dce: get_dce(dir, "combined_dce", &m.combined_dce)?,
        config: m.config,
    })
}

/// SHA-256 over the names and contents of the regular files in `dir`, in
/// sorted name order, as lowercase hex.
pub fn directory_digest(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry
            .file_type()
            .map_err(|e| Error::io(entry.path(), e))?
            .is_file()
        {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let mut hasher = Sha256::new();
    for name in names {
        let path = dir.join(&name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::build_library;
    use crate::synth::{generate_clustered_dictionary, ClusteredSpec};

    fn small_lib() -> CompressedLibrary {
        let d = generate_clustered_dictionary(&ClusteredSpec {
            n_clusters: 3,
            atoms_per_cluster: 15,
            bumps_per_cluster: 5,
            region_len: 16,
            ..Default::default()
        })
        .unwrap();
        build_library(&d, &BuildConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let lib = small_lib();
        let dir = tempfile::tempdir().unwrap();
        save_library(&lib, dir.path()).unwrap();
        assert_eq!(load_library(dir.path()).unwrap(), lib);
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let lib = small_lib();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_library(&lib, a.path()).unwrap();
        save_library(&small_lib(), b.path()).unwrap();
        let da = directory_digest(a.path()).unwrap();
        assert_eq!(da, directory_digest(b.path()).unwrap());
        assert_eq!(da.len(), 64);
        fs::write(b.path().join("extra.txt"), "x").unwrap();
        assert_ne!(da, directory_digest(b.path()).unwrap());
    }

    #[test]
    fn missing_or_corrupt_bundle() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_library(dir.path()), Err(Error::Io { .. })));
        save_library(&small_lib(), dir.path()).unwrap();
        fs::write(dir.path().join("cluster_2_w.bin"), [0u8; 3]).unwrap();
        assert!(load_library(dir.path()).is_err());
    }
}
