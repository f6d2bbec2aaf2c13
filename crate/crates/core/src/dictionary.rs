//! Dictionaries, block partitions and matrix file formats.
//!
//! Two on-disk matrix formats are supported:
//!
//! * CSV: one row per signal sample, one column per atom. An optional
//!   single header line is detected automatically (any field on the first
//!   line that does not parse as a number marks it as a header).
//! * Raw binary: two little-endian `u64` dimensions `(n, p)` followed by
//!   `n * p` little-endian `f64` values in column-major order.
//!
//! Class labels travel in a sidecar single-column CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n x p` matrix of atoms with optional per-atom class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl Dictionary {
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::dim(format!(
                "dictionary must be at least 1x1, got {}x{}",
                atoms.nrows(),
                atoms.ncols()
            )));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i + 1,
                    col: j + 1,
                });
            }
        }
        Ok(Self {
            atoms,
            labels: None,
        })
    }

    /// Attaches class labels (values `>= 1`, one per column).
    pub fn with_labels(atoms: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let mut dict = Self::new(atoms)?;
        dict.set_labels(labels)?;
        Ok(dict)
    }

    pub fn set_labels(&mut self, labels: Vec<usize>) -> Result<()> {
        if labels.len() != self.n_atoms() {
            return Err(Error::dim(format!(
                "{} labels for {} atoms",
                labels.len(),
                self.n_atoms()
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l == 0) {
            return Err(Error::invalid(format!(
                "label at position {} is 0; labels start at 1",
                pos + 1
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Signal dimension `n`.
    pub fn n_rows(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `p`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn into_atoms(self) -> DMatrix<f64> {
        self.atoms
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_rows(), columns.len(), |i, j| {
            self.atoms[(i, columns[j])]
        })
    }

    /// `D x` for a coefficient vector of length `p`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n_atoms() {
            return Err(Error::dim(format!(
                "coefficient vector has length {}, dictionary has {} atoms",
                x.len(),
                self.n_atoms()
            )));
        }
        Ok(&self.atoms * x)
    }
}

/// Contiguous block structure over the columns of a dictionary.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Partition {
    boundaries: Vec<usize>,
    /// Class label carried by each block.
    labels: Vec<usize>,
}

impl Partition {
    /// Builds a partition from `K + 1` ascending boundaries starting at 0.
    pub fn new(boundaries: Vec<usize>, labels: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0 {
            return Err(Error::invalid(
                "partition needs at least two boundaries starting at 0",
            ));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("partition blocks must be non-empty"));
        }
        if labels.len() != boundaries.len() - 1 {
            return Err(Error::dim("one label per block required"));
        }
        Ok(Self { boundaries, labels })
    }

    /// Blocks of the given sizes labelled `1..=K`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut boundaries = Vec::with_capacity(sizes.len() + 1);
        boundaries.push(0);
        for &s in sizes {
            boundaries.push(boundaries.last().unwrap() + s);
        }
        Self::new(boundaries, (1..=sizes.len()).collect())
    }

    /// A single block covering all `p` columns.
    pub fn single(p: usize) -> Result<Self> {
        Self::from_sizes(&[p])
    }

    pub fn n_blocks(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn n_columns(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn block_labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn block(&self, j: usize) -> Range<usize> {
        self.boundaries[j]..self.boundaries[j + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the block containing column `col`.
    pub fn block_of(&self, col: usize) -> usize {
        debug_assert!(col < self.n_columns());
        self.boundaries.partition_point(|&b| b <= col) - 1
    }

    /// Column indices covered by the given blocks, in block order.
    pub fn columns_of(&self, blocks: &[usize]) -> Vec<usize> {
        blocks.iter().flat_map(|&j| self.block(j)).collect()
    }
}

/// A datum `b` with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub values: DVector<f64>,
    pub coefficients: Option<DVector<f64>>,
    pub class: Option<usize>,
}

impl LabeledVector {
    pub fn new(values: DVector<f64>) -> Self {
        Self {
            values,
            coefficients: None,
            class: None,
        }
    }

    pub fn check_against(&self, dict: &Dictionary) -> Result<()> {
        if self.values.len() != dict.n_rows() {
            return Err(Error::dim(format!(
                "datum has length {}, dictionary rows {}",
                self.values.len(),
                dict.n_rows()
            )));
        }
        if let Some(x) = &self.coefficients {
            if x.len() != dict.n_atoms() {
                return Err(Error::dim(format!(
                    "coefficient vector has length {}, dictionary has {} atoms",
                    x.len(),
                    dict.n_atoms()
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`partition_by_labels`].
#[derive(Debug, Clone)]
pub struct Reordered {
    pub dictionary: Dictionary,
    pub partition: Partition,
    /// `permutation[new] = old` column index (0-based).
    pub permutation: Vec<usize>,
}

/// Stably reorders columns so equal labels are contiguous and ascending.
pub fn partition_by_labels(dict: &Dictionary) -> Result<Reordered> {
    let labels = dict.labels().ok_or(Error::MissingLabels)?;
    let mut permutation: Vec<usize> = (0..labels.len()).collect();
    permutation.sort_by_key(|&i| labels[i]);

    let atoms = dict.select_columns(&permutation);
    let new_labels: Vec<usize> = permutation.iter().map(|&i| labels[i]).collect();

    let mut boundaries = vec![0];
    let mut block_labels = vec![new_labels[0]];
    for (i, w) in new_labels.windows(2).enumerate() {
        if w[0] != w[1] {
            boundaries.push(i + 1);
            block_labels.push(w[1]);
        }
    }
    boundaries.push(new_labels.len());

    Ok(Reordered {
        dictionary: Dictionary::with_labels(atoms, new_labels)?,
        partition: Partition::new(boundaries, block_labels)?,
        permutation,
    })
}

/// On-disk matrix encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Csv,
    RawBinary,
}

impl MatrixFormat {
    /// Guesses from the file extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::RawBinary,
        }
    }
}

/// Loads a dictionary; all entries must be finite.
pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Dictionary> {
    let m = read_matrix(path.as_ref(), format)?;
    Dictionary::new(m)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    write_matrix(path.as_ref(), m, format)
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<DMatrix<f64>> {
    match format {
        MatrixFormat::Csv => read_csv(path),
        MatrixFormat::RawBinary => read_binary(path),
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_csv(path, m),
        MatrixFormat::RawBinary => write_binary(path, m),
    }
}

fn read_csv(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            col: 0,
            msg: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|r| r.is_err()) {
            // header line
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, value) in parsed.into_iter().enumerate() {
            let v = value.map_err(|e| Error::Parse {
                row: line,
                col: c + 1,
                msg: format!("{:?}: {e}", &record[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: line,
                    col: c + 1,
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    let n = rows.len();
    let p = width.unwrap_or(0);
    if n == 0 || p == 0 {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            msg: "no data rows".into(),
        });
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn write_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            // `Display` for f64 is the shortest representation that round-trips.
            line.push_str(&m[(i, j)].to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_binary(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut word = [0u8; 8];
    let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(word))
    };
    let n = read_u64(&mut r)? as usize;
    let p = read_u64(&mut r)? as usize;
    let len = n
        .checked_mul(p)
        .ok_or_else(|| Error::dim(format!("binary header dims {n}x{p} overflow")))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != len * 8 {
        return Err(Error::dim(format!(
            "binary payload has {} bytes, header {n}x{p} needs {}",
            bytes.len(),
            len * 8
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_vec(n, p, data))
}

fn write_binary(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(&(m.nrows() as u64).to_le_bytes())?;
    put(&(m.ncols() as u64).to_le_bytes())?;
    // nalgebra storage is column-major already
    for v in m.as_slice() {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a single-column label file (optional header).
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: idx + 1,
            col: 0,
            msg: e.to_string(),
        })?;
        if record.len() != 1 {
            return Err(Error::RaggedRow {
                row: idx + 1,
                expected: 1,
                found: record.len(),
            });
        }
        match record[0].parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    row: idx + 1,
                    col: 1,
                    msg: format!("{:?}: {e}", &record[0]),
                })
            }
        }
    }
    Ok(labels)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn csv_identity() {
        let dir = tmp();
        let path = dir.path().join("id.csv");
        std::fs::write(&path, "1,0\n0,1").unwrap();
        let d = load_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(d.atoms(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn csv_header_is_skipped() {
        let dir = tmp();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "a1,a2,a3\n1,2,3\n4,5,6\n").unwrap();
        let d = load_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.n_atoms(), 3);
        assert_eq!(d.atoms()[(1, 2)], 6.0);
    }

    #[test]
    fn csv_nan_reports_location() {
        let dir = tmp();
        let path = dir.path().join("nan.csv");
        std::fs::write(&path, "1,2\n3,nan\n").unwrap();
        match load_matrix(&path, MatrixFormat::Csv) {
            Err(Error::NonFinite { row, col }) => assert_eq!((row, col), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_and_garbage() {
        let dir = tmp();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(
            load_matrix(&path, MatrixFormat::Csv),
            Err(Error::RaggedRow {
                row: 2,
                expected: 2,
                found: 1
            })
        ));
        std::fs::write(&path, "1,2\n3,x\n").unwrap();
        assert!(matches!(
            load_matrix(&path, MatrixFormat::Csv),
            Err(Error::Parse { row: 2, col: 2, .. })
        ));
    }

    #[test]
    fn round_trip_both_formats_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(5, 7, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let dir = tmp();
        for (name, fmt) in [
            ("m.csv", MatrixFormat::Csv),
            ("m.bin", MatrixFormat::RawBinary),
        ] {
            let path = dir.path().join(name);
            save_matrix(&path, &m, fmt).unwrap();
            let back = load_matrix(&path, fmt).unwrap();
            for (a, b) in m.iter().zip(back.atoms().iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn binary_truncated_payload_rejected() {
        let dir = tmp();
        let path = dir.path().join("t.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_matrix(&path, MatrixFormat::RawBinary),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn labels_sidecar() {
        let dir = tmp();
        let path = dir.path().join("labels.csv");
        std::fs::write(&path, "label\n2\n1\n").unwrap();
        assert_eq!(load_labels(&path).unwrap(), vec![2, 1]);
        save_labels(&path, &[3, 1, 2]).unwrap();
        assert_eq!(load_labels(&path).unwrap(), vec![3, 1, 2]);
    }

    fn labelled(labels: &[usize]) -> Dictionary {
        let p = labels.len();
        let atoms = DMatrix::from_fn(2, p, |i, j| (10 * j + i) as f64);
        Dictionary::with_labels(atoms, labels.to_vec()).unwrap()
    }

    #[test]
    fn partition_interleaved_labels() {
        let r = partition_by_labels(&labelled(&[2, 1, 2, 1])).unwrap();
        // 1-based [2, 4, 1, 3]
        assert_eq!(r.permutation, vec![1, 3, 0, 2]);
        assert_eq!(r.partition.sizes(), vec![2, 2]);
        assert_eq!(r.partition.block_labels(), &[1, 2]);
        assert_eq!(r.dictionary.atoms()[(0, 0)], 10.0);
    }

    #[test]
    fn partition_already_contiguous_and_single_class() {
        let r = partition_by_labels(&labelled(&[1, 1, 2])).unwrap();
        assert_eq!(r.permutation, vec![0, 1, 2]);
        assert_eq!(r.partition.sizes(), vec![2, 1]);

        let r = partition_by_labels(&labelled(&[4, 4, 4, 4])).unwrap();
        assert_eq!(r.partition.sizes(), vec![4]);
        assert_eq!(r.partition.block_labels(), &[4]);
    }

    #[test]
    fn partition_requires_labels() {
        let d = Dictionary::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(partition_by_labels(&d), Err(Error::MissingLabels)));
    }

    #[test]
    fn block_lookup() {
        let p = Partition::from_sizes(&[2, 3, 1]).unwrap();
        let blocks: Vec<usize> = (0..6).map(|c| p.block_of(c)).collect();
        assert_eq!(blocks, vec![0, 0, 1, 1, 1, 2]);
        assert_eq!(p.columns_of(&[0, 2]), vec![0, 1, 5]);
        assert!(Partition::from_sizes(&[2, 0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_idempotent_and_blocks_concatenate(
                labels in proptest::collection::vec(1usize..5, 1..30)
            ) {
                let d = labelled(&labels);
                let once = partition_by_labels(&d).unwrap();
                let twice = partition_by_labels(&once.dictionary).unwrap();
                prop_assert_eq!(&twice.dictionary, &once.dictionary);
                prop_assert_eq!(twice.permutation, (0..labels.len()).collect::<Vec<_>>());

                let part = &once.partition;
                prop_assert_eq!(part.sizes().iter().sum::<usize>(), labels.len());
                let mut cols = Vec::new();
                for j in 0..part.n_blocks() {
                    let r = part.block(j);
                    cols.push(once.dictionary.atoms().columns(r.start, r.len()).into_owned());
                }
                let refs: Vec<_> = cols.iter().collect();
                let rebuilt = DMatrix::from_columns(
                    &refs.iter().flat_map(|m| m.column_iter().map(|c| c.into_owned())).collect::<Vec<_>>(),
                );
                prop_assert_eq!(&rebuilt, once.dictionary.atoms());
            }
        }
    }
}
