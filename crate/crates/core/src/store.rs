//! Labelled feature matrices and their binary file format.
//!
//! All integers are little-endian:
//!
//! ```text
//! magic "OCTF" | version u16 = 1 | dim u32 | row_count u32 | class_count u16
//! class table: class_count x (name_len u16, UTF-8 name)
//! rows:        row_count x (id_len u16, UTF-8 record_id, label_index u16, dim x f32)
//! ```
//!
//! Externally computed embeddings (DenseNet-169, ResNet50) enter the pipeline
//! as files in this format.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{DatasetManifest, Split};

pub const STORE_MAGIC: [u8; 4] = *b"OCTF";
pub const STORE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    MagicMismatch { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),
    #[error("file truncated while reading {0}")]
    TruncatedFile(&'static str),
    #[error("row {row} has {got} values but dim is {dim}")]
    DimMismatch { row: usize, dim: usize, got: usize },
    #[error("{0} trailing bytes after the last row")]
    TrailingBytes(usize),
    #[error("row '{id}' has label index {label} but only {classes} classes")]
    InvalidLabel { id: String, label: usize, classes: usize },
    #[error("duplicate record id '{0}'")]
    DuplicateRecordId(String),
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("{0} does not fit the format's field width")]
    TooLarge(&'static str),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record_id: String,
    pub label: usize,
    pub values: Vec<f32>,
}

/// `N x D` feature matrix with per-row record ids and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    classes: Vec<String>,
    rows: Vec<FeatureRow>,
    /// Feature-source tag ("hog", "lbp", "densenet169", ...). Not persisted by
    /// the binary format; [`read_store`] leaves it empty.
    pub source: String,
}

impl FeatureMatrix {
    pub fn new(
        dim: usize,
        classes: Vec<String>,
        rows: Vec<FeatureRow>,
        source: impl Into<String>,
    ) -> Result<Self, StoreError> {
        let mut m = Self {
            dim,
            classes,
            rows: Vec::new(),
            source: source.into(),
        };
        for row in rows {
            m.check_row(&row)?;
            m.rows.push(row);
        }
        let mut seen = HashSet::with_capacity(m.rows.len());
        for r in &m.rows {
            if !seen.insert(r.record_id.as_str()) {
                return Err(StoreError::DuplicateRecordId(r.record_id.clone()));
            }
        }
        Ok(m)
    }

    pub fn empty(dim: usize, classes: Vec<String>, source: impl Into<String>) -> Self {
        Self {
            dim,
            classes,
            rows: Vec::new(),
            source: source.into(),
        }
    }

    fn check_row(&self, row: &FeatureRow) -> Result<(), StoreError> {
        if row.values.len() != self.dim {
            return Err(StoreError::DimMismatch {
                row: self.rows.len(),
                dim: self.dim,
                got: row.values.len(),
            });
        }
        if row.label >= self.classes.len() {
            return Err(StoreError::InvalidLabel {
                id: row.record_id.clone(),
                label: row.label,
                classes: self.classes.len(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn sort_by_record_id(&mut self) {
        self.rows.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    }

    /// Compares two matrices by the bit patterns of their values.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.classes == other.classes
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.record_id == b.record_id
                    && a.label == b.label
                    && a.values
                        .iter()
                        .map(|v| v.to_bits())
                        .eq(b.values.iter().map(|v| v.to_bits()))
            })
    }
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), StoreError> {
    let len = u16::try_from(s.len()).map_err(|_| StoreError::TooLarge(what))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub(crate) fn put_class_table(out: &mut Vec<u8>, classes: &[String]) -> Result<(), StoreError> {
    for c in classes {
        put_str(out, c, "class name")?;
    }
    Ok(())
}

/// Serializes a matrix to the binary format.
pub fn to_bytes(m: &FeatureMatrix) -> Result<Vec<u8>, StoreError> {
    let dim = u32::try_from(m.dim).map_err(|_| StoreError::TooLarge("dim"))?;
    let rows = u32::try_from(m.rows.len()).map_err(|_| StoreError::TooLarge("row count"))?;
    let classes = u16::try_from(m.classes.len()).map_err(|_| StoreError::TooLarge("class count"))?;

    let mut out = Vec::with_capacity(16 + m.rows.len() * (m.dim * 4 + 40));
    out.extend_from_slice(&STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&classes.to_le_bytes());
    put_class_table(&mut out, &m.classes)?;
    for (i, row) in m.rows.iter().enumerate() {
        if row.values.len() != m.dim {
            return Err(StoreError::DimMismatch {
                row: i,
                dim: m.dim,
                got: row.values.len(),
            });
        }
        put_str(&mut out, &row.record_id, "record id")?;
        let label = u16::try_from(row.label).map_err(|_| StoreError::TooLarge("label index"))?;
        out.extend_from_slice(&label.to_le_bytes());
        for v in &row.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Little-endian cursor over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], StoreError> {
        if self.remaining() < n {
            return Err(StoreError::TruncatedFile(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u16(&mut self, what: &'static str) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self, what: &'static str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self, what: &'static str) -> Result<f32, StoreError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, what: &'static str) -> Result<String, StoreError> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| StoreError::InvalidUtf8(what))
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<(), StoreError> {
        let found: [u8; 4] = self.take(4, "magic")?.try_into().unwrap();
        if found != expected {
            return Err(StoreError::MagicMismatch { expected, found });
        }
        Ok(())
    }

    pub(crate) fn class_table(&mut self, count: usize) -> Result<Vec<String>, StoreError> {
        (0..count).map(|_| self.string("class table")).collect()
    }
}

/// Parses a matrix from the binary format.
pub fn from_bytes(bytes: &[u8]) -> Result<FeatureMatrix, StoreError> {
    let mut r = Reader::new(bytes);
    r.magic(STORE_MAGIC)?;
    let version = r.u16("version")?;
    if version != STORE_VERSION {
        return Err(StoreError::VersionUnsupported(version));
    }
    let dim = r.u32("dim")? as usize;
    let row_count = r.u32("row count")? as usize;
    let class_count = r.u16("class count")? as usize;
    let classes = r.class_table(class_count)?;

    let mut rows = Vec::with_capacity(row_count.min(1 << 20));
    for i in 0..row_count {
        let record_id = r.string("record id")?;
        let label = r.u16("label index")? as usize;
        let available = r.remaining() / 4;
        if available < dim && i + 1 == row_count {
            // the final row ends before `dim` values were read
            return Err(StoreError::DimMismatch {
                row: i,
                dim,
                got: available,
            });
        }
        let mut values = Vec::with_capacity(dim.min(available));
        for _ in 0..dim {
            values.push(r.f32("row values")?);
        }
        rows.push(FeatureRow {
            record_id,
            label,
            values,
        });
    }
    if r.remaining() > 0 {
        return Err(StoreError::TrailingBytes(r.remaining()));
    }
    FeatureMatrix::new(dim, classes, rows, "")
}

/// Writes via a temporary file in the destination directory followed by a
/// rename, so readers never observe a partial store.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_store(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), &to_bytes(m)?)
}

pub fn read_store(path: impl AsRef<Path>) -> Result<FeatureMatrix, StoreError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}

/// Differences between a matrix and one split of a manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// In the manifest split but absent from the matrix.
    pub missing: Vec<String>,
    /// In the matrix but not in the manifest split.
    pub unexpected: Vec<String>,
    /// Present in both but with a different class name.
    pub mislabeled: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty() && self.mislabeled.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_clean() {
            return writeln!(f, "store matches manifest");
        }
        for id in &self.missing {
            writeln!(f, "missing: {id}")?;
        }
        for id in &self.unexpected {
            writeln!(f, "unexpected: {id}")?;
        }
        for id in &self.mislabeled {
            writeln!(f, "mislabeled: {id}")?;
        }
        Ok(())
    }
}

pub fn validate_against_manifest(m: &FeatureMatrix, manifest: &DatasetManifest, split: Split) -> ValidationReport {
    let expected: std::collections::HashMap<&str, &str> = manifest
        .split(split)
        .map(|r| (r.record_id.as_str(), r.label.as_str()))
        .collect();
    let present: BTreeSet<&str> = m.rows.iter().map(|r| r.record_id.as_str()).collect();

    let mut report = ValidationReport::default();
    let mut missing: Vec<&str> = expected.keys().copied().filter(|id| !present.contains(id)).collect();
    missing.sort_unstable();
    report.missing = missing.into_iter().map(String::from).collect();
    for row in &m.rows {
        match expected.get(row.record_id.as_str()) {
            None => report.unexpected.push(row.record_id.clone()),
            Some(label) if m.classes.get(row.label).map(String::as_str) != Some(label) => {
                report.mislabeled.push(row.record_id.clone())
            }
            Some(_) => {}
        }
    }
    report.unexpected.sort();
    report.mislabeled.sort();
    report
}
