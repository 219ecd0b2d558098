//! Dataset manifests and stratified resampling.
//!
//! A manifest is a UTF-8 CSV file with header `record_id,label,split` and LF
//! line endings. `record_id` is the image path relative to the dataset root.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("duplicate record id '{0}'")]
    DuplicateRecordId(String),
    #[error("record '{id}' has label '{label}' which is not a known class")]
    UnknownLabel { id: String, label: String },
    #[error("class '{class}' has {available} train records, {requested} requested")]
    InsufficientRecords {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error("manifest has no train records")]
    EmptyTrainSplit,
    #[error("invalid resample fractions: {0}")]
    InvalidSpec(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: String,
    pub label: String,
    pub split: Split,
}

impl Record {
    pub fn new(record_id: impl Into<String>, label: impl Into<String>, split: Split) -> Self {
        Self {
            record_id: record_id.into(),
            label: label.into(),
            split,
        }
    }
}

/// Labelled records plus the class order used for label indices everywhere
/// downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    records: Vec<Record>,
    classes: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest whose classes are the distinct labels in
    /// lexicographic order.
    pub fn new(records: Vec<Record>) -> Result<Self, DatasetError> {
        let classes: Vec<String> = records
            .iter()
            .map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::with_classes(records, classes)
    }

    pub fn with_classes(records: Vec<Record>, classes: Vec<String>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        let known: HashSet<&str> = classes.iter().map(String::as_str).collect();
        for r in &records {
            if !seen.insert(r.record_id.as_str()) {
                return Err(DatasetError::DuplicateRecordId(r.record_id.clone()));
            }
            if !known.contains(r.label.as_str()) {
                return Err(DatasetError::UnknownLabel {
                    id: r.record_id.clone(),
                    label: r.label.clone(),
                });
            }
        }
        Ok(Self { records, classes })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts indexed as `[class][split]` in `Split::ALL` order.
    pub fn counts(&self) -> Vec<[usize; 3]> {
        let mut counts = vec![[0usize; 3]; self.classes.len()];
        for r in &self.records {
            let c = self.class_index(&r.label).expect("labels validated");
            let s = Split::ALL.iter().position(|&s| s == r.split).unwrap();
            counts[c][s] += 1;
        }
        counts
    }

    /// Text table of per-class split counts with totals.
    pub fn distribution_table(&self) -> String {
        let counts = self.counts();
        let width = self.classes.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!(
            "{:<width$} {:>8} {:>8} {:>8} {:>8}\n",
            "", "train", "test", "val", "total"
        );
        let mut totals = [0usize; 3];
        for (name, c) in self.classes.iter().zip(&counts) {
            let [tr, va, te] = *c;
            totals[0] += tr;
            totals[1] += va;
            totals[2] += te;
            out += &format!("{name:<width$} {tr:>8} {te:>8} {va:>8} {:>8}\n", tr + va + te);
        }
        let [tr, va, te] = totals;
        out += &format!("{:<width$} {tr:>8} {te:>8} {va:>8} {:>8}\n", "total", tr + va + te);
        out
    }
}

const HEADER: [&str; 3] = ["record_id", "label", "split"];

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_manifest(file)
}

/// Parses a manifest from any CSV source.
pub fn read_manifest(reader: impl std::io::Read) -> Result<DatasetManifest, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(DatasetError::ParseError {
            line: 1,
            message: format!(
                "expected header 'record_id,label,split', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(&e, i as u64 + 2))?;
        let line = row.position().map_or(i as u64 + 2, |p| p.line());
        let record: Record = row.deserialize(Some(&headers)).map_err(|e| DatasetError::ParseError {
            line,
            message: e.to_string(),
        })?;
        if record.record_id.is_empty() || record.label.is_empty() {
            return Err(DatasetError::ParseError {
                line,
                message: "empty record_id or label".into(),
            });
        }
        records.push(record);
    }
    DatasetManifest::new(records)
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> DatasetError {
    DatasetError::ParseError {
        line: e.position().map_or(fallback_line, |p| p.line()),
        message: e.to_string(),
    }
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = manifest_to_bytes(manifest);
    std::fs::write(path, bytes).map_err(io_err)
}

/// Serializes a manifest to CSV bytes.
pub fn manifest_to_bytes(manifest: &DatasetManifest) -> Vec<u8> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(HEADER).expect("in-memory write");
    for r in &manifest.records {
        wtr.serialize(r).expect("in-memory write");
    }
    wtr.into_inner().expect("in-memory flush")
}

/// Fractions of each class's train records kept as the new train and val
/// splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.25,
            val_fraction: 0.125,
            seed: 0,
        }
    }
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t > 0.0 && t <= 1.0) {
            return Err(DatasetError::InvalidSpec(format!("train_fraction {t} not in (0, 1]")));
        }
        if !(0.0..1.0).contains(&v) {
            return Err(DatasetError::InvalidSpec(format!("val_fraction {v} not in [0, 1)")));
        }
        if t + v > 1.0 + 1e-12 {
            return Err(DatasetError::InvalidSpec(format!(
                "train_fraction + val_fraction = {} > 1",
                t + v
            )));
        }
        Ok(())
    }

    /// Records requested out of `n`: `floor(fraction * n)`.
    ///
    /// The product gets a 1e-9 nudge so that e.g. `0.29 * 100` counts as 29.
    pub fn take(fraction: f64, n: usize) -> usize {
        (fraction * n as f64 + 1e-9).floor() as usize
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the ChaCha8 stream used for one class.
pub fn class_stream_seed(seed: u64, class_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(class_index as u64))
}

/// Uniform index in `0..bound` by rejection sampling.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Fisher-Yates shuffle drawing from `rng`.
pub fn shuffle_with<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = uniform_below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Fisher-Yates shuffle driven by a fresh ChaCha8 stream seeded with `seed`.
pub fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    shuffle_with(items, &mut ChaCha8Rng::seed_from_u64(seed));
}

/// Redistributes train records into new train and val splits, per class.
///
/// For a class with `n` train records, `floor(train_fraction * n)` go to the
/// new train split and the next `floor(val_fraction * n)` of the same shuffle
/// go to val. Test records pass through untouched; unselected train records
/// and the original val records are dropped. Record order of the input is
/// preserved in the output.
pub fn resample(manifest: &DatasetManifest, spec: &ResampleSpec) -> Result<DatasetManifest, DatasetError> {
    spec.validate()?;
    if manifest.split(Split::Train).next().is_none() {
        return Err(DatasetError::EmptyTrainSplit);
    }

    let mut assigned: HashMap<&str, Split> = HashMap::new();
    for (ci, class) in manifest.classes.iter().enumerate() {
        let mut ids: Vec<&str> = manifest
            .split(Split::Train)
            .filter(|r| &r.label == class)
            .map(|r| r.record_id.as_str())
            .collect();
        ids.sort_unstable();
        let n = ids.len();
        let n_train = ResampleSpec::take(spec.train_fraction, n);
        let n_val = ResampleSpec::take(spec.val_fraction, n);
        if n_train + n_val > n {
            return Err(DatasetError::InsufficientRecords {
                class: class.clone(),
                available: n,
                requested: n_train + n_val,
            });
        }
        seeded_shuffle(&mut ids, class_stream_seed(spec.seed, ci));
        for &id in &ids[..n_train] {
            assigned.insert(id, Split::Train);
        }
        for &id in &ids[n_train..n_train + n_val] {
            assigned.insert(id, Split::Val);
        }
    }

    let records = manifest
        .records
        .iter()
        .filter_map(|r| match r.split {
            Split::Test => Some(r.clone()),
            Split::Val => None,
            Split::Train => assigned
                .get(r.record_id.as_str())
                .map(|&split| Record { split, ..r.clone() }),
        })
        .collect();
    DatasetManifest::with_classes(records, manifest.classes.clone())
}
