//! End-to-end stages, each reading and writing explicit files.
//!
//! These functions back the `octfeat` subcommands; they are also usable
//! directly from code. Every error maps to a process exit code through
//! [`PipelineError::exit_code`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{self, ClassifierError, ClassifierModel, TrainConfig, TrainHistory};
use crate::dataset::{self, DatasetError, DatasetManifest, Record, ResampleSpec, Split};
use crate::features::{self, Extractor, Method};
use crate::hog::HogParams;
use crate::imaging::{self, ImagingError};
use crate::lbp::LbpPreset;
use crate::metrics::{self, EvaluationReport, MetricsError, ReportMetadata};
use crate::store::{self, FeatureMatrix, FeatureRow, StoreError};

/// Image file extensions picked up by [`scan`].
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
    #[error("no images found under {0}")]
    EmptyDataset(String),
    #[error("method 'external' cannot be extracted here; external stores are produced by the CNN exporter and only ingested")]
    ExternalNotExtractable,
    #[error("{} record(s) failed:\n{}", .0.len(), .0.iter().map(|(id, e)| format!("  {id}: {e}")).collect::<Vec<_>>().join("\n"))]
    RecordFailures(Vec<(String, String)>),
}

impl PipelineError {
    /// 1 usage error, 2 data error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::ExternalNotExtractable => 1,
            PipelineError::Io(_) => 3,
            PipelineError::Data(_) | PipelineError::EmptyDataset(_) | PipelineError::RecordFailures(_) => 2,
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => PipelineError::Io(e.to_string()),
            DatasetError::InvalidSpec(_) => PipelineError::Usage(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => PipelineError::Io(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<ClassifierError> for PipelineError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::InvalidConfig(_) => PipelineError::Usage(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { .. } => PipelineError::Io(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<ImagingError> for PipelineError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::Write { .. } => PipelineError::Io(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

fn require_exists(path: &Path, what: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Io(format!("{what} {} does not exist", path.display())))
    }
}

/// Optional settings file (TOML). Keys mirror the command-line options;
/// explicit flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_root: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub method: Option<Method>,
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub hog: Option<HogSettings>,
    pub train: Option<TrainConfig>,
    pub resample: Option<ResampleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HogSettings {
    pub orientations: usize,
    pub cell_size: usize,
    pub block_size: usize,
    pub block_stride: usize,
}

impl Default for HogSettings {
    fn default() -> Self {
        let p = HogParams::default();
        Self {
            orientations: p.orientations,
            cell_size: p.cell_size,
            block_size: p.block_size,
            block_stride: p.block_stride,
        }
    }
}

impl From<HogSettings> for HogParams {
    fn from(s: HogSettings) -> Self {
        HogParams {
            orientations: s.orientations,
            cell_size: s.cell_size,
            block_size: s.block_size,
            block_stride: s.block_stride,
            ..HogParams::default()
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        toml::from_str(&text).map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Builds the extractor for a method and optional LBP preset name.
pub fn build_extractor(
    method: Method,
    preset: Option<&str>,
    hog: Option<HogSettings>,
) -> Result<Extractor, PipelineError> {
    match method {
        Method::Hog => Ok(Extractor::Hog(hog.map(HogParams::from).unwrap_or_default())),
        Method::Lbp => {
            let preset: LbpPreset = preset.unwrap_or("paper-dim").parse().map_err(PipelineError::Usage)?;
            Ok(Extractor::Lbp(preset.params()))
        }
        Method::External => Err(PipelineError::ExternalNotExtractable),
    }
}

/// Feature family implied by a canonical feature dimension.
pub fn source_for_dim(dim: usize) -> &'static str {
    match dim {
        features::HOG_DIM => "hog",
        features::LBP_DIM | 3528 => "lbp",
        features::DENSENET169_DIM => "densenet169",
        features::RESNET50_DIM => "resnet50",
        _ => "external",
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::fs::DirEntry>, PipelineError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| io_error(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Outcome of [`scan`]: the manifest plus anything that was skipped.
#[derive(Debug)]
pub struct ScanResult {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
}

/// Builds a manifest from a `<root>/<split>/<class>/<file>` layout.
///
/// Record ids are `split/class/file`. Directories other than `train`, `val`
/// and `test` are skipped with a warning, as are non-image files.
pub fn scan(root: impl AsRef<Path>) -> Result<ScanResult, PipelineError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(PipelineError::Io(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for split_entry in sorted_entries(root)? {
        let split_name = split_entry.file_name().to_string_lossy().into_owned();
        if !split_entry.path().is_dir() {
            continue;
        }
        let Ok(split) = split_name.parse::<Split>() else {
            warnings.push(format!("skipping unknown split directory '{split_name}'"));
            continue;
        };
        for class_entry in sorted_entries(&split_entry.path())? {
            if !class_entry.path().is_dir() {
                continue;
            }
            let Some(class) = class_entry.file_name().to_str().map(String::from) else {
                warnings.push(format!(
                    "skipping non UTF-8 class directory {:?}",
                    class_entry.file_name()
                ));
                continue;
            };
            for file in sorted_entries(&class_entry.path())? {
                let path = file.path();
                if !path.is_file() || !is_image(&path) {
                    continue;
                }
                let Some(name) = file.file_name().to_str().map(String::from) else {
                    warnings.push(format!("skipping non UTF-8 file name {:?}", file.file_name()));
                    continue;
                };
                records.push(Record::new(
                    format!("{split_name}/{class}/{name}"),
                    class.clone(),
                    split,
                ));
            }
        }
    }
    if records.is_empty() {
        return Err(PipelineError::EmptyDataset(root.display().to_string()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ScanResult {
        manifest: DatasetManifest::new(records)?,
        warnings,
    })
}

pub fn cmd_scan(root: &Path, out_manifest: &Path) -> Result<ScanResult, PipelineError> {
    let result = scan(root)?;
    dataset::save_manifest(&result.manifest, out_manifest)?;
    Ok(result)
}

pub fn cmd_split(manifest: &Path, spec: &ResampleSpec, out: &Path) -> Result<DatasetManifest, PipelineError> {
    require_exists(manifest, "manifest")?;
    let m = dataset::load_manifest(manifest)?;
    let resampled = dataset::resample(&m, spec)?;
    dataset::save_manifest(&resampled, out)?;
    Ok(resampled)
}

fn load_canonical(root: &Path, record: &Record) -> Result<imaging::CanonicalImage, ImagingError> {
    let img = imaging::load_image(root.join(&record.record_id))?;
    imaging::canonicalize(&img)
}

/// Writes the 224x224 canonical PNG of every record in `split` to
/// `out_dir/<record_id with a .png extension>`. Returns the number written.
pub fn preprocess(
    manifest: &DatasetManifest,
    root: &Path,
    split: Split,
    out_dir: &Path,
) -> Result<usize, PipelineError> {
    require_exists(root, "dataset root")?;
    let records: Vec<&Record> = manifest.split(split).collect();
    let failures: Vec<(String, String)> = records
        .par_iter()
        .filter_map(|r| {
            let target = out_dir.join(&r.record_id).with_extension("png");
            let result = load_canonical(root, r).map_err(|e| e.to_string()).and_then(|c| {
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
                }
                imaging::save_png(c.image(), &target).map_err(|e| e.to_string())
            });
            result.err().map(|e| (r.record_id.clone(), e))
        })
        .collect();
    if !failures.is_empty() {
        return Err(PipelineError::RecordFailures(failures));
    }
    Ok(records.len())
}

/// Extracts features for every record of `split`.
///
/// All records are attempted; if any fail, every failure is reported and no
/// matrix is returned. Rows are sorted by record id.
pub fn extract(
    manifest: &DatasetManifest,
    root: &Path,
    split: Split,
    extractor: &Extractor,
) -> Result<FeatureMatrix, PipelineError> {
    require_exists(root, "dataset root")?;
    let dim = extractor
        .output_dim(imaging::CANONICAL_SIDE, imaging::CANONICAL_SIDE)
        .ok_or_else(|| PipelineError::Usage(format!("{extractor:?} does not fit a 224x224 image")))?;
    let records: Vec<&Record> = manifest.split(split).collect();
    let results: Vec<Result<FeatureRow, (String, String)>> = records
        .par_iter()
        .map(|r| {
            let fail = |e: String| (r.record_id.clone(), e);
            let canonical = load_canonical(root, r).map_err(|e| fail(e.to_string()))?;
            let v = extractor.extract(canonical.image()).map_err(|e| fail(e.to_string()))?;
            Ok(FeatureRow {
                record_id: r.record_id.clone(),
                label: manifest.class_index(&r.label).expect("manifest labels are validated"),
                values: v.values,
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        failures.sort();
        return Err(PipelineError::RecordFailures(failures));
    }
    rows.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    Ok(FeatureMatrix::new(
        dim,
        manifest.classes().to_vec(),
        rows,
        extractor.name(),
    )?)
}

pub fn cmd_extract(
    manifest: &Path,
    root: &Path,
    split: Split,
    extractor: &Extractor,
    out_store: &Path,
) -> Result<FeatureMatrix, PipelineError> {
    require_exists(manifest, "manifest")?;
    let m = dataset::load_manifest(manifest)?;
    let matrix = extract(&m, root, split, extractor)?;
    store::write_store(&matrix, out_store)?;
    Ok(matrix)
}

/// Training settings written next to a model as `<model>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub feature_source: String,
    pub feature_dim: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    pub train_config: TrainConfig,
    pub initialization: String,
    pub regularization: String,
    pub shuffling: String,
}

impl TrainingRecord {
    /// Hex SHA-256 of the JSON-serialized training configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(&self.train_config).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub struct TrainOutputs {
    pub model: ClassifierModel,
    pub history: TrainHistory,
    pub record: TrainingRecord,
}

pub fn cmd_train(
    train_store: &Path,
    val_store: Option<&Path>,
    cfg: &TrainConfig,
    feature_source: Option<&str>,
    out_model: &Path,
    out_history: Option<&Path>,
) -> Result<TrainOutputs, PipelineError> {
    require_exists(train_store, "train store")?;
    let train = store::read_store(train_store)?;
    let val = match val_store {
        Some(p) => {
            require_exists(p, "validation store")?;
            store::read_store(p)?
        }
        None => FeatureMatrix::empty(train.dim(), train.classes().to_vec(), ""),
    };
    let (model, history) = classifier::train(&train, &val, cfg)?;
    let record = TrainingRecord {
        feature_source: feature_source.unwrap_or(source_for_dim(train.dim())).to_string(),
        feature_dim: train.dim(),
        train_rows: train.len(),
        val_rows: val.len(),
        train_config: cfg.clone(),
        initialization: "zeros".into(),
        regularization: "none".into(),
        shuffling: "per-epoch Fisher-Yates, ChaCha8 seeded by shuffle_seed".into(),
    };
    classifier::write_model(&model, out_model)?;
    let sidecar = sidecar_path(out_model);
    let json = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
    std::fs::write(&sidecar, json).map_err(|e| io_error(&sidecar, e))?;
    if let Some(h) = out_history {
        if !history.is_empty() {
            metrics::emit_curves(&history, h)?;
        } else {
            std::fs::write(h, history.to_csv()).map_err(|e| io_error(h, e))?;
        }
    }
    Ok(TrainOutputs { model, history, record })
}

/// Predicts on a matrix and builds the evaluation report.
pub fn evaluate(
    model: &ClassifierModel,
    test: &FeatureMatrix,
    metadata: ReportMetadata,
) -> Result<EvaluationReport, PipelineError> {
    if model.classes() != test.classes() {
        return Err(ClassifierError::ClassMismatch(model.classes().to_vec(), test.classes().to_vec()).into());
    }
    let preds = classifier::predict(model, test)?;
    let predicted: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let cm = metrics::ConfusionMatrix::from_labels(&test.labels(), &predicted, model.classes().to_vec())?;
    Ok(metrics::report(&cm)?.with_metadata(metadata))
}

pub fn cmd_eval(
    model_path: &Path,
    test_store: &Path,
    name: Option<&str>,
    out_report: &Path,
    out_csv: Option<&Path>,
) -> Result<EvaluationReport, PipelineError> {
    require_exists(model_path, "model")?;
    require_exists(test_store, "test store")?;
    let model = classifier::read_model(model_path)?;
    let test = store::read_store(test_store)?;

    let sidecar = sidecar_path(model_path);
    let record: Option<TrainingRecord> = match std::fs::read_to_string(&sidecar) {
        Ok(text) => {
            Some(serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", sidecar.display())))?)
        }
        Err(_) => None,
    };
    let mut notes = BTreeMap::new();
    let config_hash = match &record {
        Some(r) => {
            let c = &r.train_config;
            notes.insert("epochs".into(), c.epochs.to_string());
            notes.insert("learning_rate".into(), c.learning_rate.to_string());
            notes.insert("batch_size".into(), c.batch_size.to_string());
            notes.insert(
                "adam".into(),
                format!("beta1={} beta2={} epsilon={}", c.beta1, c.beta2, c.epsilon),
            );
            notes.insert("shuffle_seed".into(), c.shuffle_seed.to_string());
            notes.insert("initialization".into(), r.initialization.clone());
            notes.insert("regularization".into(), r.regularization.clone());
            notes.insert("shuffling".into(), r.shuffling.clone());
            r.config_hash()
        }
        None => {
            let bytes = std::fs::read(model_path).map_err(|e| io_error(model_path, e))?;
            hex::encode(Sha256::digest(bytes))
        }
    };
    let feature_source = name
        .map(String::from)
        .or_else(|| record.as_ref().map(|r| r.feature_source.clone()))
        .unwrap_or_else(|| source_for_dim(test.dim()).to_string());
    let report = evaluate(
        &model,
        &test,
        ReportMetadata {
            feature_source,
            config_hash,
            notes,
        },
    )?;
    let line = report.to_json_line() + "\n";
    std::fs::write(out_report, line).map_err(|e| io_error(out_report, e))?;
    if let Some(csv) = out_csv {
        std::fs::write(csv, report.to_csv()).map_err(|e| io_error(csv, e))?;
    }
    Ok(report)
}

/// Reads report files and writes `recall_comparison.csv` and
/// `accuracy_comparison.csv` into `out_dir`.
pub fn cmd_report(reports: &[PathBuf], out_dir: &Path) -> Result<Vec<EvaluationReport>, PipelineError> {
    if reports.is_empty() {
        return Err(PipelineError::Usage("at least one report is required".into()));
    }
    let mut all = Vec::new();
    for p in reports {
        let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
        all.extend(metrics::parse_reports(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", p.display())))?);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    metrics::emit_recall_comparison(&all, out_dir.join("recall_comparison.csv"))?;
    metrics::emit_accuracy_comparison(&all, out_dir.join("accuracy_comparison.csv"))?;
    Ok(all)
}

/// Text table with one accuracy per method.
pub fn accuracy_table(reports: &[EvaluationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out += &format!("{:<14} {:.7}\n", r.method(), r.accuracy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, w: u32, h: u32, v: u8) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        image::GrayImage::from_pixel(w, h, image::Luma([v])).save(path).unwrap();
    }

    #[test]
    fn scan_layout() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write_png(&root.join("train/CNV/a.png"), 4, 4, 10);
        write_png(&root.join("train/DME/b.png"), 4, 4, 20);
        write_png(&root.join("weird/DME/c.png"), 4, 4, 20);
        std::fs::write(root.join("train/DME/notes.txt"), "x").unwrap();
        let res = scan(root).unwrap();
        assert_eq!(res.manifest.len(), 2);
        assert_eq!(res.manifest.classes(), ["CNV", "DME"]);
        assert_eq!(res.manifest.records()[0].record_id, "train/CNV/a.png");
        assert_eq!(res.warnings.len(), 1);
    }

    #[test]
    fn scan_empty_root() {
        let dir = tempfile::tempdir().unwrap();
        let err = scan(dir.path()).unwrap_err();
        assert!(matches!(err, PipelineError::EmptyDataset(_)));
        assert_ne!(err.exit_code(), 0);
    }

    #[test]
    fn class_order_matches_dataset() {
        let dir = tempfile::tempdir().unwrap();
        for c in ["NORMAL", "DRUSEN", "CNV", "DME"] {
            write_png(&dir.path().join(format!("test/{c}/x.png")), 2, 2, 0);
        }
        assert_eq!(
            scan(dir.path()).unwrap().manifest.classes(),
            ["CNV", "DME", "DRUSEN", "NORMAL"]
        );
    }

    #[test]
    fn external_is_not_extractable() {
        let err = build_extractor(Method::External, None, None).unwrap_err();
        assert!(matches!(err, PipelineError::ExternalNotExtractable));
        assert!(matches!(
            build_extractor(Method::Lbp, Some("bogus"), None),
            Err(PipelineError::Usage(_))
        ));
    }

    #[test]
    fn extract_hog_row() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("test/CNV/a.png"), 50, 30, 90);
        let m = scan(dir.path()).unwrap().manifest;
        let ex = build_extractor(Method::Hog, None, None).unwrap();
        let matrix = extract(&m, dir.path(), Split::Test, &ex).unwrap();
        assert_eq!((matrix.len(), matrix.dim()), (1, 5408));
    }

    #[test]
    fn extract_reports_every_failure() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("test/CNV/a.png"), 8, 8, 90);
        std::fs::write(dir.path().join("test/CNV/b.png"), b"broken").unwrap();
        std::fs::write(dir.path().join("test/CNV/c.png"), b"broken").unwrap();
        let m = scan(dir.path()).unwrap().manifest;
        let out = dir.path().join("s.octf");
        let ex = build_extractor(Method::Hog, None, None).unwrap();
        let manifest_path = dir.path().join("m.csv");
        dataset::save_manifest(&m, &manifest_path).unwrap();
        match cmd_extract(&manifest_path, dir.path(), Split::Test, &ex, &out) {
            Err(PipelineError::RecordFailures(f)) => assert_eq!(f.len(), 2),
            other => panic!("unexpected {:?}", other.map(|m| m.len())),
        }
        assert!(!out.exists());
    }

    #[test]
    fn run_config_parses() {
        let cfg: RunConfig = toml::from_str(
            r#"
            method = "lbp"
            preset = "paper-table3"
            [train]
            epochs = 5
            learning_rate = 0.01
            [resample]
            train_fraction = 0.5
            val_fraction = 0.25
            seed = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.method, Some(Method::Lbp));
        let t = cfg.train.unwrap();
        assert_eq!((t.epochs, t.batch_size), (5, 32));
        assert_eq!(cfg.resample.unwrap().seed, 3);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn dims_map_to_sources() {
        assert_eq!(source_for_dim(5408), "hog");
        assert_eq!(source_for_dim(1960), "lbp");
        assert_eq!(source_for_dim(1664), "densenet169");
        assert_eq!(source_for_dim(2048), "resnet50");
        assert_eq!(source_for_dim(7), "external");
    }
}
