//! Binary model file.
//!
//! ```text
//! magic "OCTM" | version u16 = 1 | K u16 | D u32
//! class table: K x (name_len u16, UTF-8 name)
//! weights: K x D f32, row-major | biases: K x f32
//! ```
//!
//! All multi-byte values are little-endian. Parameters are narrowed to `f32`
//! on write.

use std::path::Path;

use super::ClassifierModel;
use crate::store::{put_class_table, write_atomic, Reader, StoreError};

pub const MODEL_MAGIC: [u8; 4] = *b"OCTM";
pub const MODEL_VERSION: u16 = 1;

pub fn model_to_bytes(model: &ClassifierModel) -> Result<Vec<u8>, StoreError> {
    let k = u16::try_from(model.num_classes()).map_err(|_| StoreError::TooLarge("class count"))?;
    let d = u32::try_from(model.feature_dim()).map_err(|_| StoreError::TooLarge("dim"))?;
    let mut out = Vec::with_capacity(12 + (model.weights.len() + model.bias.len()) * 4 + 64);
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    put_class_table(&mut out, model.classes())?;
    for &w in model.weights.iter().chain(&model.bias) {
        out.extend_from_slice(&(w as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ClassifierModel, StoreError> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let version = r.u16("version")?;
    if version != MODEL_VERSION {
        return Err(StoreError::VersionUnsupported(version));
    }
    let k = r.u16("class count")? as usize;
    let d = r.u32("dim")? as usize;
    let classes = r.class_table(k)?;
    let mut read_n = |n: usize, what| -> Result<Vec<f64>, StoreError> {
        if r.remaining() < n * 4 {
            return Err(StoreError::TruncatedFile(what));
        }
        (0..n).map(|_| r.f32(what).map(f64::from)).collect()
    };
    let weights = read_n(k * d, "weights")?;
    let bias = read_n(k, "biases")?;
    if r.remaining() > 0 {
        return Err(StoreError::TrailingBytes(r.remaining()));
    }
    Ok(ClassifierModel::from_parts(classes, d, weights, bias).expect("shapes read from header"))
}

pub fn write_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), &model_to_bytes(model)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ClassifierModel, StoreError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let m = ClassifierModel::from_parts(vec!["A".into(), "BC".into()], 1, vec![1.0, -2.0], vec![0.5, 0.0]).unwrap();
        let bytes = model_to_bytes(&m).unwrap();
        let mut expected = b"OCTM".to_vec();
        expected.extend_from_slice(&[1, 0, 2, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, b'A', 2, 0, b'B', b'C']);
        for v in [1.0f32, -2.0, 0.5, 0.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
        assert_eq!(model_from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn corrupt_files() {
        let m = ClassifierModel::zeros(vec!["A".into()], 3);
        let good = model_to_bytes(&m).unwrap();
        assert!(matches!(
            model_from_bytes(b"OCTFxxxx"),
            Err(StoreError::MagicMismatch { .. })
        ));
        assert!(matches!(
            model_from_bytes(&good[..good.len() - 1]),
            Err(StoreError::TruncatedFile(_))
        ));
        let mut bad = good.clone();
        bad[4] = 7;
        assert!(matches!(model_from_bytes(&bad), Err(StoreError::VersionUnsupported(7))));
    }
}
