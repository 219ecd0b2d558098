//! Write a feature store, read it back, and validate it against a manifest.

use octfeat::dataset::{DatasetManifest, Record, Split};
use octfeat::store::{self, FeatureMatrix, FeatureRow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let classes: Vec<String> = ["CNV", "DME", "DRUSEN", "NORMAL"].map(String::from).to_vec();
    let rows: Vec<FeatureRow> = (0..8)
        .map(|i| FeatureRow {
            record_id: format!("test/{}/{i}.jpeg", classes[i % 4]),
            label: i % 4,
            values: (0..6).map(|j| (i * 6 + j) as f32 / 10.0).collect(),
        })
        .collect();
    let matrix = FeatureMatrix::new(6, classes.clone(), rows, "demo")?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("test.octf");
    store::write_store(&matrix, &path)?;
    let bytes = std::fs::read(&path)?;
    println!(
        "{} rows x {} -> {} bytes, magic {:?}",
        matrix.len(),
        matrix.dim(),
        bytes.len(),
        std::str::from_utf8(&bytes[..4])?
    );

    let back = store::read_store(&path)?;
    assert!(back.bit_identical(&matrix));
    println!("roundtrip is bit-exact");

    // a manifest with one record the store lacks and without one it has
    let mut records: Vec<Record> = matrix.rows()[1..]
        .iter()
        .map(|r| Record::new(r.record_id.clone(), classes[r.label].clone(), Split::Test))
        .collect();
    records.push(Record::new("test/CNV/extra.jpeg", "CNV", Split::Test));
    let manifest = DatasetManifest::with_classes(records, classes)?;
    let report = store::validate_against_manifest(&back, &manifest, Split::Test);
    print!("{report}");

    let mut truncated = bytes.clone();
    truncated.truncate(bytes.len() - 4);
    println!("truncated file: {}", store::from_bytes(&truncated).unwrap_err());
    Ok(())
}
