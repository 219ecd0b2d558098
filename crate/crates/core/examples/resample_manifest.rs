//! Build a manifest in memory and draw the reduced train/val subsets.

use octfeat::dataset::{self, DatasetManifest, Record, ResampleSpec, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = [("CNV", 370), ("DME", 113), ("DRUSEN", 86), ("NORMAL", 263)];
    let mut records = Vec::new();
    for (class, n) in sizes {
        for i in 0..n {
            records.push(Record::new(format!("train/{class}/{i:05}.jpeg"), class, Split::Train));
        }
        for i in 0..24 {
            records.push(Record::new(format!("test/{class}/{i:05}.jpeg"), class, Split::Test));
        }
    }
    let full = DatasetManifest::new(records)?;
    println!("full dataset\n{}", full.distribution_table());

    let spec = ResampleSpec {
        seed: 42,
        ..ResampleSpec::default()
    };
    let reduced = dataset::resample(&full, &spec)?;
    println!(
        "after resampling ({} train, {} val)\n{}",
        spec.train_fraction,
        spec.val_fraction,
        reduced.distribution_table()
    );

    // same seed, same bytes
    let again = dataset::resample(&full, &spec)?;
    assert_eq!(dataset::manifest_to_bytes(&reduced), dataset::manifest_to_bytes(&again));

    let csv = String::from_utf8(dataset::manifest_to_bytes(&reduced))?;
    println!("first rows:");
    csv.lines().take(4).for_each(|l| println!("  {l}"));
    Ok(())
}
