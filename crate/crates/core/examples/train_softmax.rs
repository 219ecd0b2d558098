//! Train the softmax classifier on a small synthetic problem and save it.

use octfeat::classifier::{self, TrainConfig};
use octfeat::store::{FeatureMatrix, FeatureRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, seed: u64, prefix: &str) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]];
    let rows = (0..n)
        .map(|i| FeatureRow {
            record_id: format!("{prefix}{i:04}"),
            label: i % 4,
            values: centers[i % 4].iter().map(|c| c + rng.gen_range(-0.3..0.3f32)).collect(),
        })
        .collect();
    FeatureMatrix::new(
        3,
        ["CNV", "DME", "DRUSEN", "NORMAL"].map(String::from).to_vec(),
        rows,
        "blobs",
    )
    .unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, val) = (blobs(400, 1, "tr"), blobs(100, 2, "va"));
    let cfg = TrainConfig {
        epochs: 30,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let (model, history) = classifier::train(&train, &val, &cfg)?;

    for e in history.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3}  train acc {:.3} loss {:.4}  val acc {:.3} loss {:.4}",
            e.epoch,
            e.train_accuracy,
            e.train_loss,
            e.val_accuracy.unwrap_or(f64::NAN),
            e.val_loss.unwrap_or(f64::NAN)
        );
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.octm");
    classifier::write_model(&model, &path)?;
    let loaded = classifier::read_model(&path)?;
    let probs = loaded.probabilities(&[0.9, 0.1, 0.0]);
    println!("p(class | [0.9, 0.1, 0.0]) = {probs:.3?}");
    Ok(())
}
