//! The whole pipeline on a generated image folder:
//! scan, split, extract (HOG and LBP), train, evaluate, compare.

use std::path::Path;

use octfeat::classifier::TrainConfig;
use octfeat::dataset::{ResampleSpec, Split};
use octfeat::pipeline;
use octfeat::Method;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One stripe orientation per class, jittered period and noise.
fn write_corpus(root: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (c, class) in ["CNV", "DME", "DRUSEN", "NORMAL"].iter().enumerate() {
        for (split, n) in [("train", 24), ("test", 8)] {
            let dir = root.join(split).join(class);
            std::fs::create_dir_all(&dir)?;
            for i in 0..n {
                let period = rng.gen_range(6.0..10.0f32);
                let img = image::GrayImage::from_fn(256, 160, |x, y| {
                    let t = [x as f32, y as f32, (x + y) as f32, x as f32 - y as f32][c];
                    let v = 0.5 + 0.4 * (t * std::f32::consts::TAU / period).sin() + rng.gen_range(-0.1..0.1);
                    image::Luma([(v.clamp(0.0, 1.0) * 255.0) as u8])
                });
                img.save(dir.join(format!("{i:03}.png")))?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let (root, out) = (work.path().join("images"), work.path());
    write_corpus(&root)?;

    let scanned = pipeline::cmd_scan(&root, &out.join("manifest.csv"))?;
    println!("{}", scanned.manifest.distribution_table());
    let spec = ResampleSpec {
        train_fraction: 0.75,
        val_fraction: 0.25,
        seed: 1,
    };
    pipeline::cmd_split(&out.join("manifest.csv"), &spec, &out.join("split.csv"))?;

    let cfg = TrainConfig {
        epochs: 40,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let mut reports = Vec::new();
    for method in [Method::Hog, Method::Lbp] {
        let ex = pipeline::build_extractor(method, None, None)?;
        for split in Split::ALL {
            let store = out.join(format!("{method}_{split}.octf"));
            pipeline::cmd_extract(&out.join("split.csv"), &root, split, &ex, &store)?;
        }
        let model = out.join(format!("{method}.octm"));
        pipeline::cmd_train(
            &out.join(format!("{method}_train.octf")),
            Some(&out.join(format!("{method}_val.octf"))),
            &cfg,
            None,
            &model,
            Some(&out.join(format!("{method}_history.csv"))),
        )?;
        let report_path = out.join(format!("{method}.jsonl"));
        let r = pipeline::cmd_eval(
            &model,
            &out.join(format!("{method}_test.octf")),
            None,
            &report_path,
            None,
        )?;
        println!("== {method}\n{}", r.to_text());
        reports.push(report_path);
    }

    let all = pipeline::cmd_report(&reports, &out.join("comparison"))?;
    print!("{}", pipeline::accuracy_table(&all));
    print!(
        "{}",
        std::fs::read_to_string(out.join("comparison/recall_comparison.csv"))?
    );
    Ok(())
}
