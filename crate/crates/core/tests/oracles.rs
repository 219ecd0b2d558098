mod common;

use approx::assert_relative_eq;
use octfeat::classifier::{self, ClassifierModel};
use octfeat::dataset::ResampleSpec;
use octfeat::features::{DENSENET169_DIM, HOG_DIM, LBP_DIM, RESNET50_DIM};
use octfeat::hog::{self, HogParams};
use octfeat::lbp::{self, LbpParams, LbpPreset};
use octfeat::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn published_dimensions() {
    assert_eq!(HOG_DIM, 5408);
    assert_eq!(LBP_DIM, 1960);
    assert_eq!(DENSENET169_DIM, 1664);
    assert_eq!(RESNET50_DIM, 2048);
    assert_eq!(HogParams::default().output_dim(224, 224), Some(13 * 13 * 2 * 2 * 8));
    assert_eq!(LbpPreset::PaperDim.params().output_dim(224, 224), Some(14 * 14 * 10));
    assert_eq!(LbpPreset::PaperTable3.params().output_dim(224, 224), Some(14 * 14 * 18));
}

#[test]
fn resample_count_matches_floor() {
    assert_eq!(ResampleSpec::take(0.25, 37205), 9301);
}

#[test]
fn hog_descriptor_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for stride in [1, 2] {
        for _ in 0..5 {
            let img = common::random_image(&mut rng, 64, 48);
            let p = HogParams {
                block_stride: stride,
                ..HogParams::default()
            };
            let got = hog::hog_extract(&img, &p).unwrap().values;
            let want = common::naive_hog(&img, 16, 2, stride, 8);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((*g as f64 - w).abs() < 1e-6, "{g} vs {w}");
            }
        }
    }
}

#[test]
fn hog_vertical_halves() {
    let img = GrayImage::from_fn(32, 32, |x, _| if x < 16 { 0.0 } else { 1.0 });
    let grid = hog::cell_histograms(&img, &HogParams::default()).unwrap();
    let naive = common::naive_cell_histograms(&img, 16, 8);
    for cy in 0..2 {
        for cx in 0..2 {
            let cell = grid.cell(cx, cy);
            assert_eq!(cell, naive[cy * 2 + cx].as_slice());
            assert!(cell[1..].iter().all(|&v| v == 0.0));
        }
    }
    let v = hog::hog_extract(&img, &HogParams::default()).unwrap().values;
    for block in v.chunks(8) {
        assert!(block[1..].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn lbp_codes_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (points, radius) in [(8, 1.0), (8, 2.0), (16, 2.0), (12, 1.5)] {
        let p = LbpParams {
            points,
            radius,
            ..LbpParams::default()
        };
        for _ in 0..10 {
            let img = common::random_image(&mut rng, 19, 13);
            assert_eq!(
                lbp::lbp_codes(&img, &p).unwrap(),
                common::naive_lbp_codes(&img, points, radius)
            );
        }
    }
}

#[test]
fn lbp_histograms_from_brute_force_codes() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let img = common::random_image(&mut rng, 32, 32);
    let p = LbpPreset::PaperDim.params();
    let codes = common::naive_lbp_codes(&img, p.points, p.radius);
    let v = lbp::lbp_extract(&img, &p).unwrap().values;
    for (b, (bx, by)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        let mut h = vec![0.0f64; p.bins()];
        for y in by * 16..by * 16 + 16 {
            for x in bx * 16..bx * 16 + 16 {
                h[codes[y * 32 + x] as usize] += 1.0 / 256.0;
            }
        }
        for (k, want) in h.iter().enumerate() {
            assert_eq!(v[b * p.bins() + k], *want as f32);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=6);
        let classes: Vec<String> = (0..4).map(|k| k.to_string()).collect();
        let weights = (0..4 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = ClassifierModel::from_parts(classes, d, weights, bias).unwrap();
        let xs: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0f32)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let refs: Vec<&[f32]> = xs.iter().map(Vec::as_slice).collect();
        let g = classifier::gradient(&model, &refs, &labels).unwrap();

        let analytic = g.weights.iter().chain(&g.bias);
        for (i, &a) in analytic.enumerate() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let nw = plus.weights.len();
            if i < nw {
                plus.weights[i] += h;
                minus.weights[i] -= h;
            } else {
                plus.bias[i - nw] += h;
                minus.bias[i - nw] -= h;
            }
            let numeric =
                (common::naive_loss(&plus, &xs, &labels) - common::naive_loss(&minus, &xs, &labels)) / (2.0 * h);
            let scale = a.abs().max(numeric.abs());
            if scale > 0.0 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
        assert_relative_eq!(
            classifier::mean_loss(&model, &refs, &labels),
            common::naive_loss(&model, &xs, &labels),
            max_relative = 1e-12
        );
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}
