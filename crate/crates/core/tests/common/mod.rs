//! Independent brute-force reference implementations and fixtures shared by
//! the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use octfeat::classifier::ClassifierModel;
use octfeat::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Image copied into a buffer with `pad` replicated border pixels per side.
pub struct Padded {
    pub w: usize,
    pub h: usize,
    pub pad: usize,
    pub data: Vec<f64>,
}

impl Padded {
    pub fn new(img: &GrayImage, pad: usize) -> Self {
        let (w, h) = (img.width(), img.height());
        let pw = w + 2 * pad;
        let mut data = Vec::with_capacity(pw * (h + 2 * pad));
        for py in 0..h + 2 * pad {
            for px in 0..pw {
                let x = (px as isize - pad as isize).clamp(0, w as isize - 1) as usize;
                let y = (py as isize - pad as isize).clamp(0, h as isize - 1) as usize;
                data.push(img.pixels()[y * w + x] as f64);
            }
        }
        Self { w, h, pad, data }
    }

    /// Pixel at image coordinates, which may lie up to `pad` outside.
    pub fn at(&self, x: isize, y: isize) -> f64 {
        let pw = self.w + 2 * self.pad;
        let px = (x + self.pad as isize) as usize;
        let py = (y + self.pad as isize) as usize;
        self.data[py * pw + px]
    }
}

/// Per-cell orientation histograms, written from the definition: each pixel
/// votes its gradient magnitude into every bin with weight
/// `max(0, 1 - d / width)`, `d` the circular distance (mod 180) between the
/// pixel orientation and the bin centre `b * width`.
pub fn naive_cell_histograms(img: &GrayImage, cell: usize, bins: usize) -> Vec<Vec<f64>> {
    let p = Padded::new(img, 1);
    let width = 180.0 / bins as f64;
    let (cx, cy) = (img.width() / cell, img.height() / cell);
    let mut out = vec![vec![0.0; bins]; cx * cy];
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let gx = p.at(x + 1, y) - p.at(x - 1, y);
            let gy = p.at(x, y + 1) - p.at(x, y - 1);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let hist = &mut out[(y as usize / cell) * cx + x as usize / cell];
            for (b, slot) in hist.iter_mut().enumerate() {
                let d = (theta - b as f64 * width).abs();
                let d = d.min(180.0 - d);
                *slot += mag * (1.0 - d / width).max(0.0);
            }
        }
    }
    out
}

/// Full HOG descriptor with L2-Hys block normalization.
pub fn naive_hog(img: &GrayImage, cell: usize, block: usize, stride: usize, bins: usize) -> Vec<f64> {
    let hists = naive_cell_histograms(img, cell, bins);
    let (cx, cy) = (img.width() / cell, img.height() / cell);
    let mut out = Vec::new();
    let mut by = 0;
    while by + block <= cy {
        let mut bx = 0;
        while bx + block <= cx {
            let mut v: Vec<f64> = Vec::new();
            for y in by..by + block {
                for x in bx..bx + block {
                    v.extend(&hists[y * cx + x]);
                }
            }
            let norm = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() + 1e-5).sqrt();
            let n1 = norm(&v);
            let mut v: Vec<f64> = v.iter().map(|a| (a / n1).min(0.2)).collect();
            let n2 = norm(&v);
            v.iter_mut().for_each(|a| *a /= n2);
            out.extend(v);
            bx += stride;
        }
        by += stride;
    }
    out
}

/// Rotation-invariant uniform LBP codes for every pixel, row-major, using the
/// four-weight bilinear formula on a replicate-padded copy.
pub fn naive_lbp_codes(img: &GrayImage, points: usize, radius: f64) -> Vec<u32> {
    let pad = radius.ceil() as usize + 1;
    let p = Padded::new(img, pad);
    let mut codes = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let c = p.at(x as isize, y as isize);
            let mut bits = Vec::with_capacity(points);
            for k in 0..points {
                let a = 2.0 * PI * k as f64 / points as f64;
                let mut sx = x as f64 + radius * a.cos();
                let mut sy = y as f64 - radius * a.sin();
                if (sx - sx.round()).abs() < 1e-9 {
                    sx = sx.round();
                }
                if (sy - sy.round()).abs() < 1e-9 {
                    sy = sy.round();
                }
                let (x0, y0) = (sx.floor(), sy.floor());
                let (tx, ty) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as isize, y0 as isize);
                let taps = [p.at(x0, y0), p.at(x0 + 1, y0), p.at(x0, y0 + 1), p.at(x0 + 1, y0 + 1)];
                // interpolating equal values must reproduce them; the weighted
                // sum below can miss by one ulp (clamped corners hit this)
                let v = if taps.iter().all(|&t| t == taps[0]) {
                    taps[0]
                } else {
                    (1.0 - tx) * (1.0 - ty) * taps[0]
                        + tx * (1.0 - ty) * taps[1]
                        + (1.0 - tx) * ty * taps[2]
                        + tx * ty * taps[3]
                };
                bits.push(v >= c);
            }
            let mut transitions = 0;
            for k in 0..points {
                if bits[k] != bits[(k + 1) % points] {
                    transitions += 1;
                }
            }
            codes.push(if transitions <= 2 {
                bits.iter().filter(|b| **b).count() as u32
            } else {
                points as u32 + 1
            });
        }
    }
    codes
}

/// Mean cross-entropy of a model, computed directly in f64.
pub fn naive_loss(model: &ClassifierModel, xs: &[Vec<f32>], labels: &[usize]) -> f64 {
    let (k, d) = (model.num_classes(), model.feature_dim());
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let z: Vec<f64> = (0..k)
            .map(|c| model.bias[c] + (0..d).map(|j| model.weights[c * d + j] * x[j] as f64).sum::<f64>())
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    total / xs.len() as f64
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen_range(0u8..=255) as f32 / 255.0)
}

pub const CLASSES: [&str; 4] = ["CNV", "DME", "DRUSEN", "NORMAL"];

/// Writes a synthetic `<root>/<split>/<class>/<n>.png` corpus. Each class has
/// a distinct texture (stripe orientation) so HOG separates them.
pub fn synthetic_corpus(root: &Path, per_class: &[(&str, usize)], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (c, class) in CLASSES.iter().enumerate() {
        for &(split, n) in per_class {
            let dir = root.join(split).join(class);
            std::fs::create_dir_all(&dir).unwrap();
            for i in 0..n {
                let w = rng.gen_range(180..320u32);
                let h = rng.gen_range(120..240u32);
                let period = rng.gen_range(6.0..12.0f64);
                let phase = rng.gen_range(0.0..period);
                let img = image::GrayImage::from_fn(w, h, |x, y| {
                    let (x, y) = (x as f64, y as f64);
                    let t = match c {
                        0 => x,
                        1 => y,
                        2 => x + y,
                        _ => x - y,
                    };
                    let s = ((t + phase) * 2.0 * PI / period).sin();
                    let noise = rng.gen_range(-0.15..0.15);
                    image::Luma([((0.5 + 0.35 * s + noise).clamp(0.0, 1.0) * 255.0).round() as u8])
                });
                img.save(dir.join(format!("{i:03}.png"))).unwrap();
            }
        }
    }
}
