//! HOG descriptor of a canonical image, and a look at one cell's histogram.

use octfeat::hog::{self, HogParams};
use octfeat::imaging::{self, GrayImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // dark upper half, bright lower half: gradients point straight down (90 degrees)
    let img = GrayImage::from_fn(300, 200, |_, y| if y < 100 { 0.1 } else { 0.9 });
    let canonical = imaging::canonicalize(&img)?;

    let params = HogParams::default();
    let v = hog::hog_extract(canonical.image(), &params)?;
    println!(
        "descriptor dim {} (expected {})",
        v.dim(),
        params.output_dim(224, 224).unwrap()
    );

    let grid = hog::cell_histograms(canonical.image(), &params)?;
    let (cx, cy) = (5, 6);
    println!(
        "cell ({cx}, {cy}) histogram, bin centres every {} degrees:",
        180.0 / params.orientations as f64
    );
    for (b, v) in grid.cell(cx, cy).iter().enumerate() {
        println!("  {:>5.1} deg  {v:8.3}", b as f64 * 180.0 / params.orientations as f64);
    }

    let nonzero = v.values.iter().filter(|&&x| x != 0.0).count();
    let max = v.values.iter().cloned().fold(0.0f32, f32::max);
    println!("{nonzero} non-zero components, max {max:.4} (L2-Hys clips at 0.2 before renormalizing)");
    Ok(())
}
