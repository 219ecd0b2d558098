//! Rotation-invariant uniform LBP: code map statistics and both presets.

use octfeat::imaging::GrayImage;
use octfeat::lbp::{self, LbpPreset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let img = GrayImage::from_fn(224, 224, |x, y| {
        let (dx, dy) = (x as f32 - 112.0, y as f32 - 112.0);
        0.5 + 0.5 * ((dx * dx + dy * dy).sqrt() / 6.0).sin()
    });

    for preset in [LbpPreset::PaperDim, LbpPreset::PaperTable3] {
        let p = preset.params();
        let codes = lbp::lbp_codes(&img, &p)?;
        let mut counts = vec![0usize; p.bins()];
        codes.iter().for_each(|&c| counts[c as usize] += 1);
        let v = lbp::lbp_extract(&img, &p)?;
        println!("{} (P={}, R={}): dim {}", preset.as_str(), p.points, p.radius, v.dim());
        println!("  code histogram over the whole image: {counts:?}");
        println!(
            "  non-uniform share: {:.3}",
            counts[p.points + 1] as f64 / codes.len() as f64
        );
    }

    // code of an explicit 8-neighbour pattern
    let bits = [true, true, true, false, false, false, false, false];
    println!("uniform_code({bits:?}) = {}", lbp::uniform_code(&bits));
    Ok(())
}
